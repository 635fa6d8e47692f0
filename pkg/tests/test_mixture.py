import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf

from spreadnuts.evaluation import MixtureGenConfig, generate_random_mixture
from spreadnuts.mixture import (
    GaussianComponent,
    GaussianMixture,
    load_mixture,
    log_sum_exp,
    mixture_from_dict,
    mixture_grad_log_density,
    mixture_log_density,
    sample_direct,
    save_mixture,
    standard_normal,
    two_island_mixture,
)

# mpmath at 50 digits: -1000 + log(1 + exp(-0.5))
LSE_PAIR = -999.52592301581989331912700264491882925024440380533
# mpmath at 50 digits: log(0.3 N(0 | -2, 1) + 0.7 N(0 | 3, 4))
MIX_AT_ZERO = -2.7882556349133753416210172525634585433458824625777
HALF_LOG_2PI = 0.91893853320467274178032973640561763986139747363778


def direct_density(m, x):
    x = np.asarray(x, float)
    return sum(
        w * math.exp(c.log_norm_const - 0.5 * float((x - c.mean) @ c.precision @ (x - c.mean)))
        for w, c in zip(m.weights, m.components)
    )


def fd_grad(f, x, h=1e-6):
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestLogSumExp:
    def test_single(self):
        assert log_sum_exp([0.0]) == 0.0

    @pytest.mark.parametrize("a", [-1e4, -3.5, 0.0, 7.25, 1e4])
    def test_pair_symmetry(self, a):
        assert log_sum_exp([a, a]) == pytest.approx(a + math.log(2), rel=1e-15, abs=1e-12)

    def test_high_precision_oracle(self):
        assert log_sum_exp([-1000.0, -1000.5]) == pytest.approx(LSE_PAIR, rel=1e-15)

    def test_extremes_do_not_overflow(self):
        assert log_sum_exp([1e4, 1e4 - 1]) == pytest.approx(1e4 + math.log1p(math.exp(-1)), rel=1e-15)
        assert log_sum_exp([-1e4, -1e4]) == pytest.approx(-1e4 + math.log(2), rel=1e-15)

    def test_neg_inf(self):
        assert log_sum_exp([-math.inf, -math.inf]) == -math.inf
        assert log_sum_exp([-math.inf, 1.5]) == 1.5

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            log_sum_exp([])

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=8),
        st.floats(-1e3, 1e3),
        st.randoms(use_true_random=False),
    )
    def test_shift_and_permutation(self, values, shift, rnd):
        base = log_sum_exp(values)
        perm = list(values)
        rnd.shuffle(perm)
        assert log_sum_exp(perm) == pytest.approx(base, rel=1e-12, abs=1e-12)
        shifted = log_sum_exp([v + shift for v in values])
        # the shifted inputs themselves carry rounding of order ulp(max |v|)
        tol = 1e-12 + 4 * np.spacing(max(abs(v) for v in values) + abs(shift))
        assert abs(shifted - (base + shift)) <= tol

    def test_matches_mpmath_on_random_vectors(self):
        mp.dps = 40
        rng = np.random.default_rng(3)
        for _ in range(50):
            v = rng.uniform(-500, 500, size=rng.integers(1, 6))
            exact = mp.log(sum(mp.exp(mpf(float(t))) for t in v))
            assert log_sum_exp(v) == pytest.approx(float(exact), rel=1e-14, abs=1e-14)


class TestComponent:
    def test_precision_is_inverse(self):
        rng = np.random.default_rng(0)
        for d in range(1, 6):
            a = rng.uniform(size=(d, d))
            c = GaussianComponent(rng.normal(size=d), a @ a.T + 0.1 * np.eye(d))
            np.testing.assert_allclose(c.precision @ c.covariance, np.eye(d), atol=1e-10)

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            GaussianComponent(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            GaussianComponent(np.zeros(2), np.eye(3))


class TestMixtureConstruction:
    def test_weights_must_sum_to_one(self):
        c = GaussianComponent(np.zeros(1), np.eye(1))
        with pytest.raises(ValueError):
            GaussianMixture([c, c], weights=[0.5, 0.6])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            GaussianMixture([GaussianComponent(np.zeros(1), np.eye(1)), GaussianComponent(np.zeros(2), np.eye(2))])

    def test_weights_in_log_space(self):
        m = GaussianMixture.from_params([0.3, 0.7], [[-2.0], [3.0]], [[[1.0]], [[4.0]]])
        np.testing.assert_allclose(np.exp(m.log_weights), [0.3, 0.7], rtol=1e-15)
        assert abs(np.exp(m.log_weights).sum() - 1) < 1e-12


class TestLogDensity:
    def test_standard_normal_mode(self):
        assert mixture_log_density(standard_normal(1), np.array([0.0])) == pytest.approx(-HALF_LOG_2PI, rel=1e-15)

    def test_duplicates_collapse(self):
        c = GaussianComponent(np.zeros(1), np.eye(1))
        m = GaussianMixture([c, c], weights=[0.5, 0.5])
        assert m.log_density([0.0]) == pytest.approx(-HALF_LOG_2PI, rel=1e-15)

    def test_two_component_oracle(self):
        m = GaussianMixture.from_params([0.3, 0.7], [[-2.0], [3.0]], [[[1.0]], [[4.0]]])
        assert m.log_density([0.0]) == pytest.approx(MIX_AT_ZERO, rel=1e-14)

    def test_dimension_mismatch(self, std2):
        with pytest.raises(ValueError):
            std2.log_density(np.zeros(3))

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(11)
        gen = MixtureGenConfig(dimension_range=(1, 5))
        for _ in range(100):
            m = generate_random_mixture(gen, rng)
            x = m.sample(1, rng)[0] + rng.normal(size=m.dimension)
            direct = direct_density(m, x)
            if direct < 1e-250:
                continue
            assert math.exp(m.log_density(x)) == pytest.approx(direct, rel=1e-10)

    def test_far_tail_is_finite(self):
        m = GaussianMixture.from_params([0.5, 0.5], [[18.0, 18.0], [15.0, 19.0]], [0.01 * np.eye(2)] * 2)
        x = np.array([-20.0, -20.0])
        assert direct_density(m, x) == 0.0
        assert np.isfinite(m.log_density(x))


class TestGradient:
    def test_single_gaussian_closed_form(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(size=(3, 3))
        cov = a @ a.T + 0.5 * np.eye(3)
        mu = rng.normal(size=3)
        m = GaussianMixture([GaussianComponent(mu, cov)], weights=[1.0])
        x = rng.normal(size=3)
        np.testing.assert_allclose(m.grad_log_density(x), np.linalg.solve(cov, mu - x), rtol=1e-12)

    def test_symmetric_point_is_stationary(self):
        g = two_island_mixture(2.5).grad_log_density(np.zeros(2))
        np.testing.assert_allclose(g, 0.0, atol=1e-15)

    def test_finite_differences_2d(self):
        rng = np.random.default_rng(9)
        m = GaussianMixture.from_params(
            [0.4, 0.6], [[-1.0, 0.5], [1.5, -0.5]], [[[1.0, 0.3], [0.3, 0.8]], [[0.6, -0.2], [-0.2, 1.2]]]
        )
        for _ in range(20):
            x = rng.normal(scale=2.0, size=2)
            fd = fd_grad(m.log_density, x)
            g = mixture_grad_log_density(m, x)
            assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-5

    def test_fused_matches_separate(self, std2):
        lp, g = std2.log_density_and_grad(np.array([0.3, -1.2]))
        assert lp == std2.log_density([0.3, -1.2])
        np.testing.assert_array_equal(g, std2.grad_log_density([0.3, -1.2]))


class TestSampleDirect:
    def test_empty(self, std2):
        assert sample_direct(std2, 0, np.random.default_rng(0)).shape == (0, 2)

    def test_moments(self, std2):
        x = sample_direct(std2, 10000, np.random.default_rng(1))
        assert np.all(np.abs(x.mean(axis=0)) < 0.05)
        np.testing.assert_allclose(np.cov(x.T), np.eye(2), atol=0.1)

    def test_zero_weight_component_never_drawn(self):
        m = GaussianMixture.from_params([1.0, 0.0], [[0.0], [100.0]], [[[1.0]], [[1.0]]])
        x = m.sample(5000, np.random.default_rng(2))
        assert np.all(x < 50)

    def test_reproducible(self):
        m = two_island_mixture(2.5)
        a = m.sample(1000, np.random.default_rng(4))
        b = m.sample(1000, np.random.default_rng(4))
        assert a.tobytes() == b.tobytes()

    def test_component_frequencies(self):
        m = GaussianMixture.from_params([0.2, 0.8], [[-50.0], [50.0]], [[[1.0]], [[1.0]]])
        x = m.sample(20000, np.random.default_rng(6))
        assert abs(np.mean(x < 0) - 0.2) < 0.01


class TestMixtureFile:
    def test_roundtrip(self, tmp_path):
        m = GaussianMixture.from_params([0.25, 0.75], [[1.0, 2.0], [-3.0, 0.0]], [np.eye(2), 2 * np.eye(2)])
        save_mixture(m, tmp_path / "m.json")
        back = load_mixture(tmp_path / "m.json")
        np.testing.assert_allclose(back.weights, m.weights, rtol=1e-15)
        assert back.log_density([0.1, 0.2]) == pytest.approx(m.log_density([0.1, 0.2]), rel=1e-14)

    def test_weights_normalized_with_warning(self):
        spec = {"dimension": 1, "components": [{"weight": 1.0, "mean": [0], "covariance": [[1]]}] * 2}
        with pytest.warns(UserWarning):
            m = mixture_from_dict(spec)
        np.testing.assert_allclose(m.weights, [0.5, 0.5])

    def test_tiny_weight_drift_is_silent(self):
        spec = {
            "dimension": 1,
            "components": [
                {"weight": 0.5 + 1e-12, "mean": [0], "covariance": [[1]]},
                {"weight": 0.5, "mean": [1], "covariance": [[1]]},
            ],
        }
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            mixture_from_dict(spec)

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            mixture_from_dict({"dimension": 2, "components": [{"weight": 1, "mean": [0], "covariance": [[1]]}]})
        with pytest.raises(ValueError):
            mixture_from_dict({"dimension": 1})
