"""Benchmark regime: random mixtures, grid histograms, discretized TV, trials.

Samples are binned into cells of a regular grid (0.1 wide on [-20, 20] per
axis by default) and compared through total variation
``0.5 * sum |p1 - p2|`` of the relative cell frequencies. Only occupied
cells are stored, so a 3-D grid with 6.4e7 cells costs memory proportional
to the sample count.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .mixture import GaussianComponent, GaussianMixture, two_island_mixture
from .nuts import ChainResult

logger = logging.getLogger(__name__)

RESAMPLE = "resample"


@dataclass(frozen=True)
class GridSpec:
    dimension: int
    cell_width: float = 0.1
    lower: float = -20.0
    upper: float = 20.0

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if not self.cell_width > 0 or not self.upper > self.lower:
            raise ValueError("need cell_width > 0 and upper > lower")

    @property
    def cells_per_axis(self) -> int:
        return int(round((self.upper - self.lower) / self.cell_width))

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "cell_width": self.cell_width, "lower": self.lower, "upper": self.upper}


@dataclass
class GridHistogram:
    """Sparse cell counts; keys are integer cell coordinates, one per axis."""

    grid: GridSpec
    counts: dict
    total: int

    def pdf(self) -> dict:
        return {cell: c / self.total for cell, c in self.counts.items()}

    def to_rows(self) -> list[tuple]:
        """``(cell_0, ..., cell_{d-1}, lower_0, ..., lower_{d-1}, mass)`` rows in cell order."""
        g = self.grid
        rows = []
        for cell in sorted(self.counts):
            corner = tuple(round(g.lower + c * g.cell_width, 10) for c in cell)
            rows.append((*cell, *corner, self.counts[cell] / self.total))
        return rows

    def write_csv(self, path) -> None:
        d = self.grid.dimension
        header = [f"cell_{j}" for j in range(d)] + [f"lower_{j}" for j in range(d)] + ["mass"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(self.to_rows())


def empirical_grid_pdf(samples, grid: GridSpec | None = None) -> GridHistogram:
    """Bin samples into grid cells; samples outside the bounds land in the nearest boundary cell."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if grid is None or grid.dimension == 1 else x.reshape(1, -1)
    if x.shape[0] == 0:
        raise ValueError("cannot build a histogram from zero samples")
    grid = grid or GridSpec(x.shape[1])
    if x.shape[1] != grid.dimension:
        raise ValueError(f"samples have dimension {x.shape[1]}, grid has {grid.dimension}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    idx = np.floor((x - grid.lower) / grid.cell_width).astype(np.int64)
    np.clip(idx, 0, grid.cells_per_axis - 1, out=idx)
    cells, counts = np.unique(idx, axis=0, return_counts=True)
    table = {tuple(int(c) for c in cell): int(n) for cell, n in zip(cells, counts)}
    return GridHistogram(grid, table, int(x.shape[0]))


def tv_distance(h1: GridHistogram, h2: GridHistogram) -> float:
    """Half the L1 distance between the two relative pdfs, in [0, 1]."""
    if h1.grid != h2.grid:
        raise ValueError("histograms are on different grids")
    p1, p2 = h1.pdf(), h2.pdf()
    # fsum is exactly rounded, so the result does not depend on argument order
    terms = [abs(m - p2.get(cell, 0.0)) for cell, m in p1.items()]
    terms += [m for cell, m in p2.items() if cell not in p1]
    return 0.5 * math.fsum(terms)


@dataclass
class MixtureGenConfig:
    num_components_range: tuple[int, int] = (1, 4)
    mean_bound: float = 20.0
    cov_scale_bound: float = 4.0
    dimension_range: tuple[int, int] = (1, 3)
    seed: int | None = None
    max_condition: float = 1e8
    max_attempts: int = 100

    def __post_init__(self):
        for name in ("num_components_range", "dimension_range"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} must be a non-empty range of positive integers")
            setattr(self, name, (int(lo), int(hi)))
        if self.dimension_range[1] > 5:
            raise ValueError("dimensions above 5 are not supported")
        if not (self.mean_bound > 0 and self.cov_scale_bound > 0):
            raise ValueError("bounds must be positive")

    def to_dict(self) -> dict:
        return {
            "num_components_range": list(self.num_components_range),
            "mean_bound": self.mean_bound,
            "cov_scale_bound": self.cov_scale_bound,
            "dimension_range": list(self.dimension_range),
            "seed": self.seed,
        }


def generate_random_mixture(config: MixtureGenConfig, rng: np.random.Generator | None = None) -> GaussianMixture:
    """Draw a random Gaussian mixture.

    Component count and dimension are discrete-uniform over their ranges.
    Each mean is uniform on ``[-mean_bound, mean_bound]^d``; each covariance
    is ``c * A @ A.T`` with ``A`` entries uniform on [0, 1] and ``c`` uniform
    on ``[0, cov_scale_bound]``, redrawing ``A`` (and ``c``) whenever the
    result is too ill-conditioned. Weights are uniform [0, 1] draws divided
    by their sum.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    k = int(rng.integers(config.num_components_range[0], config.num_components_range[1] + 1))
    d = int(rng.integers(config.dimension_range[0], config.dimension_range[1] + 1))
    comps = []
    for _ in range(k):
        mean = rng.uniform(-config.mean_bound, config.mean_bound, size=d)
        for _attempt in range(config.max_attempts):
            a = rng.uniform(0.0, 1.0, size=(d, d))
            c = rng.uniform(0.0, config.cov_scale_bound)
            aat = a @ a.T
            if c > 0 and np.linalg.cond(aat) <= config.max_condition:
                try:
                    comps.append(GaussianComponent(mean, c * aat))
                    break
                except ValueError:
                    continue
        else:
            raise RuntimeError(
                f"no well-conditioned covariance after {config.max_attempts} draws (seed={config.seed})"
            )
    raw = rng.uniform(0.0, 1.0, size=k)
    while raw.sum() == 0.0:
        raw = rng.uniform(0.0, 1.0, size=k)
    logw = np.log(raw) - np.log(raw.sum())
    logw -= np.log(np.sum(np.exp(logw)))
    return GaussianMixture(comps, log_weights=logw)


class DirectSampler:
    """Exact i.i.d. draws from a :class:`GaussianMixture`, shaped like an MCMC chain result."""

    name = "direct"

    def run(self, target, initial, n_samples, rng) -> ChainResult:
        samples = target.sample(n_samples, rng)
        return ChainResult(samples, np.ones(n_samples), np.zeros(n_samples, dtype=int), float("nan"))


@dataclass
class SamplerOutcome:
    name: str
    m_tv: float | None = None
    n_retained: int = 0
    duration_s: float = 0.0
    failed: bool = False
    error: str | None = None
    step_size: float | None = None
    mean_leapfrog: float | None = None
    mean_accept: float | None = None
    n_divergent: int = 0
    occupancy: list | None = None
    samples: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "name": self.name,
            "m_tv": _clean(self.m_tv),
            "n_retained": self.n_retained,
            "failed": self.failed,
            "error": self.error,
            "step_size": _clean(self.step_size),
            "mean_leapfrog": _clean(self.mean_leapfrog),
            "mean_accept": _clean(self.mean_accept),
            "n_divergent": self.n_divergent,
        }
        if self.occupancy is not None:
            out["occupancy"] = [float(v) for v in self.occupancy]
        if include_timings:
            out["duration_s"] = self.duration_s
        return out


@dataclass
class TrialReport:
    mixture: dict
    samplers: dict
    baseline_m_tv: float
    log_ratios: dict
    n_samples: int
    burn_in: int
    grid: GridSpec
    seed: object = None
    extra: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(s.failed for s in self.samplers.values())

    def m_tv(self, name: str) -> float | None:
        if name == RESAMPLE:
            return self.baseline_m_tv
        return self.samplers[name].m_tv

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "seed": self.seed,
            "n_samples": self.n_samples,
            "burn_in": self.burn_in,
            "grid": self.grid.to_dict(),
            "mixture": self.mixture,
            "baseline_m_tv": _clean(self.baseline_m_tv),
            "samplers": [s.to_dict(include_timings) for s in self.samplers.values()],
            "log_ratios": {k: _clean(v) for k, v in self.log_ratios.items()},
        }
        out.update(self.extra)
        return out


def _clean(v):
    # JSON has no inf/nan
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _log_ratio(a, b):
    if a is None or b is None or a <= 0 or b <= 0:
        return None
    return math.log(a / b)


def run_trial(
    mixture: GaussianMixture,
    samplers,
    n_samples: int,
    burn_in: int,
    grid: GridSpec | None = None,
    rng: np.random.Generator | None = None,
    seed=None,
    keep_samples: bool = False,
) -> TrialReport:
    """Run every sampler on ``mixture`` and score it against a direct-sample reference.

    All chains share one start point drawn from the mixture. The reference
    and the resample baseline are two further independent direct draws of
    ``n_samples - burn_in`` points. Random streams are spawned from ``rng``
    in a fixed order: start, reference, baseline, then one per sampler.

    Log-ratios are ``log(m_tv[a] / m_tv[b])`` for every sampler over the
    resample baseline, and for every pair of samplers in list order.
    """
    if n_samples <= burn_in or burn_in < 0:
        raise ValueError("need n_samples > burn_in >= 0")
    names = [s.name for s in samplers]
    if len(set(names)) != len(names) or RESAMPLE in names:
        raise ValueError(f"sampler names must be unique and not {RESAMPLE!r}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    grid = grid or GridSpec(mixture.dimension)
    start_rng, ref_rng, base_rng, *sampler_rngs = rng.spawn(3 + len(samplers))
    n_keep = n_samples - burn_in

    start = mixture.sample(1, start_rng)[0]
    reference = empirical_grid_pdf(mixture.sample(n_keep, ref_rng), grid)
    baseline = tv_distance(empirical_grid_pdf(mixture.sample(n_keep, base_rng), grid), reference)

    outcomes = {}
    for sampler, srng in zip(samplers, sampler_rngs):
        out = SamplerOutcome(sampler.name)
        t0 = time.perf_counter()
        try:
            res = sampler.run(mixture, start, n_samples, srng)
            kept = res.samples[burn_in:]
            out.m_tv = tv_distance(empirical_grid_pdf(kept, grid), reference)
            out.n_retained = int(kept.shape[0])
            out.step_size = float(res.step_size)
            out.mean_leapfrog = float(np.mean(res.n_leapfrog))
            out.mean_accept = float(np.mean(res.accept_stats))
            out.n_divergent = int(res.n_divergent)
            if keep_samples:
                out.samples = kept
        except Exception as exc:  # one broken sampler must not sink the trial
            logger.exception("sampler %s failed", sampler.name)
            out.failed = True
            out.error = f"{type(exc).__name__}: {exc}"
        out.duration_s = time.perf_counter() - t0
        outcomes[sampler.name] = out

    ratios = {}
    for name in names:
        ratios[f"{name}/{RESAMPLE}"] = _log_ratio(outcomes[name].m_tv, baseline)
    for a, b in combinations(names, 2):
        ratios[f"{a}/{b}"] = _log_ratio(outcomes[a].m_tv, outcomes[b].m_tv)

    return TrialReport(
        mixture=mixture.to_dict(),
        samplers=outcomes,
        baseline_m_tv=baseline,
        log_ratios=ratios,
        n_samples=n_samples,
        burn_in=burn_in,
        grid=grid,
        seed=seed,
    )


def mode_occupancy(samples, modes) -> np.ndarray:
    """Fraction of samples whose nearest mode (Euclidean) is each of ``modes``; ties go to the first."""
    x = np.asarray(samples, dtype=float)
    modes = np.asarray(modes, dtype=float)
    d2 = ((x[:, None, :] - modes[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(d2, axis=1)
    return np.bincount(nearest, minlength=len(modes)) / x.shape[0]


def two_island_experiment(
    mu_magnitude: float,
    samplers,
    n_samples: int,
    burn_in: int,
    rng: np.random.Generator | None = None,
    grid: GridSpec | None = None,
    seed=None,
) -> TrialReport:
    """Two equal-weight unit-covariance Gaussians at ``+mu`` and ``-mu``, ``mu = mu_magnitude * (1, 1)``.

    The report gains per-sampler ``occupancy``: fractions of retained
    samples nearer ``+mu`` and nearer ``-mu``.
    """
    if not mu_magnitude > 0:
        raise ValueError("mu_magnitude must be positive")
    mixture = two_island_mixture(mu_magnitude)
    report = run_trial(mixture, samplers, n_samples, burn_in, grid, rng, seed=seed, keep_samples=True)
    mu = np.full(2, float(mu_magnitude))
    modes = np.stack([mu, -mu])
    for out in report.samplers.values():
        if out.samples is not None:
            out.occupancy = mode_occupancy(out.samples, modes).tolist()
            out.samples = None
    report.extra = {"mu": mu.tolist(), "modes": modes.tolist()}
    return report
