"""Gaussian mixture targets.

Log-density, position gradient, and direct sampling for weighted mixtures of
multivariate normals. Everything is carried in log space; mixture sums go
through a sorted log-sum-exp so that points far from every mean still give
finite values.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


class TargetDistribution(Protocol):
    """What the samplers need from a target: a dimension, log pi(x), and its gradient."""

    dimension: int

    def log_density(self, x: np.ndarray) -> float: ...

    def grad_log_density(self, x: np.ndarray) -> np.ndarray: ...


def log_density_and_grad(target, x):
    """Evaluate ``(log pi(x), grad log pi(x))``, using a fused method when the target has one."""
    fused = getattr(target, "log_density_and_grad", None)
    if fused is not None:
        return fused(x)
    return target.log_density(x), target.grad_log_density(x)


def log_sum_exp(log_values: Sequence[float]) -> float:
    """Compute ``log(sum(exp(v)))`` by the pairwise recursion over sorted terms.

    Terms are sorted in descending order (stable, so ties keep their input
    order) and folded from the smallest upward with
    ``log(x_i + S) = log x_i + log1p(exp(log S - log x_i))``. Every exponent is
    bounded above by ``log(n)``, so nothing overflows.

    Raises
    ------
    ValueError
        If ``log_values`` is empty or contains NaN / +inf.
    """
    values = [float(v) for v in log_values]
    if not values:
        raise ValueError("log_sum_exp of an empty sequence")
    for v in values:
        if math.isnan(v) or v == math.inf:
            raise ValueError(f"log_sum_exp needs finite or -inf entries, got {v}")
    values.sort(reverse=True)
    if values[0] == -math.inf:
        return -math.inf
    acc = values[-1]
    for v in reversed(values[:-1]):
        if acc == -math.inf:
            acc = v
        else:
            acc = v + math.log1p(math.exp(acc - v))
    return acc


@dataclass(frozen=True)
class GaussianComponent:
    """One multivariate normal with cached precision, Cholesky factor, and log normalizer."""

    mean: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray = field(init=False, repr=False)
    cholesky: np.ndarray = field(init=False, repr=False)
    log_norm_const: float = field(init=False, repr=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        d = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (d, d):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of length {d}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("mean and covariance must be finite")
        if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-14):
            raise ValueError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive definite") from exc
        # precision through the Cholesky factor: P = L^-T L^-1
        chol_inv = np.linalg.solve(chol, np.eye(d))
        precision = chol_inv.T @ chol_inv
        precision = 0.5 * (precision + precision.T)
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        for name, value in (
            ("mean", mean),
            ("covariance", cov),
            ("precision", precision),
            ("cholesky", chol),
            ("log_norm_const", -0.5 * (log_det + d * LOG_2PI)),
        ):
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]

    def log_pdf(self, x) -> float:
        diff = self.mean - np.asarray(x, dtype=float)
        return self.log_norm_const - 0.5 * float(diff @ self.precision @ diff)


class GaussianMixture:
    """Weighted mixture of multivariate normals.

    Parameters
    ----------
    components : sequence of GaussianComponent
        All must share one dimension.
    weights : sequence of float, optional
        Non-negative mixture weights summing to 1 (within 1e-12). A zero weight
        is allowed and simply never contributes. Defaults to equal weights.
    log_weights : sequence of float, optional
        Alternative to ``weights``; exactly one of the two may be given.
    """

    def __init__(self, components, weights=None, log_weights=None):
        components = list(components)
        if not components:
            raise ValueError("a mixture needs at least one component")
        d = components[0].dimension
        if any(c.dimension != d for c in components):
            raise ValueError("all components must share one dimension")
        if weights is not None and log_weights is not None:
            raise ValueError("give weights or log_weights, not both")
        if log_weights is None:
            if weights is None:
                weights = np.full(len(components), 1.0 / len(components))
            weights = np.asarray(weights, dtype=float)
            if np.any(weights < 0) or not np.all(np.isfinite(weights)):
                raise ValueError("weights must be finite and non-negative")
            with np.errstate(divide="ignore"):
                log_weights = np.log(weights)
        log_weights = np.asarray(log_weights, dtype=float).copy()
        if log_weights.shape != (len(components),):
            raise ValueError("need exactly one weight per component")
        if np.any(np.isnan(log_weights)) or np.any(log_weights == np.inf):
            raise ValueError("log weights must be finite or -inf")
        total = np.sum(np.exp(log_weights))
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total!r}")
        log_weights.setflags(write=False)

        self.components = tuple(components)
        self.log_weights = log_weights
        self.dimension = d
        # stacked copies for the vectorized hot path
        self._means = np.stack([c.mean for c in components])
        self._precisions = np.stack([c.precision for c in components])
        self._offsets = log_weights + np.array([c.log_norm_const for c in components])
        self._cum_weights = np.cumsum(np.exp(log_weights))

    @classmethod
    def from_params(cls, weights, means, covariances):
        comps = [GaussianComponent(np.asarray(m, float), np.asarray(c, float)) for m, c in zip(means, covariances)]
        return cls(comps, weights=weights)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def __repr__(self):
        return f"GaussianMixture(n_components={len(self.components)}, dimension={self.dimension})"

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape != (self.dimension,):
            raise ValueError(f"expected a point of dimension {self.dimension}, got shape {x.shape}")
        return x

    def _log_terms(self, x):
        # per-component log(pi_i N(x | mu_i, Sigma_i)) and Sigma_i^-1 (mu_i - x)
        diff = self._means - x
        solved = np.einsum("kij,kj->ki", self._precisions, diff)
        quad = np.einsum("ki,ki->k", diff, solved)
        return self._offsets - 0.5 * quad, solved

    def component_log_terms(self, x) -> np.ndarray:
        """Per-component ``log pi_i + log N(x | mu_i, Sigma_i)``."""
        return self._log_terms(self._check(x))[0]

    def log_density(self, x) -> float:
        terms, _ = self._log_terms(self._check(x))
        return log_sum_exp(terms)

    def grad_log_density(self, x) -> np.ndarray:
        return self.log_density_and_grad(x)[1]

    def log_density_and_grad(self, x):
        """Return ``log p(x)`` and ``sum_i r_i(x) * Sigma_i^-1 (mu_i - x)``.

        ``r_i`` are posterior responsibilities ``exp(term_i - log p(x))``. Far
        from every component all of them can vanish to zero; that only
        happens when ``log p(x)`` is -inf.
        """
        x = self._check(x)
        terms, solved = self._log_terms(x)
        lse = log_sum_exp(terms)
        if lse == -math.inf:
            return lse, np.zeros(self.dimension)
        resp = np.exp(terms - lse)
        return lse, resp @ solved

    def responsibilities(self, x) -> np.ndarray:
        terms, _ = self._log_terms(self._check(x))
        return np.exp(terms - log_sum_exp(terms))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` i.i.d. points; returns an array of shape ``(n, dimension)``."""
        return sample_direct(self, n, rng)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "components": [
                {"weight": float(w), "mean": c.mean.tolist(), "covariance": c.covariance.tolist()}
                for w, c in zip(self.weights, self.components)
            ],
        }


def mixture_log_density(m: GaussianMixture, x) -> float:
    return m.log_density(x)


def mixture_grad_log_density(m: GaussianMixture, x) -> np.ndarray:
    return m.grad_log_density(x)


def sample_direct(m: GaussianMixture, n: int, rng: np.random.Generator) -> np.ndarray:
    """Categorical component choice, then ``mu + L z`` with ``z ~ N(0, I)``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    d = m.dimension
    out = np.empty((n, d))
    if n == 0:
        return out
    u = rng.random(n)
    # guard the last bin against cumulative round-off just below 1
    idx = np.minimum(np.searchsorted(m._cum_weights, u, side="right"), len(m.components) - 1)
    z = rng.standard_normal((n, d))
    for i, comp in enumerate(m.components):
        sel = idx == i
        if np.any(sel):
            out[sel] = comp.mean + z[sel] @ comp.cholesky.T
    return out


def standard_normal(dimension: int = 1) -> GaussianMixture:
    comp = GaussianComponent(np.zeros(dimension), np.eye(dimension))
    return GaussianMixture([comp], weights=[1.0])


def two_island_mixture(mu_magnitude: float, dimension: int = 2) -> GaussianMixture:
    """Equal-weight N(mu, I) and N(-mu, I) with ``mu = mu_magnitude * (1, ..., 1)``."""
    mu = np.full(dimension, float(mu_magnitude))
    eye = np.eye(dimension)
    return GaussianMixture([GaussianComponent(mu, eye), GaussianComponent(-mu, eye)], weights=[0.5, 0.5])


def mixture_from_dict(spec: dict) -> GaussianMixture:
    """Build a mixture from the mixture-file layout.

    Weights are renormalized; a ``UserWarning`` is issued if they were off
    from summing to 1 by more than 1e-9.
    """
    try:
        dimension = int(spec["dimension"])
        raw = spec["components"]
        weights = np.array([float(c["weight"]) for c in raw])
        means = [np.asarray(c["mean"], dtype=float).reshape(-1) for c in raw]
        covs = [np.asarray(c["covariance"], dtype=float) for c in raw]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed mixture specification: {exc}") from exc
    if dimension < 1:
        raise ValueError("dimension must be a positive integer")
    for mean, cov in zip(means, covs):
        if mean.shape != (dimension,) or np.atleast_2d(cov).shape != (dimension, dimension):
            raise ValueError(f"component shapes do not match dimension {dimension}")
    total = float(np.sum(weights))
    if not np.isfinite(total) or total <= 0 or np.any(weights < 0):
        raise ValueError("mixture weights must be non-negative with a positive sum")
    if abs(total - 1.0) > 1e-9:
        warnings.warn(f"mixture weights sum to {total!r}; normalizing", UserWarning, stacklevel=2)
    weights = weights / total
    comps = [GaussianComponent(m, np.atleast_2d(c)) for m, c in zip(means, covs)]
    # exact renormalization in log space so the sum-to-one check cannot trip on round-off
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    logw = logw - log_sum_exp(logw)
    return GaussianMixture(comps, log_weights=logw)


def load_mixture(path) -> GaussianMixture:
    with open(Path(path), encoding="utf-8") as fh:
        return mixture_from_dict(json.load(fh))


def save_mixture(m: GaussianMixture, path) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(m.to_dict(), fh, indent=2)
        fh.write("\n")
