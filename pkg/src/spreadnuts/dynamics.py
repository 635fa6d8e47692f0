"""Phase-space energies and the leapfrog integrator.

Conventions: ``U(q) = -log pi(q)``, ``K(p) = sum_i p_i^2 / (2 m_i)`` with a
diagonal mass matrix, ``H = U + K``. Integration runs at unit temperature;
normalizing constants never appear because only energy differences are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mixture import log_density_and_grad


@dataclass(frozen=True)
class MassSpec:
    """Diagonal mass matrix ``M = diag(diagonal)``."""

    diagonal: np.ndarray

    def __post_init__(self):
        diag = np.atleast_1d(np.asarray(self.diagonal, dtype=float))
        if diag.ndim != 1 or not np.all(np.isfinite(diag)) or np.any(diag <= 0):
            raise ValueError("masses must be a 1-D vector of finite, strictly positive values")
        diag.setflags(write=False)
        object.__setattr__(self, "diagonal", diag)
        inv = 1.0 / diag
        inv.setflags(write=False)
        object.__setattr__(self, "inverse", inv)

    @classmethod
    def identity(cls, dimension: int) -> "MassSpec":
        return cls(np.ones(dimension))

    @property
    def dimension(self) -> int:
        return self.diagonal.shape[0]

    def sample_momentum(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.dimension) * np.sqrt(self.diagonal)


@dataclass
class PhasePoint:
    """Position/momentum pair.

    ``log_density`` and ``grad`` cache ``log pi(q)`` and its gradient so a
    trajectory evaluates the target once per leapfrog step. ``finite`` is
    False once any entry (or the density) blew up; such states count as
    divergent and are never extended.
    """

    position: np.ndarray
    momentum: np.ndarray
    log_density: float | None = None
    grad: np.ndarray | None = None
    finite: bool = True

    def __post_init__(self):
        if self.position.shape != self.momentum.shape:
            raise ValueError("position and momentum must have equal length")


def potential_energy(target, q) -> float:
    lp = float(target.log_density(np.asarray(q, dtype=float)))
    return -lp if math.isfinite(lp) else math.inf


def kinetic_energy(p, mass: MassSpec) -> float:
    p = np.asarray(p, dtype=float)
    if p.shape != mass.diagonal.shape:
        raise ValueError("momentum and mass have different lengths")
    return 0.5 * float(np.dot(p * p, mass.inverse))


def hamiltonian(target, q, p, mass: MassSpec) -> float:
    return potential_energy(target, q) + kinetic_energy(p, mass)


def make_state(target, q, p) -> PhasePoint:
    """Phase point with the density and gradient at ``q`` filled in."""
    q = np.array(q, dtype=float).reshape(-1)
    p = np.array(p, dtype=float).reshape(-1)
    lp, g = log_density_and_grad(target, q)
    lp = float(lp)
    ok = math.isfinite(lp) and bool(np.all(np.isfinite(g)))
    return PhasePoint(q, p, lp, np.asarray(g, dtype=float), ok)


def state_energy(state: PhasePoint, mass: MassSpec) -> float:
    """``H`` of a state whose density is cached; +inf for divergent states."""
    if not state.finite:
        return math.inf
    return -state.log_density + 0.5 * float(np.dot(state.momentum * state.momentum, mass.inverse))


def leapfrog_step(target, state: PhasePoint, eps: float, mass: MassSpec) -> PhasePoint:
    """One leapfrog step of size ``eps`` (negative ``eps`` integrates backward in time).

    Half momentum kick, full position drift, half momentum kick. Returns a
    state with ``finite=False`` instead of raising if anything overflows.
    """
    if not math.isfinite(eps) or eps == 0:
        raise ValueError("step size must be finite and non-zero")
    grad = state.grad
    if grad is None:
        _, grad = log_density_and_grad(target, state.position)
    with np.errstate(over="ignore", invalid="ignore"):
        p_half = state.momentum + (0.5 * eps) * grad
        q_new = state.position + eps * (p_half * mass.inverse)
        if not np.all(np.isfinite(q_new)):
            return PhasePoint(q_new, p_half, -math.inf, None, False)
        lp, g = log_density_and_grad(target, q_new)
        p_new = p_half + (0.5 * eps) * g
    lp = float(lp)
    ok = math.isfinite(lp) and bool(np.all(np.isfinite(p_new)))
    return PhasePoint(q_new, p_new, lp, g, ok)
