"""Baseline No-U-Turn sampler.

Slice-variable NUTS with a binary doubling tree. Every internal node of every
doubling subtree is checked for a U-turn between its two edge states, the
trajectory stops on a U-turn across the whole span, and the returned point
is uniform over slice-valid states (progressive swapping, so only one
candidate per subtree is kept in memory).

Step size comes from the doubling/halving heuristic and is then tuned by
dual averaging during burn-in.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import MassSpec, PhasePoint, leapfrog_step, make_state, state_energy

logger = logging.getLogger(__name__)


@dataclass
class SamplerConfig:
    """Controls shared by NUTS and SpreadNUTS.

    ``step_size=None`` means "pick one with :func:`find_reasonable_epsilon`".
    """

    step_size: float | None = None
    max_depth: int = 10
    divergence_threshold: float = 1000.0
    adapt_iterations: int = 500
    target_accept: float = 0.8
    seed: int = 0
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75

    def __post_init__(self):
        if self.step_size is not None and not (math.isfinite(self.step_size) and self.step_size > 0):
            raise ValueError("step_size must be a positive finite number")
        if self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if not self.divergence_threshold > 0:
            raise ValueError("divergence_threshold must be positive")
        if self.adapt_iterations < 0:
            raise ValueError("adapt_iterations must be non-negative")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")


@dataclass
class TreeSummary:
    minus: PhasePoint
    plus: PhasePoint
    proposal: PhasePoint | None
    n_valid: int
    stopped: bool
    diverged: bool = False
    candidates: list | None = None
    n_leapfrog: int = 0
    n_checks: int = 0
    accept_sum: float = 0.0

    @property
    def q_minus(self):
        return self.minus.position

    @property
    def p_minus(self):
        return self.minus.momentum

    @property
    def q_plus(self):
        return self.plus.position

    @property
    def p_plus(self):
        return self.plus.momentum

    @property
    def candidate_points(self):
        if self.candidates is None:
            return None
        return [c.position for c in self.candidates]


@dataclass
class DrawResult:
    """One Markov transition plus the trajectory statistics behind it."""

    state: PhasePoint
    accept_stat: float
    n_leapfrog: int
    n_valid: int
    iterations: int
    stopped: bool
    diverged: bool
    minus: PhasePoint
    plus: PhasePoint
    n_checks: int = 0
    moved: bool = True

    @property
    def position(self) -> np.ndarray:
        return self.state.position


def u_turn_stop(q_minus, q_plus, p_minus, p_plus) -> bool:
    """True when either edge momentum points back across the span (a zero dot product continues)."""
    dq = np.asarray(q_plus) - np.asarray(q_minus)
    return bool(np.dot(dq, p_minus) < 0 or np.dot(dq, p_plus) < 0)


def slice_accepts(log_u: float, target, q, p, mass: MassSpec) -> bool:
    """``u <= exp(-H(q, p))`` evaluated as ``log_u <= -H``."""
    state = make_state(target, q, p)
    h = state_energy(state, mass)
    return math.isfinite(h) and log_u <= -h


def _span_stop(minus: PhasePoint, plus: PhasePoint, mass: MassSpec) -> bool:
    # compare against velocities M^-1 p; identical to momenta for unit mass
    return u_turn_stop(minus.position, plus.position, minus.momentum * mass.inverse, plus.momentum * mass.inverse)


@dataclass
class _TreeContext:
    target: object
    mass: MassSpec
    step_size: float
    log_u: float
    h0: float
    divergence_threshold: float
    rng: np.random.Generator
    collect: bool = False
    step: object = leapfrog_step


def _leaf(ctx: _TreeContext, state: PhasePoint, direction: int) -> TreeSummary:
    new = ctx.step(ctx.target, state, direction * ctx.step_size, ctx.mass)
    h = state_energy(new, ctx.mass)
    diverged = not math.isfinite(h) or h - ctx.h0 > ctx.divergence_threshold
    valid = not diverged and ctx.log_u <= -h
    accept = 0.0 if not math.isfinite(h) else min(1.0, math.exp(ctx.h0 - h))
    return TreeSummary(
        minus=new,
        plus=new,
        proposal=new if valid else None,
        n_valid=int(valid),
        stopped=diverged,
        diverged=diverged,
        candidates=([new] if valid else []) if ctx.collect else None,
        n_leapfrog=1,
        accept_sum=accept,
    )


def _build(ctx: _TreeContext, state: PhasePoint, direction: int, depth: int) -> TreeSummary:
    if depth == 0:
        return _leaf(ctx, state, direction)
    first = _build(ctx, state, direction, depth - 1)
    if first.stopped:
        return first
    edge = first.plus if direction > 0 else first.minus
    second = _build(ctx, edge, direction, depth - 1)
    if direction > 0:
        minus, plus = first.minus, second.plus
    else:
        minus, plus = second.minus, first.plus
    out = TreeSummary(
        minus=minus,
        plus=plus,
        proposal=first.proposal,
        n_valid=first.n_valid + second.n_valid,
        stopped=second.stopped,
        diverged=second.diverged,
        n_leapfrog=first.n_leapfrog + second.n_leapfrog,
        n_checks=first.n_checks + second.n_checks,
        accept_sum=first.accept_sum + second.accept_sum,
    )
    if second.stopped:
        return out
    if second.n_valid and ctx.rng.random() * out.n_valid < second.n_valid:
        out.proposal = second.proposal
    if ctx.collect:
        out.candidates = first.candidates + second.candidates
    out.n_checks += 1
    out.stopped = _span_stop(minus, plus, ctx.mass)
    return out


def build_tree_binary(
    target,
    state: PhasePoint,
    log_u: float,
    direction: int,
    depth: int,
    config: SamplerConfig,
    rng: np.random.Generator,
    *,
    step_size: float | None = None,
    mass: MassSpec | None = None,
    h0: float | None = None,
    collect: bool = False,
    step=leapfrog_step,
) -> TreeSummary:
    """Build ``2**depth`` leapfrog states from ``state`` in time ``direction`` (+1 or -1).

    ``h0`` is the energy at the start of the whole transition (divergence is
    ``H - h0 > config.divergence_threshold``); it defaults to the energy of
    ``state``. ``collect=True`` also keeps every slice-valid state in
    ``candidates``. ``step`` replaces the integrator, which tests use to
    stub the dynamics.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if direction not in (-1, 1):
        raise ValueError("direction must be -1 or +1")
    mass = mass or MassSpec.identity(state.position.shape[0])
    if state.grad is None:
        state = make_state(target, state.position, state.momentum)
    eps = step_size if step_size is not None else config.step_size
    if eps is None:
        raise ValueError("no step size given")
    if h0 is None:
        h0 = state_energy(state, mass)
    ctx = _TreeContext(target, mass, eps, log_u, h0, config.divergence_threshold, rng, collect, step)
    return _build(ctx, state, direction, depth)


def _start_transition(target, current, mass, rng):
    if isinstance(current, PhasePoint) and current.grad is not None:
        q, lp, g = current.position, current.log_density, current.grad
        state = PhasePoint(q, mass.sample_momentum(rng), lp, g, current.finite)
    else:
        q = np.asarray(current.position if isinstance(current, PhasePoint) else current, dtype=float).reshape(-1)
        state = make_state(target, q, mass.sample_momentum(rng))
    h0 = state_energy(state, mass)
    # 1 - U(0, 1) lies in (0, 1], so the log is finite
    log_u = math.log1p(-rng.random()) - h0
    return state, h0, log_u


def _draw_directions(rng, n):
    return 2 * rng.integers(0, 2, size=n) - 1


def nuts_transition(
    target,
    current,
    config: SamplerConfig,
    rng: np.random.Generator,
    *,
    step_size: float | None = None,
    mass: MassSpec | None = None,
    step=leapfrog_step,
) -> DrawResult:
    """One NUTS transition from ``current`` (a position vector or a cached PhasePoint)."""
    dim = current.position.shape[0] if isinstance(current, PhasePoint) else np.size(current)
    mass = mass or MassSpec.identity(dim)
    eps = step_size if step_size is not None else config.step_size
    if eps is None:
        raise ValueError("no step size given")
    state, h0, log_u = _start_transition(target, current, mass, rng)
    # directions are drawn up front so the leapfrog sequence does not depend on
    # how many uniforms the candidate selection consumes
    directions = _draw_directions(rng, config.max_depth)
    ctx = _TreeContext(target, mass, eps, log_u, h0, config.divergence_threshold, rng, False, step)

    minus = plus = proposal = state
    n_valid = 1
    stopped = diverged = False
    n_leapfrog = n_checks = 0
    accept_sum = 0.0
    depth = 0
    while not stopped and depth < config.max_depth:
        direction = int(directions[depth])
        edge = plus if direction > 0 else minus
        sub = _build(ctx, edge, direction, depth)
        if direction > 0:
            plus = sub.plus
        else:
            minus = sub.minus
        n_leapfrog += sub.n_leapfrog
        n_checks += sub.n_checks
        accept_sum += sub.accept_sum
        depth += 1
        if sub.stopped:
            stopped = True
            diverged = sub.diverged
            break
        if sub.n_valid and rng.random() * (n_valid + sub.n_valid) < sub.n_valid:
            proposal = sub.proposal
        n_valid += sub.n_valid
        n_checks += 1
        stopped = _span_stop(minus, plus, mass)

    return DrawResult(
        state=proposal,
        accept_stat=accept_sum / n_leapfrog if n_leapfrog else 0.0,
        n_leapfrog=n_leapfrog,
        n_valid=n_valid,
        iterations=depth,
        stopped=stopped,
        diverged=diverged,
        minus=minus,
        plus=plus,
        n_checks=n_checks,
        moved=proposal is not state,
    )


def nuts_draw(target, current, config: SamplerConfig, rng: np.random.Generator, mass: MassSpec | None = None):
    """Return the next position of a NUTS chain at ``config.step_size``."""
    return nuts_transition(target, current, config, rng, mass=mass).position


def find_reasonable_epsilon(target, q, mass: MassSpec | None = None, rng=None, max_iter: int = 100) -> float:
    """Double or halve ``eps`` from 1 until a single leapfrog step's acceptance ratio crosses 1/2.

    Emits a ``RuntimeWarning`` and returns the last value if ``max_iter``
    rescalings were not enough.
    """
    rng = rng if rng is not None else np.random.default_rng()
    q = np.asarray(q, dtype=float).reshape(-1)
    mass = mass or MassSpec.identity(q.shape[0])
    state = make_state(target, q, mass.sample_momentum(rng))
    h0 = state_energy(state, mass)

    def log_ratio(eps):
        h = state_energy(leapfrog_step(target, state, eps, mass), mass)
        r = h0 - h
        return r if not math.isnan(r) else -math.inf

    eps = 1.0
    ratio = log_ratio(eps)
    a = 1 if ratio > -math.log(2.0) else -1
    for _ in range(max_iter):
        if not a * ratio > -a * math.log(2.0):
            return eps
        eps *= 2.0**a
        ratio = log_ratio(eps)
    warnings.warn(f"step size search did not settle after {max_iter} rescalings; using {eps:g}", RuntimeWarning, stacklevel=2)
    return eps


class DualAveraging:
    """Dual-averaging step-size controller.

    Call :meth:`update` once per burn-in iteration with that iteration's
    mean acceptance statistic. After ``adapt_iterations`` updates the step
    size freezes at the averaged iterate.
    """

    def __init__(self, initial_step, target_accept=0.8, gamma=0.05, t0=10.0, kappa=0.75, adapt_iterations=None):
        self.mu = math.log(10.0 * initial_step)
        self.target_accept = target_accept
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.adapt_iterations = adapt_iterations
        self.t = 0
        self.h_bar = 0.0
        self.log_step = math.log(initial_step)
        self.log_step_bar = 0.0

    @classmethod
    def from_config(cls, initial_step, config: SamplerConfig):
        return cls(initial_step, config.target_accept, config.gamma, config.t0, config.kappa, config.adapt_iterations)

    @property
    def frozen(self) -> bool:
        return self.adapt_iterations is not None and self.t >= self.adapt_iterations

    @property
    def step_size(self) -> float:
        return math.exp(self.log_step_bar if self.frozen else self.log_step)

    @property
    def final_step_size(self) -> float:
        return math.exp(self.log_step_bar) if self.t else math.exp(self.log_step)

    def update(self, accept_stat: float) -> float:
        if self.frozen:
            return self.step_size
        self.t += 1
        t = self.t
        eta = 1.0 / (t + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target_accept - accept_stat)
        self.log_step = self.mu - math.sqrt(t) / self.gamma * self.h_bar
        w = t ** (-self.kappa)
        self.log_step_bar = w * self.log_step + (1.0 - w) * self.log_step_bar
        return self.step_size


def adapt_step_size(history, config: SamplerConfig, initial_step: float) -> float:
    """Replay a sequence of acceptance statistics and return the resulting step size."""
    da = DualAveraging.from_config(initial_step, config)
    for a in history:
        da.update(a)
    return da.step_size


@dataclass
class ChainResult:
    samples: np.ndarray
    accept_stats: np.ndarray
    n_leapfrog: np.ndarray
    step_size: float
    n_divergent: int = 0
    extras: dict = field(default_factory=dict)


class HamiltonianChain:
    """Shared chain driver: step-size search, burn-in adaptation, sample collection."""

    name = "hmc"

    def __init__(self, config: SamplerConfig | None = None, mass: MassSpec | None = None):
        self.config = config or SamplerConfig()
        self.mass = mass

    def reset(self, target):
        """Hook run at the start of :meth:`run`."""

    def transition(self, target, state, step_size, mass, rng) -> DrawResult:
        raise NotImplementedError

    def run(self, target, initial, n_samples: int, rng: np.random.Generator) -> ChainResult:
        """Run ``n_samples`` transitions from ``initial`` (burn-in included in the output)."""
        cfg = self.config
        initial = np.asarray(initial, dtype=float).reshape(-1)
        if initial.shape[0] != target.dimension:
            raise ValueError("initial point has the wrong dimension")
        mass = self.mass or MassSpec.identity(target.dimension)
        self.reset(target)
        eps0 = cfg.step_size if cfg.step_size is not None else find_reasonable_epsilon(target, initial, mass, rng)
        da = DualAveraging.from_config(eps0, cfg)
        state = make_state(target, initial, np.zeros_like(initial))
        if not state.finite:
            raise ValueError("initial point has zero density")
        samples = np.empty((n_samples, target.dimension))
        accept = np.empty(n_samples)
        n_lf = np.empty(n_samples, dtype=int)
        divergent = 0
        for i in range(n_samples):
            if i < cfg.adapt_iterations:
                eps = da.step_size
            else:
                eps = da.final_step_size
            res = self.transition(target, state, eps, mass, rng)
            if i < cfg.adapt_iterations:
                da.update(res.accept_stat)
            state = res.state
            samples[i] = state.position
            accept[i] = res.accept_stat
            n_lf[i] = res.n_leapfrog
            divergent += res.diverged
        if divergent:
            logger.debug("%s: %d divergent transitions out of %d", self.name, divergent, n_samples)
        return ChainResult(samples, accept, n_lf, da.final_step_size, divergent)


class NUTS(HamiltonianChain):
    name = "nuts"

    def transition(self, target, state, step_size, mass, rng) -> DrawResult:
        return nuts_transition(target, state, self.config, rng, step_size=step_size, mass=mass)
