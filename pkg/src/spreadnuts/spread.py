"""SpreadNUTS: NUTS with k-ary path extension and exploration-biased selection.

Iteration ``k`` (counting from 1) extends the trajectory by ``k**k`` leapfrog
states in a random time direction. Those states are read as the leaves of a
full k-ary tree of depth ``k``, and only the two edge leaves of each internal
node are tested for a U-turn, giving ``(k**k - 1) / (k - 1)`` checks instead
of one per binary subtree.

The returned point is drawn from the slice-valid states with probability
proportional to its squared distance to the nearest previously returned
sample, looked up in a :class:`~spreadnuts.kdtree.SpatialIndex`. The chosen
point is then added to the index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import MassSpec, PhasePoint, leapfrog_step, make_state, state_energy
from .kdtree import SpatialIndex
from .nuts import (
    DrawResult,
    HamiltonianChain,
    SamplerConfig,
    TreeSummary,
    _draw_directions,
    _span_stop,
    _start_transition,
    _TreeContext,
)


def kary_points(k: int) -> int:
    if k < 1:
        raise ValueError("k must be at least 1")
    return k**k


def kary_check_count(k: int) -> int:
    """Internal nodes of a full k-ary tree with ``k**k`` leaves; 1 for the degenerate ``k=1``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k == 1:
        return 1
    return (k**k - 1) // (k - 1)


@dataclass
class SpreadConfig:
    """SpreadNUTS settings on top of the shared :class:`SamplerConfig`.

    ``max_total_points`` caps the cumulative number of leapfrog states per
    draw. ``binary_extension`` swaps the k-ary schedule for NUTS doubling
    (``2**(k-1)`` states at iteration ``k``, binary checks), which isolates
    the effect of the selection rule.
    """

    base: SamplerConfig = field(default_factory=SamplerConfig)
    max_total_points: int = 1024
    selection_bias_enabled: bool = True
    binary_extension: bool = False

    def __post_init__(self):
        if self.max_total_points < 1:
            raise ValueError("max_total_points must be at least 1")

    def schedule(self, k: int) -> tuple[int, int]:
        """``(arity, depth)`` of the tree built at iteration ``k``."""
        return (2, k - 1) if self.binary_extension else (k, k)


@dataclass
class KaryTreeLevel(TreeSummary):
    """Result of one k-ary extension; ``truncated`` marks a cut by the point budget."""

    iteration: int = 0
    arity: int = 0
    points_added: int = 0
    truncated: bool = False


def _oriented(states, lo, hi, direction):
    return (states[lo], states[hi]) if direction > 0 else (states[hi], states[lo])


def _build_kary(ctx, state, direction, arity, depth, budget) -> KaryTreeLevel:
    full = arity**depth
    n_points = min(full, budget)
    # spans of the internal nodes, smallest first; arity 1 keeps a single span-1 node
    spans = [arity**s for s in range(1, depth + 1)] if arity > 1 else [1] * min(depth, 1)
    states: list[PhasePoint] = []
    candidates: list[PhasePoint] = []
    accept_sum = 0.0
    n_checks = 0
    stopped = diverged = False
    current = state
    for i in range(n_points):
        current = ctx.step(ctx.target, current, direction * ctx.step_size, ctx.mass)
        h = state_energy(current, ctx.mass)
        if math.isfinite(h):
            accept_sum += min(1.0, math.exp(ctx.h0 - h))
        states.append(current)
        if not math.isfinite(h) or h - ctx.h0 > ctx.divergence_threshold:
            stopped = diverged = True
            break
        if ctx.log_u <= -h:
            candidates.append(current)
        for span in spans:
            if (i + 1) % span:
                break
            n_checks += 1
            minus, plus = _oriented(states, i + 1 - span, i, direction)
            if _span_stop(minus, plus, ctx.mass):
                stopped = True
                break
        if stopped:
            break
    truncated = not stopped and n_points < full
    minus, plus = _oriented(states, 0, len(states) - 1, direction)
    return KaryTreeLevel(
        minus=minus,
        plus=plus,
        proposal=None,
        n_valid=len(candidates),
        stopped=stopped or truncated,
        diverged=diverged,
        candidates=candidates,
        n_leapfrog=len(states),
        n_checks=n_checks,
        accept_sum=accept_sum,
        iteration=depth,
        arity=arity,
        points_added=len(states),
        truncated=truncated,
    )


def build_tree_kary(
    target,
    from_state: PhasePoint,
    log_u: float,
    direction: int,
    k: int,
    config: SpreadConfig,
    rng: np.random.Generator,
    *,
    step_size: float | None = None,
    mass: MassSpec | None = None,
    h0: float | None = None,
    budget: int | None = None,
    step=leapfrog_step,
) -> KaryTreeLevel:
    """Extend by the iteration-``k`` schedule from ``from_state`` in time ``direction``.

    Every slice-valid state is returned in ``candidates``. ``stopped`` is set
    by a failed edge-pair check, a divergence, or truncation at ``budget``
    (default ``config.max_total_points``); only truncation keeps the
    candidates usable, which ``truncated`` flags.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if direction not in (-1, 1):
        raise ValueError("direction must be -1 or +1")
    base = config.base
    mass = mass or MassSpec.identity(from_state.position.shape[0])
    if from_state.grad is None:
        from_state = make_state(target, from_state.position, from_state.momentum)
    eps = step_size if step_size is not None else base.step_size
    if eps is None:
        raise ValueError("no step size given")
    if h0 is None:
        h0 = state_energy(from_state, mass)
    ctx = _TreeContext(target, mass, eps, log_u, h0, base.divergence_threshold, rng, True, step)
    arity, depth = config.schedule(k)
    level = _build_kary(ctx, from_state, direction, arity, depth, budget if budget is not None else config.max_total_points)
    level.iteration = k
    return level


def selection_weights(candidates, index: SpatialIndex) -> np.ndarray:
    """Selection probabilities proportional to each candidate's nearest squared distance in ``index``.

    Falls back to uniform when the index is empty or every distance is zero.
    """
    n = len(candidates)
    if n == 0:
        raise ValueError("no candidates to weight")
    if index.size == 0:
        return np.full(n, 1.0 / n)
    d = index.nearest_sq_distances(candidates)
    total = float(np.sum(d))
    if total <= 0.0:
        return np.full(n, 1.0 / n)
    return d / total


def select_index(weights, rng: np.random.Generator) -> int:
    """Pick an index by splitting one uniform draw into intervals sized by ``weights``."""
    cum = np.cumsum(weights)
    i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(i, len(cum) - 1)


def spread_transition(
    target,
    current,
    config: SpreadConfig,
    index: SpatialIndex | None,
    rng: np.random.Generator,
    *,
    step_size: float | None = None,
    mass: MassSpec | None = None,
    step=leapfrog_step,
) -> DrawResult:
    """One SpreadNUTS transition. The chosen point is inserted into ``index`` when biasing is on."""
    base = config.base
    dim = current.position.shape[0] if isinstance(current, PhasePoint) else np.size(current)
    mass = mass or MassSpec.identity(dim)
    eps = step_size if step_size is not None else base.step_size
    if eps is None:
        raise ValueError("no step size given")
    state, h0, log_u = _start_transition(target, current, mass, rng)
    directions = _draw_directions(rng, base.max_depth)
    ctx = _TreeContext(target, mass, eps, log_u, h0, base.divergence_threshold, rng, True, step)

    minus = plus = state
    candidates = [state]
    stopped = diverged = False
    used = n_checks = 0
    accept_sum = 0.0
    k = 1
    while not stopped and k <= base.max_depth and used < config.max_total_points:
        direction = int(directions[k - 1])
        edge = plus if direction > 0 else minus
        arity, depth = config.schedule(k)
        level = _build_kary(ctx, edge, direction, arity, depth, config.max_total_points - used)
        if direction > 0:
            plus = level.plus
        else:
            minus = level.minus
        used += level.n_leapfrog
        n_checks += level.n_checks
        accept_sum += level.accept_sum
        k += 1
        if level.stopped and not level.truncated:
            stopped = True
            diverged = level.diverged
            break
        candidates.extend(level.candidates)
        if level.truncated:
            stopped = True
            break
        n_checks += 1
        stopped = _span_stop(minus, plus, mass)

    result = DrawResult(
        state=state,
        accept_stat=accept_sum / used if used else 0.0,
        n_leapfrog=used,
        n_valid=len(candidates),
        iterations=k - 1,
        stopped=stopped,
        diverged=diverged,
        minus=minus,
        plus=plus,
        n_checks=n_checks,
        moved=False,
    )
    if len(candidates) == 1:
        return result
    if config.selection_bias_enabled and index is not None:
        weights = selection_weights([c.position for c in candidates], index)
    else:
        weights = np.full(len(candidates), 1.0 / len(candidates))
    chosen = candidates[select_index(weights, rng)]
    if config.selection_bias_enabled and index is not None:
        index.insert(chosen.position)
    result.state = chosen
    result.moved = chosen is not state
    return result


def spread_nuts_draw(target, current, config: SpreadConfig, index: SpatialIndex, rng, mass: MassSpec | None = None):
    """Return the next SpreadNUTS position at ``config.base.step_size``."""
    return spread_transition(target, current, config, index, rng, mass=mass).position


class SpreadNUTS(HamiltonianChain):
    """SpreadNUTS chain; owns one spatial index of returned samples (burn-in included)."""

    name = "spreadnuts"

    def __init__(self, config: SpreadConfig | None = None, mass: MassSpec | None = None):
        self.spread_config = config or SpreadConfig()
        super().__init__(self.spread_config.base, mass)
        self.index: SpatialIndex | None = None

    def reset(self, target):
        self.index = SpatialIndex(target.dimension)

    def transition(self, target, state, step_size, mass, rng) -> DrawResult:
        return spread_transition(target, state, self.spread_config, self.index, rng, step_size=step_size, mass=mass)
