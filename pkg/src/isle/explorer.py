"""Adaptive margin search (IsleExplorer) and the ISLE loss estimate it produces.

The explorer draws ``ceil(capacity / expected_max_loss)`` points from f,
caches their SLE circuit delays, and sweeps the margin ``eps`` upward in fixed
steps. A pass at margin ``eps`` whitens every still-black point whose SLE delay
exceeds ``t_c - eps`` and runs one full simulation on it, in ascending sample
order. ``points_in_margin`` counts consecutive passing whites since the last
failing one; the sweep stops once it exceeds ``safety_limit``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import CircuitTiming
from .estimators import SleLossTable
from .params import RandomSource, draw_samples

log = logging.getLogger(__name__)

BLACK, WHITE = 0, 1

# eps_min update rules: "last_loss" moves eps_min to every pass that found a
# failing point; "literal" only when the pass ended with points_in_margin == 0.
EPS_MIN_RULES = ("last_loss", "literal")


class ExplorationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExplorerConfig:
    t_c: float
    mc_sim_capacity: int = 200
    expected_max_loss: float = 0.2
    safety_limit: int = 40
    eps_step: float = 0.02e-12
    eps_init: float | None = None  # defaults to -10 * eps_step
    mode: str = "d2"
    eps_ceiling: float | None = None  # defaults to t_c
    eps_min_rule: str = "last_loss"
    sle_mc_samples: int = 50_000

    def __post_init__(self):
        if self.mc_sim_capacity < 1:
            raise ValueError("mc_sim_capacity must be >= 1")
        if not 0 < self.expected_max_loss <= 1:
            raise ValueError("expected_max_loss must lie in (0, 1]")
        if self.safety_limit < 1:
            raise ValueError("safety_limit must be >= 1")
        if not self.eps_step > 0:
            raise ValueError("eps_step must be positive")
        if not self.t_c > 0:
            raise ValueError("t_c must be positive")
        if self.mode not in ("d1", "d2"):
            raise ValueError(f"mode must be d1 or d2, got {self.mode!r}")
        if self.eps_min_rule not in EPS_MIN_RULES:
            raise ValueError(f"eps_min_rule must be one of {EPS_MIN_RULES}")

    @property
    def num_f_samples(self) -> int:
        return math.ceil(self.mc_sim_capacity / self.expected_max_loss)

    @property
    def start_eps(self) -> float:
        return -10 * self.eps_step if self.eps_init is None else self.eps_init

    @property
    def ceiling(self) -> float:
        return self.t_c if self.eps_ceiling is None else self.eps_ceiling


@dataclass(frozen=True)
class SamplePoint:
    x: np.ndarray
    color: int
    sle_delay: float
    full_fail: int | None


@dataclass
class ExplorerState:
    """Colored samples plus the counters of the sweep.

    ``full_fail`` is -1 until a point is whitened and simulated.
    """

    x: np.ndarray
    sle_delay: np.ndarray
    color: np.ndarray = None
    full_fail: np.ndarray = None
    eps: float = 0.0
    eps_min: float | None = None
    points_in_margin: int = 0
    mc_loss_count: int = 0
    white_points: int = 0
    loss_points_at_eps_min: int = 0
    white_points_at_eps_min: int = 0
    trace: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.x)
        if self.color is None:
            self.color = np.full(n, BLACK, dtype=np.int8)
        if self.full_fail is None:
            self.full_fail = np.full(n, -1, dtype=np.int8)

    @property
    def points(self) -> list[SamplePoint]:
        return [
            SamplePoint(self.x[i], int(self.color[i]), float(self.sle_delay[i]),
                        None if self.full_fail[i] < 0 else int(self.full_fail[i]))
            for i in range(len(self.x))
        ]


@dataclass(frozen=True)
class PassRecord:
    eps: float
    new_whites: int
    new_loss_points: int
    points_in_margin: int
    white_points: int
    mc_loss_count: int


@dataclass(frozen=True)
class IsleResult:
    loss: float
    eps_min: float
    eps_end: float
    n_full_sims: int
    loss_le_eps_min: float
    safety_violations: int
    loss_points_at_eps_min: int
    white_points_at_eps_min: int
    num_f_samples: int
    trace: tuple[PassRecord, ...] = ()


def new_state(timing: CircuitTiming, samples, mode: str) -> ExplorerState:
    samples = timing.pset.check(samples)
    sle = np.asarray(timing.circuit_delay(samples, mode), dtype=float)
    return ExplorerState(np.array(samples), sle)


def explore_pass(state: ExplorerState, timing: CircuitTiming, t_c: float, eps: float) -> PassRecord:
    """Whiten and simulate every black point with SLE delay above ``t_c - eps``.

    Mutates ``state``. Oracle calls for the pass run as one batch; the counters
    are then replayed in ascending sample order.
    """
    t_eps = t_c - eps
    state.eps = eps
    new = np.flatnonzero((state.color == BLACK) & (state.sle_delay > t_eps))
    n_loss = 0
    if len(new):
        fails = timing.indicator_full(t_c, state.x[new])
        state.color[new] = WHITE
        state.full_fail[new] = fails
        state.white_points += len(new)
        for f in fails:
            if f:
                state.mc_loss_count += 1
                state.points_in_margin = 0
                n_loss += 1
            else:
                state.points_in_margin += 1
    rec = PassRecord(eps, len(new), n_loss, state.points_in_margin, state.white_points, state.mc_loss_count)
    state.trace.append(rec)
    return rec


def verify_safety(state: ExplorerState, t_c: float, eps_min: float) -> int:
    """Simulated failures the SLE test at ``t_c - eps_min`` would have rejected."""
    white_fail = (state.color == WHITE) & (state.full_fail == 1)
    return int(np.count_nonzero(white_fail & ~(state.sle_delay > t_c - eps_min)))


def sweep(state: ExplorerState, timing: CircuitTiming, config: ExplorerConfig) -> ExplorerState:
    """Run passes until the safety band holds more than ``safety_limit`` points."""
    k = 0
    while state.points_in_margin <= config.safety_limit:
        eps = config.start_eps + k * config.eps_step
        if eps > config.ceiling:
            if state.white_points == 0:
                raise ExplorationError(
                    f"no SLE-failing sample up to margin {config.ceiling:.4g} s; check t_c and the sample count"
                )
            raise ExplorationError(
                f"safety band never filled: {state.points_in_margin} points in margin at eps={eps:.4g} s"
            )
        rec = explore_pass(state, timing, config.t_c, eps)
        if config.eps_min_rule == "literal":
            update = state.points_in_margin == 0 and rec.new_whites > 0
        else:
            update = rec.new_loss_points > 0
        if update:
            if state.eps_min is not None and rec.new_loss_points and state.points_in_margin > 0:
                log.debug("loss point found at eps=%g after eps_min=%g", eps, state.eps_min)
            state.eps_min = eps
            state.loss_points_at_eps_min = state.mc_loss_count
            state.white_points_at_eps_min = state.white_points
        k += 1
    return state


def isle_explorer(
    timing: CircuitTiming,
    config: ExplorerConfig,
    src: RandomSource,
    le_table: SleLossTable | None = None,
    samples=None,
) -> IsleResult:
    """Determine the margin and return the ISLE loss estimate.

    ``Loss^{LE,eps_min}`` comes from ``le_table``; without one, a dedicated
    SLE-MC pool of ``config.sle_mc_samples`` draws is taken from a substream of
    ``src``. ``samples`` overrides the f-draws (mainly for tests).
    """
    if samples is None:
        samples = draw_samples(timing.pset, config.num_f_samples, src)
    state = new_state(timing, samples, config.mode)
    sweep(state, timing, config)

    if le_table is None:
        pool = draw_samples(timing.pset, config.sle_mc_samples, src.substream(1))
        le_table = SleLossTable(timing, pool, config.mode)

    eps_end = state.eps
    if state.eps_min is None:
        # no failing point among the whites: the estimate is zero
        eps_min, l_le, loss = config.start_eps, le_table.loss(config.t_c - config.start_eps), 0.0
    else:
        eps_min = state.eps_min
        l_le = le_table.loss(config.t_c - eps_min)
        loss = state.loss_points_at_eps_min / state.white_points_at_eps_min * l_le

    violations = verify_safety(state, config.t_c, eps_min)
    return IsleResult(
        loss=loss,
        eps_min=eps_min,
        eps_end=eps_end,
        n_full_sims=state.white_points,
        loss_le_eps_min=l_le,
        safety_violations=violations,
        loss_points_at_eps_min=state.loss_points_at_eps_min,
        white_points_at_eps_min=state.white_points_at_eps_min,
        num_f_samples=len(state.x),
        trace=tuple(state.trace),
    )


def explore(timing: CircuitTiming, config: ExplorerConfig, samples) -> ExplorerState:
    """Sweep only; returns the final state for inspection."""
    return sweep(new_state(timing, samples, config.mode), timing, config)
