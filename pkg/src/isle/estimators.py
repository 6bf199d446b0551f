"""Loss estimators: standard MC, SLE-MC, and ISLE with its rejection sampler."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import CircuitTiming
from .params import RandomSource, density, draw_from

STD_MC = "STD-MC"
SLE_MC = "SLE-MC"
ISLE = "ISLE"


class EmptyBiasingRegion(RuntimeError):
    """No proposal passed the SLE acceptance test within the budget."""


class SafetyViolation(ValueError):
    pass


@dataclass(frozen=True)
class LossEstimate:
    value: float
    n_samples: int
    n_full_sims: int
    n_sle_evals: int
    kind: str

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"loss estimate {self.value} outside [0, 1]")


@dataclass(frozen=True)
class BiasedSampleSet:
    kept: np.ndarray
    n_proposed: int
    t_eps: float
    loss_le_eps: float
    mode: str = "d2"

    @property
    def acceptance_rate(self) -> float:
        return len(self.kept) / self.n_proposed


def _nonempty(samples) -> np.ndarray:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("empty sample set")
    return samples


def std_mc_loss(timing: CircuitTiming, t_c: float, samples) -> LossEstimate:
    samples = _nonempty(samples)
    n = len(samples)
    fails = int(np.sum(timing.indicator_full(t_c, samples)))
    return LossEstimate(fails / n, n, n, 0, STD_MC)


def sle_mc_loss(timing: CircuitTiming, t_eps: float, samples, mode: str) -> LossEstimate:
    samples = _nonempty(samples)
    n = len(samples)
    fails = int(np.sum(timing.indicator_sle(t_eps, samples, mode)))
    return LossEstimate(fails / n, n, 0, n, SLE_MC)


class SleLossTable:
    """SLE-MC loss as a function of threshold, from one fixed pool of samples.

    Delays are evaluated once, so ``loss(t)`` for many thresholds costs a
    binary search each.
    """

    def __init__(self, timing: CircuitTiming, samples, mode: str):
        samples = _nonempty(samples)
        self.mode = mode
        self.n = len(samples)
        self._sorted = np.sort(np.asarray(timing.circuit_delay(samples, mode)))

    def loss(self, t_eps: float) -> float:
        above = self.n - np.searchsorted(self._sorted, t_eps, side="right")
        return float(above) / self.n


def draw_biased(
    timing: CircuitTiming,
    t_eps: float,
    mode: str,
    src: RandomSource,
    n_kept: int | None = None,
    budget: int | None = None,
    loss_le_eps: float | None = None,
    batch: int = 4096,
) -> BiasedSampleSet:
    """Rejection sampling from f restricted to ``{SLE delay > t_eps}``.

    Stops after ``n_kept`` acceptances or ``budget`` proposals, whichever comes
    first; the budget defaults to 100x the kept target. ``loss_le_eps`` is the
    normalizer to attach; when omitted the kept/proposed ratio is used.
    """
    if not t_eps > 0:
        raise ValueError("t_eps must be positive")
    if n_kept is None and budget is None:
        raise ValueError("give a kept-sample target, a proposal budget, or both")
    if budget is None:
        budget = 100 * n_kept
    rng = src.generator()
    kept, proposed = [], 0
    n_have = 0
    while proposed < budget and (n_kept is None or n_have < n_kept):
        m = min(batch, budget - proposed)
        x = draw_from(timing.pset, m, rng)
        ok = np.flatnonzero(timing.indicator_sle(t_eps, x, mode))
        if n_kept is not None and n_have + len(ok) >= n_kept:
            ok = ok[: n_kept - n_have]
            # proposals after the last needed acceptance are not consumed
            proposed += int(ok[-1]) + 1
            kept.append(x[ok])
            n_have = n_kept
            break
        proposed += m
        kept.append(x[ok])
        n_have += len(ok)
    if n_have == 0:
        raise EmptyBiasingRegion(
            f"no proposal out of {proposed} had SLE delay above {t_eps:.6g} s; the margin is too small"
        )
    kept_arr = np.concatenate(kept)
    if loss_le_eps is None:
        loss_le_eps = n_have / proposed
    return BiasedSampleSet(kept_arr, proposed, t_eps, float(loss_le_eps), mode)


def isle_loss(timing: CircuitTiming, t_c: float, biased: BiasedSampleSet) -> LossEstimate:
    """``Loss^{LE,eps} * (failing kept) / N``; one oracle call per kept sample."""
    if not 0.0 < biased.loss_le_eps <= 1.0:
        raise ValueError(f"loss_le_eps must lie in (0, 1], got {biased.loss_le_eps}")
    kept = _nonempty(biased.kept)
    if not np.all(timing.indicator_sle(biased.t_eps, kept, biased.mode)):
        raise SafetyViolation("biased sample set contains points outside the SLE failure region")
    n = len(kept)
    fails = int(np.sum(timing.indicator_full(t_c, kept)))
    return LossEstimate(biased.loss_le_eps * fails / n, n, n, 0, ISLE)


def importance_weight(timing: CircuitTiming, x, t_eps: float, loss_le_eps: float, mode: str) -> float:
    """f/f~ at a point of the biasing support, where it is the constant ``loss_le_eps``."""
    if not np.all(timing.indicator_sle(t_eps, x, mode)):
        raise SafetyViolation("importance weight requested outside the support of the biasing density")
    return float(loss_le_eps)


def biased_density(timing: CircuitTiming, x, t_eps: float, loss_le_eps: float, mode: str):
    """The biasing density ``I_LE(t_eps, x) f(x) / Loss^{LE,eps}``."""
    return timing.indicator_sle(t_eps, x, mode) * density(timing.pset, x) / loss_le_eps
