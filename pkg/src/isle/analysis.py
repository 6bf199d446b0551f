"""Closed-form estimator errors and gains, and their empirical counterparts.

Errors follow the 2-sigma convention: an estimator with per-sample variance
``s2`` over ``n`` samples has error ``2 * sqrt(s2 / n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class InconsistentLoss(ValueError):
    """Raised when a biasing loss does not dominate the loss it should cover."""


def _check_prob(name, v):
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {v}")


def error_mc(loss: float, n: float) -> float:
    """Standard MC error ``2 sqrt(Loss * Yield / N)``."""
    _check_prob("loss", loss)
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * math.sqrt(loss * (1.0 - loss) / n)


def error_isle(loss: float, loss_le_eps: float, n: float) -> float:
    """ISLE error ``2 sqrt(Loss * (Loss_LE - Loss) / N)``."""
    _check_prob("loss", loss)
    _check_prob("loss_le_eps", loss_le_eps)
    if n < 1:
        raise ValueError("n must be >= 1")
    if loss > loss_le_eps:
        raise InconsistentLoss(f"loss {loss} exceeds the SLE-region loss {loss_le_eps}")
    return 2.0 * math.sqrt(loss * (loss_le_eps - loss) / n)


def _gap(loss, loss_le_eps):
    _check_prob("loss", loss)
    _check_prob("loss_le_eps", loss_le_eps)
    if not loss_le_eps > loss:
        raise InconsistentLoss(f"need loss_le_eps > loss, got {loss_le_eps} <= {loss}")
    return loss_le_eps - loss


def theoretical_gain(yield_: float, loss: float, loss_le_eps: float) -> float:
    """Simulation-count ratio ``Yield / (Loss_LE - Loss)`` at equal error."""
    return yield_ / _gap(loss, loss_le_eps)


def error_ratio(yield_: float, loss: float, loss_le_eps: float) -> float:
    return math.sqrt(theoretical_gain(yield_, loss, loss_le_eps))


def empirical_error(estimates: Sequence[float]) -> float:
    """Twice the sample standard deviation across repetitions."""
    x = np.asarray(estimates, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two repetitions")
    return 2.0 * float(np.std(x, ddof=1))


def empirical_gain(n_mc: float, n_isle: float, err_mc: float, err_isle: float) -> float:
    """``(N_MC / N_ISLE) * (Error_MC / Error_ISLE)**2``."""
    if min(n_mc, n_isle) <= 0:
        raise ValueError("simulation counts must be positive")
    if err_mc <= 0 or err_isle <= 0:
        raise ValueError("errors must be positive")
    return (n_mc / n_isle) * (err_mc / err_isle) ** 2


def loglog_slope(n, err) -> float:
    """Least-squares slope of log(err) against log(n)."""
    n, err = np.asarray(n, dtype=float), np.asarray(err, dtype=float)
    if np.any(err <= 0):
        raise ValueError("errors must be positive for a log-log fit")
    return float(np.polyfit(np.log(n), np.log(err), 1)[0])


@dataclass(frozen=True)
class ErrorReport:
    kind: str
    theoretical_error: float
    empirical_error: float
    n_full_sims: float

    @property
    def relative_deviation(self) -> float:
        return abs(self.empirical_error - self.theoretical_error) / self.theoretical_error


@dataclass(frozen=True)
class GainReport:
    theoretical_gain: float
    empirical_gain: float
    error_ratio: float


def gain_report(
    loss: float, loss_le_eps: float, n_mc: float, n_isle: float, err_mc: float, err_isle: float
) -> GainReport:
    """Both gains; the theoretical ones are ``inf`` when ``loss_le_eps <= loss``."""
    try:
        tg = theoretical_gain(1.0 - loss, loss, loss_le_eps)
        er = math.sqrt(tg)
    except InconsistentLoss:
        tg = er = math.inf
    eg = empirical_gain(n_mc, n_isle, err_mc, err_isle) if err_isle > 0 else math.inf
    return GainReport(tg, eg, er)
