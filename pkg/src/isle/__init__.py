"""Timing-loss estimation by importance sampling guided by stochastic logical effort."""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    empirical_error,
    empirical_gain,
    error_isle,
    error_mc,
    error_ratio,
    theoretical_gain,
)
from .circuit import CircuitModel, CircuitTiming, GateInstance, Path, builtin_circuits, get_builtin  # noqa: E402
from .estimators import draw_biased, isle_loss, sle_mc_loss, std_mc_loss  # noqa: E402
from .explorer import ExplorerConfig, isle_explorer, verify_safety  # noqa: E402
from .gates import GateKind, SurrogateModel, build_characterization  # noqa: E402
from .params import RandomSource, draw_samples, make_parameter_set  # noqa: E402

__all__ = [
    "CircuitModel",
    "CircuitTiming",
    "ExplorerConfig",
    "GateInstance",
    "GateKind",
    "Path",
    "RandomSource",
    "SurrogateModel",
    "build_characterization",
    "builtin_circuits",
    "draw_biased",
    "draw_samples",
    "empirical_error",
    "empirical_gain",
    "error_isle",
    "error_mc",
    "error_ratio",
    "get_builtin",
    "isle_explorer",
    "isle_loss",
    "make_parameter_set",
    "sle_mc_loss",
    "std_mc_loss",
    "theoretical_gain",
    "verify_safety",
]
