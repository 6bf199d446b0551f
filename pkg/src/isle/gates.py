"""Gate delay oracle and stochastic logical-effort characterization.

The oracle stands in for transistor-level simulation of a single stage. For a
gate kind with topology factor ``c_g``, parasitic factor ``c_p`` and coupling
factor ``c_x`` driving electrical effort ``h`` at operating point
``(L_eff, V_dd, V_th)``::

    D = k * L * V / (V - Vth)**alpha * (c_p * (1 + c_x*rho) + c_g * (1 + c_x*rho/2) * h)
    rho = (L / L_nom - 1) + (V_nom / V - 1)

The stage delay is affine in ``h``, so a two-point fit recovers the logical
effort coefficients at a given operating point exactly. The coupling terms are
what first-degree SLE (p, g frozen at nominal) cannot represent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .params import DEFAULT_NOMINALS, ParameterSet

MODES = ("d1", "d2")

# Normalized (sigma-unit) spacing of the pre-characterization grid used by SLE.d2.
DEFAULT_TABLE_STEP = 0.2

# Default c_x. Strong enough that the first-degree model error is resolvable by
# the margin search at ~1000 samples.
DEFAULT_COUPLING = 1.0


class NonPhysicalOperatingPoint(ValueError):
    pass


@dataclass(frozen=True)
class GateKind:
    name: str
    complexity: float  # c_g, logical effort relative to the reference inverter
    parasitic: float  # c_p
    coupling: float = DEFAULT_COUPLING  # c_x

    def __post_init__(self):
        vals = (self.complexity, self.parasitic, self.coupling)
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise ValueError(f"gate {self.name}: factors must be finite and nonnegative")
        if self.complexity < 1:
            raise ValueError(f"gate {self.name}: complexity must be >= 1")
        if self.name == "INV" and self.complexity != 1:
            raise ValueError("INV must have complexity exactly 1")


def default_kinds(coupling: float = DEFAULT_COUPLING) -> dict[str, GateKind]:
    return {
        "INV": GateKind("INV", 1.0, 1.0, coupling),
        "NAND2": GateKind("NAND2", 4.0 / 3.0, 2.0, coupling),
        "NOR2": GateKind("NOR2", 5.0 / 3.0, 2.0, coupling),
    }


# Parasitic-free, coupling-free inverter that defines the time unit tau.
REFERENCE_INVERTER = GateKind("INV", 1.0, 0.0, 0.0)


@dataclass(frozen=True)
class SurrogateModel:
    alpha: float = 1.3
    # s * V**(alpha-1) / m; gives tau ~ 10 ps at the 0.13 um nominal point
    k_time: float = 5.6e-5
    nominal_leff: float = DEFAULT_NOMINALS["L_eff"]
    nominal_vdd: float = DEFAULT_NOMINALS["V_dd"]
    nominal_vth: float = DEFAULT_NOMINALS["V_th"]
    kinds: Mapping[str, GateKind] = field(default_factory=default_kinds)

    def __post_init__(self):
        if not 1.0 <= self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in [1, 2], got {self.alpha}")
        if not self.k_time > 0:
            raise ValueError("k_time must be positive")
        object.__setattr__(self, "kinds", dict(self.kinds))

    @property
    def nominal_point(self) -> np.ndarray:
        return np.array([self.nominal_leff, self.nominal_vdd, self.nominal_vth])

    def kind(self, name: str) -> GateKind:
        try:
            return self.kinds[name]
        except KeyError:
            raise KeyError(f"unknown gate kind {name!r}; library has {sorted(self.kinds)}") from None

    def with_coupling(self, coupling: float) -> "SurrogateModel":
        kinds = {k: GateKind(g.name, g.complexity, g.parasitic, coupling) for k, g in self.kinds.items()}
        return SurrogateModel(self.alpha, self.k_time, self.nominal_leff, self.nominal_vdd, self.nominal_vth, kinds)

    def operating_point(self, pset: ParameterSet, x) -> np.ndarray:
        """Expand parameter-space vectors to full ``(..., 3)`` operating points.

        Parameters absent from the set sit at the model's nominal values.
        """
        x = pset.check(x)
        out = np.broadcast_to(self.nominal_point, x.shape[:-1] + (3,)).copy()
        for j, name in enumerate(pset.names):
            out[..., ("L_eff", "V_dd", "V_th").index(name)] = x[..., j]
        return out


def _unpack(model: SurrogateModel, point):
    point = np.asarray(point, dtype=float)
    if point.shape[-1:] != (3,):
        raise ValueError(f"operating points must have 3 components, got shape {point.shape}")
    L, V, Vth = point[..., 0], point[..., 1], point[..., 2]
    if np.any(V <= Vth):
        raise NonPhysicalOperatingPoint("V_dd must exceed V_th")
    return L, V, Vth


def _intrinsic(model: SurrogateModel, L, V, Vth):
    return model.k_time * L * V / (V - Vth) ** model.alpha


def _rho(model: SurrogateModel, L, V):
    return (L / model.nominal_leff - 1.0) + (model.nominal_vdd / V - 1.0)


def surrogate_stage_delay(model: SurrogateModel, kind: GateKind, point, h, coupling: bool = True):
    """Oracle stage delay in seconds at operating point(s) ``point = (L, V, Vth)``."""
    L, V, Vth = _unpack(model, point)
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValueError("electrical effort must be nonnegative")
    cx = kind.coupling if coupling else 0.0
    rho = _rho(model, L, V)
    return _intrinsic(model, L, V, Vth) * (
        kind.parasitic * (1.0 + cx * rho) + kind.complexity * (1.0 + cx * rho / 2.0) * h
    )


def characterize_tau(model: SurrogateModel, point):
    """Delay unit tau(X): slope of the parasitic-free reference inverter's delay line."""
    return surrogate_stage_delay(model, REFERENCE_INVERTER, point, 1.0) - surrogate_stage_delay(
        model, REFERENCE_INVERTER, point, 0.0
    )


def characterize_gate(model: SurrogateModel, kind: GateKind, point, h1: float = 1.0, h2: float = 4.0):
    """Two-point fit of ``delay(h) = tau * (p + g*h)``; returns ``(p, g)``."""
    if not 0 < h1 < h2:
        raise ValueError(f"fit points must satisfy 0 < h1 < h2, got {h1}, {h2}")
    d1 = surrogate_stage_delay(model, kind, point, h1)
    d2 = surrogate_stage_delay(model, kind, point, h2)
    slope = (d2 - d1) / (h2 - h1)
    intercept = d1 - slope * h1
    tau = characterize_tau(model, point)
    return intercept / tau, slope / tau


@dataclass(frozen=True)
class GateCharacterization:
    """tau(X), p(X), g(X) for one gate kind, as functions on parameter-space vectors.

    In ``d1`` mode p and g are the nominal-point constants. In ``d2`` mode they
    follow X through a pre-characterization grid: with ``table_step`` set, each
    vector is snapped to the nearest node of a grid spaced ``table_step`` sigmas
    apart per parameter and p, g are the fit at that node. ``table_step=None``
    fits at X itself, which is exact on the affine oracle.
    """

    kind: GateKind
    mode: str
    model: SurrogateModel
    pset: ParameterSet
    table_step: float | None = DEFAULT_TABLE_STEP
    h1: float = 1.0
    h2: float = 4.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.table_step is not None and not self.table_step > 0:
            raise ValueError("table_step must be positive or None")

    def _nominal_pg(self):
        return characterize_gate(self.model, self.kind, self.model.nominal_point, self.h1, self.h2)

    def grid_node(self, x) -> np.ndarray:
        x = self.pset.check(x)
        if self.table_step is None:
            return x
        mu, sd = self.pset.means, self.pset.sigmas
        q = self.table_step
        return mu + np.round((x - mu) / (sd * q)) * (sd * q)

    def tau_fn(self, x):
        return characterize_tau(self.model, self.model.operating_point(self.pset, x))

    def pg(self, x):
        x = self.pset.check(x)
        if self.mode == "d1":
            p, g = self._nominal_pg()
            shape = x.shape[:-1]
            return np.broadcast_to(p, shape) * 1.0, np.broadcast_to(g, shape) * 1.0
        node = self.model.operating_point(self.pset, self.grid_node(x))
        return characterize_gate(self.model, self.kind, node, self.h1, self.h2)

    def p_fn(self, x):
        return self.pg(x)[0]

    def g_fn(self, x):
        return self.pg(x)[1]


def build_characterization(
    model: SurrogateModel,
    kind: str | GateKind,
    mode: str,
    param_set: ParameterSet,
    table_step: float | None = DEFAULT_TABLE_STEP,
) -> GateCharacterization:
    if isinstance(kind, str):
        kind = model.kind(kind)
    elif kind.name not in model.kinds:
        raise KeyError(f"gate kind {kind.name!r} is not in the library")
    return GateCharacterization(kind, mode, model, param_set, table_step)


def logical_effort_delay(tau, p, g, h):
    """Stage delay ``tau * (p + g*h)``."""
    return tau * (p + g * h)
