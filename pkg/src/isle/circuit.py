"""Circuits as sets of statistically critical paths, and their delay under three evaluators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gates import (
    DEFAULT_TABLE_STEP,
    GateCharacterization,
    SurrogateModel,
    build_characterization,
    surrogate_stage_delay,
)
from .params import ParameterSet

EVALUATORS = ("full", "d1", "d2")


@dataclass(frozen=True)
class GateInstance:
    kind: str
    h: float = 3.0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"electrical effort must be positive, got {self.h}")


@dataclass(frozen=True)
class Path:
    gates: tuple[GateInstance, ...]
    label: str = "path"

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not self.gates:
            raise ValueError("a path needs at least one gate")


@dataclass(frozen=True)
class CircuitModel:
    name: str
    paths: tuple[Path, ...]
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if not self.paths:
            raise ValueError("a circuit needs at least one critical path")

    @property
    def kinds(self) -> set[str]:
        return {g.kind for p in self.paths for g in p.gates}


@dataclass(frozen=True)
class TimingSpec:
    t_c: float

    def __post_init__(self):
        if not self.t_c > 0:
            raise ValueError("timing target must be positive")


def chain(name: str, kinds, h: float = 3.0, note: str = "") -> CircuitModel:
    gates = tuple(GateInstance(k, h) for k in kinds)
    return CircuitModel(name, (Path(gates, label=name),), note)


def builtin_circuits(h: float = 3.0) -> list[CircuitModel]:
    """InverterChain and GateChain.

    Only the five stages between nodes 3 and 8 are timed; the driver and load
    stages around them are folded into the electrical effort of the end stages.
    """
    note = "nodes 3->8; precursor 1->3 and postcursor 8->10 folded into end-stage h"
    return [
        chain("InverterChain", ["INV"] * 5, h, note),
        chain("GateChain", ["NAND2", "NOR2", "INV", "NAND2", "NOR2"], h, note),
    ]


def get_builtin(name: str, h: float = 3.0) -> CircuitModel:
    for c in builtin_circuits(h):
        if c.name.lower() == name.lower():
            return c
    raise KeyError(f"no built-in circuit named {name!r}")


@dataclass
class CircuitTiming:
    """Binds a circuit to a gate library and parameter set.

    Every method takes parameter-space vectors, one ``(dim,)`` vector or an
    ``(n, dim)`` batch, and is vectorized over the batch.
    """

    circuit: CircuitModel
    model: SurrogateModel
    pset: ParameterSet
    table_step: float | None = DEFAULT_TABLE_STEP
    _chars: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        missing = self.circuit.kinds - set(self.model.kinds)
        if missing:
            raise KeyError(f"circuit {self.circuit.name} uses unknown gate kinds {sorted(missing)}")

    def characterization(self, kind: str, mode: str) -> GateCharacterization:
        key = (kind, mode)
        if key not in self._chars:
            self._chars[key] = build_characterization(self.model, kind, mode, self.pset, self.table_step)
        return self._chars[key]

    def path_delay_full(self, path: Path, x):
        point = self.model.operating_point(self.pset, x)
        return sum(surrogate_stage_delay(self.model, self.model.kind(g.kind), point, g.h) for g in path.gates)

    def path_delay_sle(self, path: Path, x, mode: str):
        x = self.pset.check(x)
        tau = self.characterization(path.gates[0].kind, mode).tau_fn(x)
        total = 0.0
        for g in path.gates:
            p, gg = self.characterization(g.kind, mode).pg(x)
            total = total + p + gg * g.h
        return tau * total

    def path_delay(self, path: Path, x, evaluator: str = "full"):
        if evaluator == "full":
            return self.path_delay_full(path, x)
        if evaluator in ("d1", "d2"):
            return self.path_delay_sle(path, x, evaluator)
        raise ValueError(f"evaluator must be one of {EVALUATORS}, got {evaluator!r}")

    def circuit_delay(self, x, evaluator: str = "full"):
        delays = [self.path_delay(p, x, evaluator) for p in self.circuit.paths]
        out = delays[0]
        for d in delays[1:]:
            out = np.maximum(out, d)
        return out

    def indicator_full(self, t_c: float, x):
        """1 where the circuit fails the target (strictly slower than ``t_c``)."""
        return (np.asarray(self.circuit_delay(x, "full")) > t_c).astype(np.int8)

    def indicator_sle(self, t_eps: float, x, mode: str):
        return (np.asarray(self.circuit_delay(x, mode)) > t_eps).astype(np.int8)
