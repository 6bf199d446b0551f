"""Statistical parameter space: Gaussian process/circuit parameters and seeded sampling.

Parameter vectors are plain numpy arrays whose last axis follows the order of
``ParameterSet.defs``. A batch of ``n`` vectors is an ``(n, dim)`` array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

PARAM_NAMES = ("L_eff", "V_dd", "V_th")

# 0.13 um node defaults (meters, volts); overridable through the experiment config.
DEFAULT_NOMINALS = {"L_eff": 0.13e-6, "V_dd": 1.2, "V_th": 0.3}
DEFAULT_RATIOS = {"L_eff": 0.15, "V_dd": 0.10, "V_th": 0.10}

TAGS = {
    "OnePar": ("L_eff",),
    "TwoPar": ("L_eff", "V_dd"),
    "ThrPar": ("L_eff", "V_dd", "V_th"),
}
TAG_ALIASES = {"one": "OnePar", "two": "TwoPar", "three": "ThrPar"}

# Draws further than this many sigmas from the mean are reported for audit.
TAIL_SIGMAS = 6.0


@dataclass(frozen=True)
class ParameterDef:
    name: str
    mean: float
    sigma: float

    def __post_init__(self):
        if not (self.mean > 0 and math.isfinite(self.mean)):
            raise ValueError(f"{self.name}: mean must be positive, got {self.mean}")
        # sigma == 0 is tolerated here so tests can build a degenerate distribution;
        # make_parameter_set never produces one.
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError(f"{self.name}: sigma must be nonnegative, got {self.sigma}")

    @property
    def ratio(self) -> float:
        """The 3-sigma/mean ratio."""
        return 3.0 * self.sigma / self.mean


@dataclass(frozen=True)
class ParameterSet:
    defs: tuple[ParameterDef, ...]
    tag: str = "custom"

    @property
    def dim(self) -> int:
        return len(self.defs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.defs)

    @property
    def means(self) -> np.ndarray:
        return np.array([d.mean for d in self.defs])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([d.sigma for d in self.defs])

    def index(self, name: str) -> int | None:
        try:
            return self.names.index(name)
        except ValueError:
            return None

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ValueError(f"expected parameter vectors of length {self.dim}, got shape {x.shape}")
        return x


def canonical_tag(tag: str) -> str:
    tag = TAG_ALIASES.get(tag, tag)
    if tag not in TAGS:
        raise ValueError(f"unknown parameter set {tag!r}; expected one of {sorted(TAGS)}")
    return tag


def make_parameter_set(
    tag: str,
    nominal_values: Mapping[str, float] | None = None,
    ratios: Mapping[str, float] | None = None,
) -> ParameterSet:
    """Build one of the OnePar/TwoPar/ThrPar sets with ``sigma = ratio * mean / 3``."""
    tag = canonical_tag(tag)
    nominal = {**DEFAULT_NOMINALS, **(nominal_values or {})}
    ratio = {**DEFAULT_RATIOS, **(ratios or {})}
    defs = []
    for name in TAGS[tag]:
        mu, r = float(nominal[name]), float(ratio[name])
        if not mu > 0:
            raise ValueError(f"{name}: nominal value must be positive, got {mu}")
        if not 0 < r < 1:
            raise ValueError(f"{name}: 3sigma/mu ratio must lie in (0, 1), got {r}")
        defs.append(ParameterDef(name, mu, r * mu / 3.0))
    return ParameterSet(tuple(defs), tag)


@dataclass(frozen=True)
class RandomSource:
    """A reproducible stream keyed by ``(seed, stream)``.

    Streams are derived with ``SeedSequence`` spawn keys and fed to the
    counter-based Philox bit generator, so distinct stream ids are independent
    and a stream's output depends only on the draw index.
    """

    seed: int
    stream: tuple[int, ...] = field(default=(0,))

    def __post_init__(self):
        if isinstance(self.stream, int):
            object.__setattr__(self, "stream", (self.stream,))
        if self.seed < 0 or any(s < 0 for s in self.stream):
            raise ValueError("seed and stream ids must be nonnegative")

    def substream(self, *ids: int) -> "RandomSource":
        return RandomSource(self.seed, self.stream + tuple(ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(ss))


def draw_from(pset: ParameterSet, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` vectors from an already-positioned generator."""
    if n < 1:
        raise ValueError("need at least one sample")
    z = rng.standard_normal((n, pset.dim))
    return pset.means + z * pset.sigmas


def draw_samples(pset: ParameterSet, n: int, src: RandomSource) -> np.ndarray:
    """The first ``n`` draws of stream ``src``; a longer request extends a shorter one."""
    return draw_from(pset, n, src.generator())


def density(pset: ParameterSet, x) -> np.ndarray | float:
    """Joint density f(x): product of the independent Gaussian marginals."""
    x = pset.check(x)
    mu, sd = pset.means, pset.sigmas
    z = (x - mu) / sd
    logf = -0.5 * np.sum(z * z, axis=-1) - np.sum(np.log(sd)) - 0.5 * pset.dim * math.log(2 * math.pi)
    out = np.exp(logf)
    return float(out) if out.ndim == 0 else out


def tail_draws(pset: ParameterSet, samples, k: float = TAIL_SIGMAS) -> int:
    """Number of vectors with any component beyond ``k`` sigmas."""
    x = pset.check(samples).reshape(-1, pset.dim)
    z = np.abs(x - pset.means) / pset.sigmas
    return int(np.count_nonzero(np.any(z > k, axis=1)))


def sample_parameter_vectors(pset: ParameterSet, values: Sequence[Mapping[str, float]]) -> np.ndarray:
    """Assemble vectors from name->value mappings (missing names take the mean)."""
    out = np.tile(pset.means, (len(values), 1))
    for i, row in enumerate(values):
        for name, v in row.items():
            j = pset.index(name)
            if j is None:
                raise KeyError(f"{name!r} is not in parameter set {pset.tag}")
            out[i, j] = v
    return out
