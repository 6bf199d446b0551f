"""Experiment orchestration: config, T_c calibration, repeated runs, reports.

One master seed expands into independent numpy streams keyed by purpose and
repetition index:

    (0,)          T_c calibration
    (1, r)        STD-MC samples of repetition r (also pooled for Loss^LE)
    (2, r)        IsleExplorer f-samples of repetition r, shared by d1 and d2
    (3,)          Loss^LE pool top-up beyond the pooled STD-MC samples
    (4,)          delay scatter
    (5, r)        error-vs-N curve, STD-MC
    (6, r, m)     error-vs-N curve, ISLE mode m
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Any, Mapping

import numpy as np

from . import __version__
from .analysis import (
    InconsistentLoss,
    empirical_error,
    empirical_gain,
    error_isle,
    error_mc,
    theoretical_gain,
)
from .circuit import CircuitModel, CircuitTiming, GateInstance, Path, builtin_circuits
from .estimators import SafetyViolation, SleLossTable, draw_biased, std_mc_loss
from .explorer import ExplorerConfig, isle_explorer
from .gates import DEFAULT_TABLE_STEP, GateKind, SurrogateModel, default_kinds
from .params import (
    DEFAULT_NOMINALS,
    DEFAULT_RATIOS,
    PARAM_NAMES,
    RandomSource,
    canonical_tag,
    draw_samples,
    make_parameter_set,
)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

SEED_ENV = "ISLE_SEED"
ALL_MODES = ("d1", "d2")

CALIBRATION, STD_STREAM, ISLE_STREAM, POOL_STREAM, SCATTER_STREAM, CURVE_MC, CURVE_ISLE = range(7)


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class ExplorerSettings:
    mc_sim_capacity: int = 200
    expected_max_loss: float = 0.2
    safety_limit: int = 40
    eps_step: float = 0.02e-12
    eps_init: float | None = None
    eps_ceiling: float | None = None
    eps_min_rule: str = "last_loss"

    def build(self, t_c: float, mode: str, sle_mc_samples: int) -> ExplorerConfig:
        return ExplorerConfig(t_c=t_c, mode=mode, sle_mc_samples=sle_mc_samples, **dataclasses.asdict(self))


def _default_gates():
    return {k: (g.complexity, g.parasitic, g.coupling) for k, g in default_kinds().items()}


@dataclass(frozen=True)
class SurrogateSettings:
    alpha: float = 1.3
    k_time: float = 5.6e-5
    table_step: float | None = DEFAULT_TABLE_STEP
    stage_effort: float = 3.0
    gates: Mapping[str, tuple] = field(default_factory=_default_gates)  # name -> (c_g, c_p, c_x)

    def model(self, nominals: Mapping[str, float]) -> SurrogateModel:
        kinds = {k: GateKind(k, *map(float, v)) for k, v in self.gates.items()}
        return SurrogateModel(
            self.alpha, self.k_time, nominals["L_eff"], nominals["V_dd"], nominals["V_th"], kinds
        )


@dataclass(frozen=True)
class ExperimentConfig:
    circuit: str = "GateChain"
    params: str = "ThrPar"
    mode: str = "both"
    repetitions: int = 50
    samples_per_run: int = 1000
    sle_mc_samples: int = 50_000
    seed: int = 2007
    t_c: float | None = None
    target_loss: float = 0.15
    calibration_samples: int = 100_000
    scatter_samples: int = 1000
    curve_max_n: int = 500
    out: str = "results"
    nominals: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_NOMINALS))
    ratios: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_RATIOS))
    explorer: ExplorerSettings = field(default_factory=ExplorerSettings)
    surrogate: SurrogateSettings = field(default_factory=SurrogateSettings)
    circuits: Mapping[str, tuple] = field(default_factory=dict)  # extra circuits: name -> paths

    def __post_init__(self):
        if self.repetitions < 2:
            raise ConfigError("repetitions must be >= 2")
        if self.samples_per_run < 1:
            raise ConfigError("samples_per_run must be >= 1")
        if self.mode not in ("d1", "d2", "both"):
            raise ConfigError(f"mode must be d1, d2 or both, got {self.mode!r}")
        if self.sle_mc_samples < 1:
            raise ConfigError("sle_mc_samples must be >= 1")
        if self.t_c is None and not 0 < self.target_loss < 1:
            raise ConfigError("target_loss must lie in (0, 1)")
        if self.curve_max_n < 1 or self.scatter_samples < 1:
            raise ConfigError("curve_max_n and scatter_samples must be >= 1")
        canonical_tag(self.params)

    @property
    def modes(self) -> tuple[str, ...]:
        return ALL_MODES if self.mode == "both" else (self.mode,)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        """Nested plain-data form; ``None`` fields are dropped so it round-trips through TOML."""
        exp = {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.name not in ("nominals", "ratios", "explorer", "surrogate", "circuits")
        }
        sur = dataclasses.asdict(self.surrogate)
        gates = sur.pop("gates")
        if sur["table_step"] is None:
            sur["table_step"] = 0.0  # TOML has no null; 0 selects the exact per-sample fit
        out = {
            "experiment": exp,
            "explorer": dataclasses.asdict(self.explorer),
            "surrogate": sur,
            "gates": {k: {"complexity": v[0], "parasitic": v[1], "coupling": v[2]} for k, v in gates.items()},
            "parameters": {n: {"nominal": self.nominals[n], "ratio": self.ratios[n]} for n in PARAM_NAMES},
        }
        if self.circuits:
            out["circuits"] = {
                k: {"paths": [[g if h is None else [g, h] for g, h in p] for p in paths]} for k, paths in self.circuits.items()
            }
        return _drop_none(out)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - {"experiment", "explorer", "surrogate", "gates", "parameters", "circuits"}
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        exp = dict(d.get("experiment", {}))
        _check_keys("experiment", exp, {f.name for f in dataclasses.fields(cls)} - {
            "nominals", "ratios", "explorer", "surrogate", "circuits"})
        ex = dict(d.get("explorer", {}))
        _check_keys("explorer", ex, {f.name for f in dataclasses.fields(ExplorerSettings)})
        sur = dict(d.get("surrogate", {}))
        _check_keys("surrogate", sur, {f.name for f in dataclasses.fields(SurrogateSettings)} - {"gates"})
        if sur.get("table_step") == 0:
            sur["table_step"] = None
        gates = _default_gates()
        for name, g in d.get("gates", {}).items():
            _check_keys(f"gates.{name}", g, {"complexity", "parasitic", "coupling"})
            base = gates.get(name)
            if base is None and not {"complexity", "parasitic"} <= set(g):
                raise ConfigError(f"new gate kind {name} needs complexity and parasitic")
            base = base or (None, None, 0.0)
            gates[name] = (g.get("complexity", base[0]), g.get("parasitic", base[1]), g.get("coupling", base[2]))
        nominals, ratios = dict(DEFAULT_NOMINALS), dict(DEFAULT_RATIOS)
        for name, p in d.get("parameters", {}).items():
            if name not in PARAM_NAMES:
                raise ConfigError(f"unknown parameter {name}; expected one of {PARAM_NAMES}")
            _check_keys(f"parameters.{name}", p, {"nominal", "ratio"})
            nominals[name] = p.get("nominal", nominals[name])
            ratios[name] = p.get("ratio", ratios[name])
        circuits = {}
        for name, c in d.get("circuits", {}).items():
            _check_keys(f"circuits.{name}", c, {"paths"})
            circuits[name] = tuple(tuple(_gate_spec(g) for g in p) for p in c["paths"])
        if "t_c" in exp and exp["t_c"] is not None:
            exp["t_c"] = float(exp["t_c"])
        try:
            return cls(
                **exp,
                nominals=nominals,
                ratios=ratios,
                explorer=ExplorerSettings(**ex),
                surrogate=SurrogateSettings(**sur, gates=gates),
                circuits=circuits,
            )
        except TypeError as e:
            raise ConfigError(str(e)) from None


def _gate_spec(g):
    if isinstance(g, str):
        return (g, None)
    if isinstance(g, (list, tuple)) and len(g) == 2:
        return (str(g[0]), None if g[1] is None else float(g[1]))
    raise ConfigError(f"gate entry must be a kind name or [kind, h], got {g!r}")


def _check_keys(section, d, allowed):
    bad = set(d) - set(allowed)
    if bad:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(bad)}")


def _drop_none(x):
    if isinstance(x, dict):
        return {k: _drop_none(v) for k, v in x.items() if v is not None}
    if isinstance(x, (list, tuple)):
        return [_drop_none(v) for v in x]
    return x


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return ExperimentConfig.from_dict(tomllib.load(fh))


def resolve_seed(config: ExperimentConfig, cli_seed: int | None = None, env=None) -> tuple[ExperimentConfig, str]:
    """Apply seed overrides; precedence is CLI flag, then environment, then config."""
    env = os.environ if env is None else env
    if cli_seed is not None:
        return config.replace(seed=int(cli_seed)), "cli"
    if env.get(SEED_ENV):
        try:
            return config.replace(seed=int(env[SEED_ENV])), f"env:{SEED_ENV}"
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
    return config, "config"


# -- building blocks ----------------------------------------------------------


def resolve_circuit(config: ExperimentConfig) -> CircuitModel:
    h = config.surrogate.stage_effort
    if config.circuit in config.circuits:
        paths = tuple(
            Path(tuple(GateInstance(k, h if hh is None else hh) for k, hh in p), label=f"{config.circuit}/{i}")
            for i, p in enumerate(config.circuits[config.circuit])
        )
        return CircuitModel(config.circuit, paths)
    for c in builtin_circuits(h):
        if c.name.lower() == config.circuit.lower():
            return c
    known = [c.name for c in builtin_circuits(h)] + list(config.circuits)
    raise ConfigError(f"unknown circuit {config.circuit!r}; known: {known}")


def build_timing(config: ExperimentConfig) -> CircuitTiming:
    pset = make_parameter_set(config.params, config.nominals, config.ratios)
    model = config.surrogate.model(config.nominals)
    return CircuitTiming(resolve_circuit(config), model, pset, config.surrogate.table_step)


def calibrate_tc(timing: CircuitTiming, target_loss: float, n_cal: int, src: RandomSource) -> float:
    """Empirical ``1 - target_loss`` quantile of the full-oracle circuit delay."""
    if not 0 < target_loss < 1:
        raise ValueError("target_loss must lie in (0, 1)")
    if n_cal < 10_000:
        raise ValueError("n_cal must be >= 10^4")
    d = np.asarray(timing.circuit_delay(draw_samples(timing.pset, n_cal, src), "full"))
    if not np.all(np.isfinite(d)):
        raise ValueError("non-finite circuit delays during calibration")
    return float(np.quantile(d, 1.0 - target_loss))


def resolve_tc(config: ExperimentConfig, timing: CircuitTiming) -> tuple[float, str]:
    if config.t_c is not None:
        return float(config.t_c), "config"
    src = RandomSource(config.seed, (CALIBRATION,))
    return calibrate_tc(timing, config.target_loss, config.calibration_samples, src), "calibrated"


# -- the experiment -----------------------------------------------------------


@dataclass
class RunManifest:
    config: dict
    seed: int
    seed_source: str
    t_c: float
    t_c_source: str
    le_pool: dict
    runs: list
    table: dict
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def write(self, path) -> FsPath:
        path = FsPath(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig.from_dict(self.config)


def _finite_or_none(v):
    return None if v is None or not math.isfinite(v) else float(v)


def summarize(runs: list, modes, samples_per_run: int) -> dict:
    """Table-1 shaped aggregates, recomputable from the per-run records alone."""
    mc = [r["std_mc"]["loss"] for r in runs]
    mc_mean = float(np.mean(mc))
    mc_err = empirical_error(mc)
    mc_sims = float(np.mean([r["std_mc"]["n_full_sims"] for r in runs]))
    table = {
        "STD-MC": {
            "mean_loss": mc_mean,
            "loss_error": mc_err,
            "mean_full_sims": mc_sims,
            "theoretical_error": error_mc(mc_mean, samples_per_run),
        }
    }
    for m in modes:
        est = [r[m]["loss"] for r in runs]
        mean = float(np.mean(est))
        err = empirical_error(est)
        sims = float(np.mean([r[m]["n_full_sims"] for r in runs]))
        kept = float(np.mean([r[m]["white_points_at_eps_min"] for r in runs]))
        lle = float(np.mean([r[m]["loss_le_eps_min"] for r in runs]))
        try:
            th_err = error_isle(mean, lle, max(kept, 1.0))
        except InconsistentLoss:
            th_err = None
        try:
            tg = theoretical_gain(1.0 - mean, mean, lle)
        except InconsistentLoss:
            tg = None
        eg = empirical_gain(mc_sims, sims, mc_err, err) if err > 0 and mc_err > 0 else None
        table[f"ISLE-{m}"] = {
            "mean_loss": mean,
            "loss_error": err,
            "mean_full_sims": sims,
            "mean_kept": kept,
            "mean_loss_le_eps_min": lle,
            "theoretical_error": th_err,
            "theoretical_gain": _finite_or_none(tg),
            "error_ratio": None if tg is None else math.sqrt(tg),
            "empirical_gain": _finite_or_none(eg),
            "safety_violations": int(sum(r[m]["safety_violations"] for r in runs)),
        }
    return table


def run_experiment(config: ExperimentConfig, seed_source: str = "config") -> RunManifest:
    """Repeat STD-MC and ISLE ``config.repetitions`` times on disjoint streams."""
    timing = build_timing(config)
    t_c, t_c_source = resolve_tc(config, timing)
    seed, reps, n = config.seed, config.repetitions, config.samples_per_run

    mc_samples = [draw_samples(timing.pset, n, RandomSource(seed, (STD_STREAM, r))) for r in range(reps)]
    pool = np.concatenate(mc_samples)
    reused = min(len(pool), config.sle_mc_samples)
    fresh = config.sle_mc_samples - reused
    pool = pool[:reused]
    if fresh > 0:
        pool = np.concatenate([pool, draw_samples(timing.pset, fresh, RandomSource(seed, (POOL_STREAM,)))])
    tables = {m: SleLossTable(timing, pool, m) for m in config.modes}

    runs = []
    for r in range(reps):
        est = std_mc_loss(timing, t_c, mc_samples[r])
        rec = {"rep": r, "std_mc": {"loss": est.value, "n_full_sims": est.n_full_sims}}
        src = RandomSource(seed, (ISLE_STREAM, r))
        f_samples = None
        for m in config.modes:
            ecfg = config.explorer.build(t_c, m, config.sle_mc_samples)
            if f_samples is None:
                f_samples = draw_samples(timing.pset, ecfg.num_f_samples, src)
            res = isle_explorer(timing, ecfg, src, le_table=tables[m], samples=f_samples)
            if res.safety_violations:
                raise SafetyViolation(
                    f"repetition {r}, mode {m}: {res.safety_violations} simulated failure(s) lie outside "
                    f"the margin eps_min={res.eps_min:.6g} s; increase safety_limit or eps_step resolution"
                )
            rec[m] = {
                "loss": res.loss,
                "n_full_sims": res.n_full_sims,
                "eps_min": res.eps_min,
                "eps_end": res.eps_end,
                "loss_le_eps_min": res.loss_le_eps_min,
                "loss_points_at_eps_min": res.loss_points_at_eps_min,
                "white_points_at_eps_min": res.white_points_at_eps_min,
                "safety_violations": res.safety_violations,
            }
        runs.append(rec)

    snapshot = config.to_dict()
    # the output location is not an experiment input; keeps manifests relocatable
    snapshot["experiment"].pop("out", None)
    return RunManifest(
        config=snapshot,
        seed=seed,
        seed_source=seed_source,
        t_c=t_c,
        t_c_source=t_c_source,
        le_pool={"size": int(len(pool)), "reused_std_mc_samples": int(reused), "fresh_samples": int(max(fresh, 0))},
        runs=runs,
        table=summarize(runs, config.modes, n),
    )


# -- reports ------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_tsv(path, header, rows) -> FsPath:
    path = FsPath(path)
    lines = ["\t".join(header)] + ["\t".join(_fmt(v) if not isinstance(v, str) else v for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def delay_scatter(timing: CircuitTiming, n: int, src: RandomSource, mode: str):
    x = draw_samples(timing.pset, n, src)
    return np.asarray(timing.circuit_delay(x, "full")), np.asarray(timing.circuit_delay(x, mode))


def curve_margin(manifest: RunManifest, mode: str) -> tuple[float, float]:
    """Widest eps_min over the runs with its Loss^LE; one fixed margin for every curve repetition."""
    best = max(manifest.runs, key=lambda r: (r[mode]["eps_min"], -r["rep"]))
    return best[mode]["eps_min"], best[mode]["loss_le_eps_min"]


def error_curves(manifest: RunManifest, n_max: int | None = None, timing: CircuitTiming | None = None) -> dict:
    """Prefix estimates for N = 1..n_max per repetition, and their errors.

    Returns ``{"n": ..., "STD-MC": (empirical, theory), "ISLE-d1": ...}``.
    """
    config = manifest.experiment_config()
    n_max = config.curve_max_n if n_max is None else n_max
    timing = build_timing(config) if timing is None else timing
    seed, t_c, reps = manifest.seed, manifest.t_c, len(manifest.runs)
    ns = np.arange(1, n_max + 1)
    out = {"n": ns}

    est = np.empty((reps, n_max))
    for r in range(reps):
        x = draw_samples(timing.pset, n_max, RandomSource(seed, (CURVE_MC, r)))
        est[r] = np.cumsum(timing.indicator_full(t_c, x)) / ns
    mean = manifest.table["STD-MC"]["mean_loss"]
    out["STD-MC"] = (2.0 * est.std(axis=0, ddof=1), np.array([error_mc(mean, k) for k in ns]))

    for mi, m in enumerate(ALL_MODES):
        if f"ISLE-{m}" not in manifest.table:
            continue
        eps, lle = curve_margin(manifest, m)
        for r in range(reps):
            b = draw_biased(timing, t_c - eps, m, RandomSource(seed, (CURVE_ISLE, r, mi)), n_kept=n_max,
                            loss_le_eps=lle)
            fails = timing.indicator_full(t_c, b.kept)
            k = len(fails)
            est[r, :k] = lle * np.cumsum(fails) / ns[:k]
            est[r, k:] = np.nan
        row = manifest.table[f"ISLE-{m}"]
        try:
            theory = np.array([error_isle(row["mean_loss"], lle, k) for k in ns])
        except InconsistentLoss:
            theory = np.full(n_max, np.nan)
        out[f"ISLE-{m}"] = (2.0 * est.std(axis=0, ddof=1), theory)
    return out


def emit_reports(manifest: RunManifest, out_dir) -> list[FsPath]:
    """Write loss series, delay scatters, error-vs-N curves and the summary table."""
    out_dir = FsPath(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out_dir}: {e}") from None
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory {out_dir} is not writable")
    config = manifest.experiment_config()
    timing = build_timing(config)
    modes = [m for m in ALL_MODES if f"ISLE-{m}" in manifest.table]
    written = []

    header = ["rep", "std_mc"] + [f"isle_{m}" for m in modes]
    rows = [[r["rep"], r["std_mc"]["loss"]] + [r[m]["loss"] for m in modes] for r in manifest.runs]
    written.append(write_tsv(out_dir / "loss_series.tsv", header, rows))

    for m in modes:
        full, sle = delay_scatter(timing, config.scatter_samples, RandomSource(manifest.seed, (SCATTER_STREAM,)), m)
        written.append(write_tsv(out_dir / f"scatter_{m}.tsv", ["full_delay_s", f"sle_{m}_delay_s"], zip(full, sle)))

    curves = error_curves(manifest, timing=timing)
    keys = ["STD-MC"] + [f"ISLE-{m}" for m in modes]
    header = ["n"]
    for k in keys:
        tag = k.lower().replace("-", "_")
        header += [f"{tag}_empirical", f"{tag}_theory"]
    rows = []
    for i, n in enumerate(curves["n"]):
        row = [int(n)]
        for k in keys:
            emp, th = curves[k]
            row += [None if not np.isfinite(emp[i]) else emp[i], None if not np.isfinite(th[i]) else th[i]]
        rows.append(row)
    written.append(write_tsv(out_dir / "error_vs_n.tsv", header, rows))

    cols = ["mean_loss", "loss_error", "mean_full_sims", "theoretical_gain", "empirical_gain", "error_ratio"]
    rows = [[k] + [manifest.table[k].get(c) for c in cols] for k in keys]
    written.append(write_tsv(out_dir / "summary.tsv", ["estimator"] + cols, rows))
    return written
