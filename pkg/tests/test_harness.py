import dataclasses
import json
import math

import numpy as np
import pytest

from isle import harness
from isle.analysis import error_isle, error_mc
from isle.estimators import SafetyViolation, std_mc_loss
from isle.harness import (
    ConfigError,
    ExperimentConfig,
    RunManifest,
    build_timing,
    calibrate_tc,
    emit_reports,
    load_config,
    resolve_seed,
    run_experiment,
    summarize,
)
from isle.params import RandomSource, draw_samples

SMALL = ExperimentConfig(repetitions=6, sle_mc_samples=20_000, calibration_samples=20_000, scatter_samples=300,
                         curve_max_n=500, seed=123)


@pytest.fixture(scope="module")
def manifest():
    return run_experiment(SMALL)


def read_tsv(path):
    lines = path.read_text().splitlines()
    return lines[0].split("\t"), [list(map(float, ln.split("\t")[1:])) for ln in lines[1:]], lines


def test_calibration():
    t = build_timing(ExperimentConfig())
    src = RandomSource(1, (0,))
    d = t.circuit_delay(draw_samples(t.pset, 20_000, src), "full")
    assert calibrate_tc(t, 0.5, 20_000, src) == pytest.approx(float(np.median(d)), rel=1e-15)
    t_c = calibrate_tc(t, 0.15, 100_000, src)
    fresh = std_mc_loss(t, t_c, draw_samples(t.pset, 100_000, RandomSource(1, (5,)))).value
    assert abs(fresh - 0.15) <= 0.01
    t_hi = calibrate_tc(t, 1e-9, 20_000, src)
    assert std_mc_loss(t, t_hi, draw_samples(t.pset, 20_000, RandomSource(2))).value < 1e-3
    with pytest.raises(ValueError):
        calibrate_tc(t, 0.15, 5_000, src)
    with pytest.raises(ValueError):
        calibrate_tc(t, 1.0, 20_000, src)


def test_config_round_trip_and_toml(tmp_path):
    cfg = SMALL.replace(circuit="Mixed", circuits={"Mixed": ((("INV", None), ("NAND2", 2.0)), (("NOR2", 1.5),))})
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    exact = SMALL.replace(surrogate=harness.SurrogateSettings(table_step=None))
    assert ExperimentConfig.from_dict(exact.to_dict()) == exact
    (tmp_path / "c.toml").write_text(
        """
[experiment]
circuit = "InverterChain"
params = "TwoPar"
repetitions = 10
t_c = 2.2e-10

[explorer]
safety_limit = 30

[surrogate]
alpha = 1.4

[gates.INV]
coupling = 0.5

[gates.XOR2]
complexity = 4.0
parasitic = 4.0

[parameters.V_dd]
ratio = 0.05

[circuits.Tiny]
paths = [["INV", ["XOR2", 2.0]]]
"""
    )
    c = load_config(tmp_path / "c.toml")
    assert (c.circuit, c.params, c.repetitions, c.t_c) == ("InverterChain", "TwoPar", 10, 2.2e-10)
    assert c.explorer.safety_limit == 30 and c.surrogate.alpha == 1.4
    assert c.surrogate.gates["INV"] == (1.0, 1.0, 0.5) and c.surrogate.gates["XOR2"] == (4.0, 4.0, 0.0)
    assert c.ratios["V_dd"] == 0.05
    t = build_timing(c.replace(circuit="Tiny"))
    assert [g.h for g in t.circuit.paths[0].gates] == [3.0, 2.0]


@pytest.mark.parametrize("bad", [
    {"experiment": {"repetitions": 1}},
    {"experiment": {"samples_per_run": 0}},
    {"experiment": {"mode": "d3"}},
    {"experiment": {"bogus": 1}},
    {"explorer": {"bogus": 1}},
    {"parameters": {"T_ox": {"ratio": 0.1}}},
    {"gates": {"XOR2": {"coupling": 0.1}}},
    {"extra": {}},
])
def test_config_rejects(bad):
    with pytest.raises((ConfigError, ValueError)):
        ExperimentConfig.from_dict(bad)


def test_unknown_circuit():
    with pytest.raises(ConfigError):
        build_timing(ExperimentConfig(circuit="Ring"))


def test_seed_precedence():
    cfg = ExperimentConfig(seed=1)
    assert resolve_seed(cfg, None, {}) == (cfg, "config")
    c, src = resolve_seed(cfg, None, {"ISLE_SEED": "42"})
    assert c.seed == 42 and src == "env:ISLE_SEED"
    c, src = resolve_seed(cfg, 7, {"ISLE_SEED": "42"})
    assert c.seed == 7 and src == "cli"
    with pytest.raises(ConfigError):
        resolve_seed(cfg, None, {"ISLE_SEED": "x"})


def test_manifest_contents(manifest):
    assert len(manifest.runs) == 6 and manifest.t_c_source == "calibrated"
    assert all(r["std_mc"]["n_full_sims"] == SMALL.samples_per_run for r in manifest.runs)
    for m in ("d1", "d2"):
        row = manifest.table[f"ISLE-{m}"]
        assert row["mean_full_sims"] < SMALL.samples_per_run
        assert row["safety_violations"] == 0
    assert manifest.le_pool == {"size": 20_000, "reused_std_mc_samples": 6000, "fresh_samples": 14_000}
    assert set(manifest.table) == {"STD-MC", "ISLE-d1", "ISLE-d2"}


def test_table_recomputes_from_runs(manifest):
    again = RunManifest.from_json(manifest.to_json())
    assert summarize(again.runs, ("d1", "d2"), SMALL.samples_per_run) == manifest.table
    mc = [r["std_mc"]["loss"] for r in manifest.runs]
    assert manifest.table["STD-MC"]["mean_loss"] == pytest.approx(sum(mc) / len(mc), rel=1e-15)
    assert manifest.table["STD-MC"]["loss_error"] == pytest.approx(2 * np.std(mc, ddof=1), rel=1e-12)


def test_safety_violation_aborts(monkeypatch):
    real = harness.isle_explorer

    def planted(*a, **k):
        return dataclasses.replace(real(*a, **k), safety_violations=1)

    monkeypatch.setattr(harness, "isle_explorer", planted)
    with pytest.raises(SafetyViolation, match="repetition 0"):
        run_experiment(SMALL.replace(repetitions=2))


def test_reports(manifest, tmp_path):
    files = {p.name: p for p in emit_reports(manifest, tmp_path)}
    assert set(files) == {"loss_series.tsv", "scatter_d1.tsv", "scatter_d2.tsv", "error_vs_n.tsv", "summary.tsv"}
    header, rows, _ = read_tsv(files["scatter_d2.tsv"])
    assert header == ["full_delay_s", "sle_d2_delay_s"] and len(rows) == SMALL.scatter_samples
    header, rows, lines = read_tsv(files["error_vs_n.tsv"])
    ns = [int(ln.split("\t")[0]) for ln in lines[1:]]
    assert ns == list(range(1, 501))
    col = {h: i - 1 for i, h in enumerate(header)}
    mc_mean = manifest.table["STD-MC"]["mean_loss"]
    eps, lle = harness.curve_margin(manifest, "d2")
    d2_mean = manifest.table["ISLE-d2"]["mean_loss"]
    for n in (1, 37, 500):
        assert rows[n - 1][col["std_mc_theory"]] == pytest.approx(error_mc(mc_mean, n), rel=1e-15)
        assert rows[n - 1][col["isle_d2_theory"]] == pytest.approx(error_isle(d2_mean, lle, n), rel=1e-15)
    header, rows, lines = read_tsv(files["summary.tsv"])
    assert [ln.split("\t")[0] for ln in lines[1:]] == ["STD-MC", "ISLE-d1", "ISLE-d2"]
    assert rows[0][0] == manifest.table["STD-MC"]["mean_loss"]
    assert math.isnan(rows[0][3])
    _, rows, _ = read_tsv(files["loss_series.tsv"])
    assert len(rows) == 6


def test_determinism(manifest, tmp_path):
    again = run_experiment(SMALL)
    assert again.to_json() == manifest.to_json()
    a = emit_reports(manifest, tmp_path / "a")
    b = emit_reports(again, tmp_path / "b")
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()


def test_unwritable_output(manifest, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_reports(manifest, blocker / "sub")


def test_single_mode_and_fixed_tc():
    m = run_experiment(SMALL.replace(mode="d1", t_c=3.3e-10, repetitions=2, sle_mc_samples=2000))
    assert set(m.table) == {"STD-MC", "ISLE-d1"} and m.t_c == 3.3e-10 and m.t_c_source == "config"
    assert json.loads(m.to_json())["le_pool"]["fresh_samples"] == 0
