"""Command-line entry point: characterize, calibrate, run, explore, report."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path as FsPath

import numpy as np

from .estimators import SafetyViolation
from .explorer import ExplorationError, isle_explorer
from .harness import (
    ISLE_STREAM,
    ConfigError,
    ExperimentConfig,
    RunManifest,
    build_timing,
    emit_reports,
    load_config,
    resolve_seed,
    resolve_tc,
    run_experiment,
    write_tsv,
)
from .params import RandomSource, canonical_tag, draw_samples

log = logging.getLogger("isle")


def _config(args) -> tuple[ExperimentConfig, str]:
    config = load_config(args.config) if args.config else ExperimentConfig()
    kw = {}
    if args.mode:
        kw["mode"] = args.mode
    if args.circuit:
        kw["circuit"] = args.circuit
    if args.params:
        kw["params"] = canonical_tag(args.params)
    if args.out:
        kw["out"] = args.out
    if kw:
        config = config.replace(**kw)
    return resolve_seed(config, args.seed)


def _out_dir(config) -> FsPath:
    d = FsPath(config.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_characterize(args) -> int:
    config, _ = _config(args)
    timing = build_timing(config)
    pset = timing.pset
    points = [pset.means]
    for j in range(pset.dim):
        for k in (-3, -2, -1, 1, 2, 3):
            x = pset.means.copy()
            x[j] += k * pset.sigmas[j]
            points.append(x)
    points = np.array(points)
    header = ["kind", "mode", "point"] + list(pset.names) + ["tau_s", "p", "g"]
    rows = []
    for kind in sorted(timing.model.kinds):
        for mode in config.modes:
            ch = timing.characterization(kind, mode)
            tau = ch.tau_fn(points)
            p, g = ch.pg(points)
            for i, x in enumerate(points):
                rows.append([kind, mode, i, *x, tau[i], p[i], g[i]])
    path = write_tsv(_out_dir(config) / "characterize.tsv", header, rows)
    print(path)
    return 0


def cmd_calibrate(args) -> int:
    config, source = _config(args)
    timing = build_timing(config)
    t_c, how = resolve_tc(config, timing)
    rec = {"circuit": timing.circuit.name, "params": timing.pset.tag, "seed": config.seed,
           "seed_source": source, "target_loss": config.target_loss, "t_c": t_c, "t_c_source": how}
    (_out_dir(config) / "calibrate.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    print(repr(t_c))
    return 0


def cmd_run(args) -> int:
    config, source = _config(args)
    out = _out_dir(config)
    started = datetime.now(timezone.utc).isoformat()
    manifest = run_experiment(config, seed_source=source)
    manifest.write(out / "manifest.json")
    files = emit_reports(manifest, out)
    # wall-clock times stay out of manifest.json so reruns are byte-identical
    info = {"started": started, "finished": datetime.now(timezone.utc).isoformat()}
    (out / "run_info.json").write_text(json.dumps(info, indent=2) + "\n")
    _print_table(manifest)
    for f in [out / "manifest.json", *files]:
        log.info("wrote %s", f)
    return 0


def cmd_explore(args) -> int:
    config, _ = _config(args)
    timing = build_timing(config)
    t_c, _how = resolve_tc(config, timing)
    mode = config.modes[-1]
    ecfg = config.explorer.build(t_c, mode, config.sle_mc_samples)
    src = RandomSource(config.seed, (ISLE_STREAM, 0))
    samples = draw_samples(timing.pset, ecfg.num_f_samples, src)
    res = isle_explorer(timing, ecfg, src, samples=samples)
    header = ["eps_s", "new_whites", "new_loss_points", "points_in_margin", "white_points", "mc_loss_count"]
    rows = [[r.eps, r.new_whites, r.new_loss_points, r.points_in_margin, r.white_points, r.mc_loss_count]
            for r in res.trace]
    path = write_tsv(_out_dir(config) / f"trace_{mode}.tsv", header, rows)
    print(f"t_c={t_c!r} mode={mode} loss={res.loss:.6g} eps_min={res.eps_min:.6g} "
          f"sims={res.n_full_sims} violations={res.safety_violations}")
    print(path)
    return 0 if res.safety_violations == 0 else 3


def cmd_report(args) -> int:
    out = FsPath(args.out or ".")
    src = FsPath(args.manifest) if args.manifest else out / "manifest.json"
    manifest = RunManifest.from_json(src.read_text())
    for f in emit_reports(manifest, out):
        print(f)
    return 0


def _print_table(manifest: RunManifest) -> None:
    cols = ("mean_loss", "loss_error", "mean_full_sims", "theoretical_gain", "empirical_gain")
    print("estimator\t" + "\t".join(cols))
    for k, row in manifest.table.items():
        vals = ["-" if row.get(c) is None else f"{row[c]:.4g}" for c in cols]
        print(k + "\t" + "\t".join(vals))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides config and ISLE_SEED)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--mode", choices=("d1", "d2", "both"))
    common.add_argument("--circuit", metavar="NAME")
    common.add_argument("--params", choices=("one", "two", "three", "OnePar", "TwoPar", "ThrPar"))
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="isle", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("characterize", parents=[common], help="dump tau/p/g tables").set_defaults(fn=cmd_characterize)
    sub.add_parser("calibrate", parents=[common], help="emit the calibrated T_c").set_defaults(fn=cmd_calibrate)
    sub.add_parser("run", parents=[common], help="full repeated experiment").set_defaults(fn=cmd_run)
    sub.add_parser("explore", parents=[common], help="single explorer trace").set_defaults(fn=cmd_explore)
    rp = sub.add_parser("report", parents=[common], help="rebuild reports from a manifest")
    rp.add_argument("--manifest", metavar="PATH", help="defaults to DIR/manifest.json")
    rp.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except (ConfigError, ExplorationError, SafetyViolation, OSError, KeyError, ValueError) as e:
        print(f"isle {args.command}: {e}", file=sys.stderr)
        return 2
