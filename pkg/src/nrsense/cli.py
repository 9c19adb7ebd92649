"""Command-line front end: ``nrsense run | sweep | selftest``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure, 3 failed self-test.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from nrsense import __version__
from nrsense.config import ConfigError, ScenarioConfig, from_flat, json_safe, load_config, parse_overrides, to_flat
from nrsense.evaluation import SWEEP_AXES, aggregate, default_workers, run_monte_carlo, sweep
from nrsense import results

log = logging.getLogger("nrsense")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_SELFTEST = 0, 1, 2, 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file, or a manifest.json from an earlier run")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--drops", type=int, help="number of Monte Carlo drops")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel worker processes (default: $NR_SENSE_WORKERS or 1)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key, e.g. prs.n_cpi=64 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nrsense", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run Monte Carlo drops at the configured CFAR threshold")
    _add_common(run)
    run.add_argument("--dump-rd", action="store_true", help="write per-drop range-Doppler power rasters")

    sw = sub.add_parser("sweep", help="paired-seed sweep over one axis")
    _add_common(sw)
    sw.add_argument("--axis", required=True, help=f"one of {', '.join(SWEEP_AXES)}")
    sw.add_argument("--values", required=True,
                    help="comma-separated values, or start:stop:step (inclusive) for numeric axes")

    sub.add_parser("selftest", help="run the built-in oracle scenarios")
    return parser


def resolve_config(args) -> ScenarioConfig:
    overrides = parse_overrides(args.override)
    if args.drops is not None:
        overrides["scenario.n_drops"] = args.drops
    if args.seed is not None:
        overrides["scenario.master_seed"] = args.seed
    if args.config:
        return load_config(args.config, overrides)
    return from_flat(overrides)


def parse_values(axis: str, text: str) -> list:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")
    text = text.strip()
    if not text:
        raise ConfigError("--values is empty")
    if axis == "architecture":
        vals = [v.strip() for v in text.split(",") if v.strip()]
    elif ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError(f"--values range {text!r} must be start:stop:step") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"--values range {text!r} must be ascending with a positive step")
        vals = list(np.round(np.arange(start, stop + step / 2, step), 9))
    else:
        try:
            vals = [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"--values {text!r}: not a number list") from None
    if axis == "cpi_length":
        if any(v != int(v) for v in vals):
            raise ConfigError("cpi_length values must be integers")
        vals = [int(v) for v in vals]
    else:
        vals = [v if isinstance(v, str) else float(v) for v in vals]
    if not vals:
        raise ConfigError("--values is empty")
    return vals


def _manifest(args, scn: ScenarioConfig, out: Path, timing: dict, **extra) -> dict:
    return {
        "tool": "nrsense",
        "version": __version__,
        "command": args.command,
        "config_path": str(args.config) if args.config else None,
        "overrides": list(args.override),
        "master_seed": scn.master_seed,
        "n_drops": scn.n_drops,
        "out_dir": str(out),
        "timing_s": timing,
        "config": json_safe(to_flat(scn)),
        **extra,
    }


def cmd_run(args) -> int:
    scn = resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = args.workers if args.workers is not None else default_workers()
    timing = {}
    t0 = time.perf_counter()
    runs = run_monte_carlo(scn, workers=workers, keep_power=args.dump_rd)
    timing["drops"] = time.perf_counter() - t0
    outcomes = [r[0] for r in runs]
    t0 = time.perf_counter()
    agg = aggregate([o.metrics for o in outcomes])
    results.write_metrics(out / "metrics.json", agg, gamma_db=scn.cfar.threshold_db)
    results.write_drops(out / "drops.csv", outcomes)
    results.write_errors(out / "errors.csv", outcomes)
    results.write_cdf(out / "cdf.csv", outcomes)
    results.write_detections(out / "detections.csv", outcomes)
    results.write_targets(out / "targets.csv", outcomes)
    if args.dump_rd:
        for o in outcomes:
            results.dump_rd(out / "rd", o)
    timing["write"] = time.perf_counter() - t0
    results.write_json(out / "manifest.json", _manifest(args, scn, out, timing, workers=workers))
    pfa = "n/a" if agg.pfa is None else f"{agg.pfa:.3f}"
    print(f"{scn.n_drops} drops: Pd={agg.pd:.3f} PFA={pfa} F1={agg.f1:.3f} -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scn = resolve_config(args)
    values = parse_values(args.axis, args.values)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = args.workers if args.workers is not None else default_workers()
    t0 = time.perf_counter()
    table = sweep(scn, args.axis, values, workers=workers)
    timing = {"sweep": time.perf_counter() - t0}
    if args.axis == "cfar_gamma":
        results.write_roc(out / "roc.csv", table)
    else:
        results.write_sweep(out / "sweep.csv", table)
    results.write_json(out / "metrics.json", {
        "axis": args.axis,
        "values": values,
        "metrics": [m.to_dict() for m in table.metrics],
    })
    results.write_json(out / "manifest.json",
                       _manifest(args, scn, out, timing, workers=workers, axis=args.axis, values=values))
    for v, m in zip(values, table.metrics):
        pfa = "n/a" if m.pfa is None else f"{m.pfa:.3f}"
        print(f"{args.axis}={v}: Pd={m.pd:.3f} PFA={pfa} F1={m.f1:.3f}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from nrsense.selftest import run_selftest

    checks = run_selftest()
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_SELFTEST


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "sweep": cmd_sweep, "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - any failure past config loading is a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
