"""Paired-seed sensitivity sweeps over residual self-interference power and CPI length.

    python3 scripts/sensitivity.py --drops 50 --out results/sensitivity
"""

import argparse
from pathlib import Path

from nrsense import results
from nrsense.config import ScenarioConfig, load_config
from nrsense.evaluation import sweep

SI_DBM = [float("-inf"), -135.0, -125.0, -115.0, -105.0]
CPI = [16, 32, 64, 128]


def show(table) -> None:
    for v, m in zip(table.values, table.metrics):
        pfa = float("nan") if m.pfa is None else m.pfa
        vel = m.percentiles["velocity"]["p90"]
        print(f"  {table.axis}={v}: Pd={m.pd:.3f} PFA={pfa:.3f} F1={m.f1:.3f} "
              f"vel_p90={float('nan') if vel is None else vel:.3f} m/s")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config")
    p.add_argument("--drops", type=int, default=50)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="results/sensitivity")
    args = p.parse_args()

    scn = load_config(args.config) if args.config else ScenarioConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for axis, values in (("si_power", SI_DBM), ("cpi_length", CPI)):
        table = sweep(scn, axis, values, n_drops=args.drops, workers=args.workers)
        results.write_sweep(out / f"{axis}.csv", table)
        print(axis)
        show(table)


if __name__ == "__main__":
    main()
