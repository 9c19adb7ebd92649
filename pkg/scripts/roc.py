"""CFAR threshold sweep on shared drops: prints the ROC and the best point under a PFA cap.

    python3 scripts/roc.py --drops 100 --gammas 12:34:1 --pfa-max 0.05 --out results/roc
"""

import argparse
from pathlib import Path

from nrsense import results
from nrsense.cli import parse_values
from nrsense.config import ScenarioConfig, load_config
from nrsense.evaluation import sweep


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config")
    p.add_argument("--drops", type=int, default=100)
    p.add_argument("--gammas", default="12:34:1")
    p.add_argument("--pfa-max", type=float, default=0.05)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="results/roc")
    args = p.parse_args()

    scn = load_config(args.config) if args.config else ScenarioConfig()
    table = sweep(scn, "cfar_gamma", parse_values("cfar_gamma", args.gammas), n_drops=args.drops,
                  workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results.write_roc(out / "roc.csv", table)

    print(f"{'gamma_db':>8} {'pd':>6} {'pfa':>6} {'f1':>6} {'h_p90':>6} {'v_p90':>6}")
    best = None
    for g, m in zip(table.values, table.metrics):
        pc = m.percentiles
        h, v = pc["horizontal"]["p90"], pc["vertical"]["p90"]
        pfa = float("nan") if m.pfa is None else m.pfa
        print(f"{g:8.1f} {m.pd:6.3f} {pfa:6.3f} {m.f1:6.3f} {h or float('nan'):6.2f} {v or float('nan'):6.2f}")
        if m.pfa is not None and m.pfa <= args.pfa_max and (best is None or m.pd > best[1].pd):
            best = (g, m)
    if best:
        results.write_cdf(out / "cdf_best.csv", table.outcomes[table.values.index(best[0])])
        print(f"best Pd with PFA <= {args.pfa_max}: gamma={best[0]:g} dB, Pd={best[1].pd:.3f}, "
              f"PFA={best[1].pfa:.3f}")


if __name__ == "__main__":
    main()
