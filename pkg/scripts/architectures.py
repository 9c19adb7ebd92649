"""Receiver architecture comparison at fixed threshold and paired drops.

Runs full-digital with beamspace FFT, full-digital and hybrid with the
Bartlett scanner, and optionally full-digital at 0.8 wavelength vertical
spacing (Bartlett only).

    python3 scripts/architectures.py --drops 50 --out results/architectures
"""

import argparse
from pathlib import Path

from nrsense import results
from nrsense.config import ScenarioConfig, load_config
from nrsense.evaluation import aggregate, run_monte_carlo
from nrsense.results import SWEEP_COLUMNS

CASES = (
    ("full_digital_fft", {}),
    ("full_digital_bartlett", {"rx.aoa_method": "bartlett"}),
    ("hybrid_bartlett", {"rx.architecture": "hybrid", "rx.aoa_method": "bartlett"}),
    ("full_digital_dv08_bartlett", {"rx.aoa_method": "bartlett", "array.dv": 0.8}),
)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config")
    p.add_argument("--drops", type=int, default=50)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="results/architectures")
    args = p.parse_args()

    base = load_config(args.config) if args.config else ScenarioConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, overrides in CASES:
        scn = base.replace(**overrides)
        runs = run_monte_carlo(scn, n_drops=args.drops, workers=args.workers)
        m = aggregate([r[0].metrics for r in runs])
        pc = m.percentiles
        rows.append((name, m.pd, m.pfa, m.ptp, m.f1, m.tp, m.fa, m.fn,
                     pc["range"]["p50"], pc["range"]["p90"], pc["velocity"]["p50"], pc["velocity"]["p90"],
                     pc["horizontal"]["p50"], pc["horizontal"]["p90"], pc["vertical"]["p50"], pc["vertical"]["p90"]))
        pfa = float("nan") if m.pfa is None else m.pfa
        print(f"{name:28s} Pd={m.pd:.3f} PFA={pfa:.3f} F1={m.f1:.3f} "
              f"h_p90={pc['horizontal']['p90']} v_p90={pc['vertical']['p90']}")
    results.write_csv(out / "architectures.csv", ("case",) + SWEEP_COLUMNS[1:], rows)


if __name__ == "__main__":
    main()
