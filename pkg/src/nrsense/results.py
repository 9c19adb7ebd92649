"""Result files: metrics JSON, plot-ready CSV tables and range-Doppler rasters.

Column order of every CSV is fixed by the ``*_COLUMNS`` tuples below. Floats
are written with ``repr`` so reruns compare byte for byte; missing values are
empty fields.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from nrsense.evaluation import AggregateMetrics, DropOutcome, SweepTable

DROPS_COLUMNS = ("drop", "tp", "fa", "fn", "gated", "e_r_m", "e_v_mps", "e_h_m", "e_vert_m")
ERRORS_COLUMNS = ("drop", "truth", "e_r_m", "e_v_mps", "e_v_raw_mps", "e_h_m", "e_vert_m",
                  "truth_range_m", "truth_link_snr_db", "det_snr_proxy_db")
DETECTIONS_COLUMNS = ("drop", "det", "truth", "range_m", "radial_velocity_mps", "az_deg", "el_deg",
                      "x_m", "y_m", "z_m", "snr_proxy_db", "range_bin", "doppler_bin")
TARGETS_COLUMNS = ("drop", "truth", "detected", "x_m", "y_m", "z_m", "vx_mps", "vy_mps", "vz_mps",
                   "range_m", "radial_velocity_mps", "az_deg", "el_deg", "rcs_dbsm", "link_snr_db",
                   "rd_snr_proxy_db")
CDF_COLUMNS = ("metric", "value", "cdf")
CDF_METRICS = (("range", "e_r"), ("velocity", "e_v"), ("horizontal", "e_h"), ("vertical", "e_vert"))
ROC_COLUMNS = ("gamma_db", "pd", "pfa", "ptp", "f1", "tp", "fa", "fn")
SWEEP_COLUMNS = ("value", "pd", "pfa", "ptp", "f1", "tp", "fa", "fn",
                 "range_p50", "range_p90", "vel_p50", "vel_p90",
                 "horiz_p50", "horiz_p90", "vert_p50", "vert_p90")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ";".join(fmt(x) for x in v)
    return str(v)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(x) for x in r])
    return path


def _finite(obj):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else repr(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_finite(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_metrics(path, metrics: AggregateMetrics, **extra) -> Path:
    return write_json(path, {**metrics.to_dict(), **extra})


def write_drops(path, outcomes: list[DropOutcome]) -> Path:
    rows = [(o.drop, o.metrics.tp, o.metrics.fa, o.metrics.fn, o.metrics.gated,
             o.metrics.e_r, o.metrics.e_v, o.metrics.e_h, o.metrics.e_vert) for o in outcomes]
    return write_csv(path, DROPS_COLUMNS, rows)


def write_errors(path, outcomes: list[DropOutcome]) -> Path:
    rows = []
    for o in outcomes:
        m = o.metrics
        for k, (i, j) in enumerate(o.matches):
            t = o.truths[j]
            rows.append((o.drop, j, m.e_r[k], m.e_v[k], m.e_v_raw[k], m.e_h[k], m.e_vert[k],
                         t.range_m, t.link_snr_db, o.detections[i].snr_proxy_db))
    return write_csv(path, ERRORS_COLUMNS, rows)


def write_detections(path, outcomes: list[DropOutcome]) -> Path:
    rows = []
    for o in outcomes:
        owner = {i: j for i, j in o.matches}
        for i, d in enumerate(o.detections):
            rows.append((o.drop, i, owner.get(i, -1), d.range_m, d.radial_velocity_mps, d.az_deg, d.el_deg,
                         *d.position, d.snr_proxy_db, d.rd_bin[0], d.rd_bin[1]))
    return write_csv(path, DETECTIONS_COLUMNS, rows)


def write_targets(path, outcomes: list[DropOutcome]) -> Path:
    """Per-truth table for missed-detection analysis against SNR and geometry."""
    rows = []
    for o in outcomes:
        hit = {j for _, j in o.matches}
        for j, t in enumerate(o.truths):
            snr = o.truth_rd_snr_db[j] if j < len(o.truth_rd_snr_db) else None
            rows.append((o.drop, j, j in hit, *t.position, *t.velocity, t.range_m, t.radial_velocity_mps,
                         t.az_deg, t.el_deg, t.rcs_dbsm, t.link_snr_db, snr))
    return write_csv(path, TARGETS_COLUMNS, rows)


def write_cdf(path, outcomes: list[DropOutcome]) -> Path:
    """Empirical CDF points of the pooled true-positive errors, one block per metric."""
    rows = []
    for name, attr in CDF_METRICS:
        x = np.sort(np.concatenate([np.asarray(getattr(o.metrics, attr), float) for o in outcomes] or [[]]))
        rows.extend((name, v, (i + 1) / x.size) for i, v in enumerate(x))
    return write_csv(path, CDF_COLUMNS, rows)


def write_roc(path, table: SweepTable) -> Path:
    rows = [(float(v), m.pd, m.pfa, m.ptp, m.f1, m.tp, m.fa, m.fn) for v, m in zip(table.values, table.metrics)]
    return write_csv(path, ROC_COLUMNS, rows)


def write_sweep(path, table: SweepTable) -> Path:
    rows = []
    for v, m in zip(table.values, table.metrics):
        p = m.percentiles
        rows.append((v, m.pd, m.pfa, m.ptp, m.f1, m.tp, m.fa, m.fn,
                     p["range"]["p50"], p["range"]["p90"], p["velocity"]["p50"], p["velocity"]["p90"],
                     p["horizontal"]["p50"], p["horizontal"]["p90"], p["vertical"]["p50"], p["vertical"]["p90"]))
    return write_csv(path, SWEEP_COLUMNS, rows)


def dump_rd(directory, outcome: DropOutcome) -> Path:
    """Noncoherent range-Doppler power as a little-endian float32 raster plus JSON sidecar."""
    if outcome.rd_power is None:
        raise ValueError("outcome carries no range-Doppler power")
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    raster = d / f"rd_{outcome.drop:05d}.f32"
    outcome.rd_power.astype("<f4").tofile(raster)
    n_r, n_d = outcome.rd_power.shape
    write_json(raster.with_suffix(".json"), {
        "dtype": "float32",
        "byteorder": "little",
        "shape": [n_r, n_d],
        "index_order": ["range_bin", "doppler_bin"],
        "range_per_bin_m": outcome.rd_bin_size[0],
        "velocity_per_bin_mps": outcome.rd_bin_size[1],
        "doppler_bin_of_column0": -(n_d // 2),
    })
    return raster
