"""Built-in oracle scenarios: bin-level single target, CFAR false-alarm rate, clutter null."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from nrsense.array import direction, to_global
from nrsense.channel import NoiseModel, PathSet, background_channel, monostatic_gain2
from nrsense.config import ScenarioConfig
from nrsense.evaluation import drop_rng, make_renderer, render_cube, rx_architecture
from nrsense.prs import build_prs_grid
from nrsense.receiver import (
    CfarConfig,
    cfar_mask,
    cfar_noise,
    destagger,
    doppler_map,
    extract_detections,
    ls_estimate,
    range_profile,
    suppress_static,
)
from nrsense.units import SPEED_OF_LIGHT, lin2db


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f} s)"


def single_path(scn: ScenarioConfig, range_m: float, radial_velocity_mps: float, az_local: float,
                el_local: float, rcs_m2: float = 1.0) -> PathSet:
    """One specular echo at local angles (az_local, el_local) relative to the array."""
    az, el = (float(a) for a in to_global(az_local, el_local, scn.array))
    lam = scn.prs.wavelength
    one = np.ones(1)
    return PathSet(
        delay=one * 2 * range_m / SPEED_OF_LIGHT,
        aoa_az=one * az, aoa_el=one * el, aod_az=one * az, aod_el=one * el,
        gain=one * np.sqrt(monostatic_gain2(rcs_m2, range_m, lam)) + 0j,
        doppler=one * 2 * radial_velocity_mps / lam,
        target=np.zeros(1, dtype=int),
    )


def oracle_scenario(**overrides) -> ScenarioConfig:
    """Noise-free, clutter-free scenario used by the bin-level oracles."""
    base = ScenarioConfig(noise=NoiseModel(thermal=False))
    flat = {"channel.n_rp": 0, "scenario.n_targets": 1, **overrides}
    return base.replace(**flat)


def check_single_target(range_m=150.0, radial_velocity_mps=10.0, az_local=20.0, el_local=15.0) -> CheckResult:
    t0 = time.perf_counter()
    scn = oracle_scenario()
    arch = rx_architecture(scn)
    renderer = make_renderer(scn, single_path(scn, range_m, radial_velocity_mps, az_local, el_local),
                             PathSet.empty(), arch)
    cube = render_cube(scn, renderer)
    dets, gated = extract_detections(cube, scn.cfar, scn.rx, scn.array, arch, scn.trp_position,
                                     scn.sector_half_width_deg)
    cell = 2.0 / scn.rx.aoa_fft_size  # direction-cosine FFT cell for half-wavelength spacing
    ok = len(dets) == 1 and gated == 0
    vals = {"n_detections": len(dets), "gated": gated}
    if dets:
        d = dets[0]
        u_true = direction(*to_global(az_local, el_local, scn.array))
        u_est = direction(d.az_deg, d.el_deg)
        rot = scn.array.rotation()
        lt, le = u_true @ rot, u_est @ rot  # local frame: (boresight, horizontal, vertical)
        vals.update(range_err=abs(d.range_m - range_m), vel_err=abs(d.radial_velocity_mps - radial_velocity_mps),
                    uh_err=abs(lt[1] - le[1]), uv_err=abs(lt[2] - le[2]))
        ok &= vals["range_err"] <= cube.range_per_bin + 1e-9
        ok &= vals["vel_err"] <= cube.velocity_per_bin + 1e-9
        ok &= vals["uh_err"] <= cell and vals["uv_err"] <= cell
    detail = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in vals.items())
    return CheckResult("single-target bin oracle", bool(ok), detail, time.perf_counter() - t0, vals)


def cfar_false_alarm_rate(gamma_db: float, guard, training, n_cells: int = 1_000_000,
                          seed: int = 0) -> tuple[float, float, int]:
    """Empirical vs analytic per-cell PFA of CA-CFAR on exponential (|CN|^2) noise.

    Only cells whose training ring lies fully inside the map are scored.
    Returns (empirical, analytic, scored cells).
    """
    cfg = CfarConfig(guard=tuple(guard), training=tuple(training), threshold_db=gamma_db)
    (gr, gd), (tr, td) = cfg.guard, cfg.training
    er, ed = gr + tr, gd + td
    side = int(np.ceil(np.sqrt(n_cells)))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, side + 2 * er, side + 2 * ed))
    power = (z[0] ** 2 + z[1] ** 2) / 2
    noise, count = cfar_noise(power, cfg)
    inner = (slice(er, er + side), slice(ed, ed + side))
    assert np.all(count[inner] == cfg.n_training)
    mask = cfar_mask(power, cfg, noise)[inner]
    n_t = cfg.n_training
    # The expectation converts dB on its own so a broken threshold_lin shows up.
    analytic = (1 + 10 ** (gamma_db / 10) / n_t) ** (-n_t)
    return float(mask.mean()), float(analytic), int(mask.size)


CFAR_SETTINGS = ((6.0, (2, 2), (8, 4)), (8.0, (1, 1), (2, 2)))


def check_cfar_pfa(tolerance: float = 0.2) -> CheckResult:
    t0 = time.perf_counter()
    parts, ok, vals = [], True, {}
    for gamma, guard, train in CFAR_SETTINGS:
        emp, ana, n = cfar_false_alarm_rate(gamma, guard, train)
        rel = abs(emp - ana) / ana
        ok &= rel <= tolerance
        parts.append(f"gamma={gamma} dB: measured {emp:.4g} vs expected {ana:.4g} over {n} cells")
        vals[gamma] = (emp, ana)
    return CheckResult("CFAR noise-floor PFA", bool(ok), "; ".join(parts), time.perf_counter() - t0, vals)


def clutter_null_ratio_db(seed: int = 0) -> float:
    """Post- over pre-suppression cube power for a background-only static channel."""
    scn = ScenarioConfig(noise=NoiseModel(thermal=False)).replace(**{"scenario.n_targets": 0})
    bg = background_channel(scn, drop_rng(seed, 0, 3))
    renderer = make_renderer(scn, PathSet.empty(), bg.paths())
    prs, rx = scn.prs, scn.rx
    grid = build_prs_grid(prs)
    occ = np.arange(prs.n_cpi)
    ks = [prs.active_subcarriers(l) for l in range(prs.n_prs_symbols)]
    syms = [grid.active_symbols(l)[None] for l in range(prs.n_prs_symbols)]
    args = (None, rx.doppler_window, prs.wavelength, prs.prs_period_s)
    pre = post = 0.0
    for start in range(0, renderer.arch.n_rf, rx.chain_block):
        chains = slice(start, start + rx.chain_block)
        est = [ls_estimate(np.sqrt(prs.tx_power_w) * renderer.effective(l, k, occ, chains) * s, s, prs.tx_power_w)
               for l, (k, s) in enumerate(zip(ks, syms))]
        prof = range_profile(destagger(est, ks, prs.scs_hz), None, rx.range_window, rx.max_range_m)
        pre += doppler_map(prof, *args).power.sum()
        post += doppler_map(suppress_static(prof), *args).power.sum()
    return float(lin2db(post / pre)) if post > 0 else float("-inf")


def check_clutter_null(limit_db: float = -250.0) -> CheckResult:
    t0 = time.perf_counter()
    r = clutter_null_ratio_db()
    return CheckResult("clutter null", r <= limit_db, f"post/pre power {r:.1f} dB (limit {limit_db} dB)",
                       time.perf_counter() - t0, {"ratio_db": r})


CHECKS = (check_single_target, check_cfar_pfa, check_clutter_null)


def run_selftest(checks=CHECKS) -> list[CheckResult]:
    return [c() for c in checks]
