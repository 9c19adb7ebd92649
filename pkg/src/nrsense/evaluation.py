"""Monte Carlo drops, truth association and detection/localization metrics."""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from nrsense.array import element_pattern_db, make_rx_architecture, quasi_omni_precoder, to_local
from nrsense.channel import (
    BackgroundRealization,
    ChannelRenderer,
    PathSet,
    TargetState,
    apply_noise_and_si,
    background_channel,
    draw_rcs,
    draw_targets,
    monostatic_gain2,
    radial_velocity,
    target_paths,
)
from nrsense.config import ConfigError, ScenarioConfig
from nrsense.prs import build_prs_grid
from nrsense.receiver import (
    BartlettScanner,
    Detection,
    RangeDopplerCube,
    cfar_noise,
    destagger,
    doppler_map,
    extract_detections,
    ls_estimate,
    range_profile,
    suppress_static,
)
from nrsense.units import lin2db, watt2dbm

SWEEP_AXES = ("cfar_gamma", "si_power", "cpi_length", "architecture", "dv_spacing")

# Stream labels for the per-drop generators. Each stream is addressed by
# (drop_index, label[, chain]) so drops never depend on execution order.
_TARGETS, _RCS, _PATHS, _BACKGROUND, _NOISE = range(5)


def drop_rng(master_seed: int, drop_index: int, stream: int, *extra: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=(drop_index, stream, *extra))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class DropRealization:
    targets: list[TargetState]
    rcs_m2: np.ndarray
    target_paths: PathSet
    background: BackgroundRealization


@dataclass(frozen=True)
class TruthInfo:
    position: np.ndarray
    velocity: np.ndarray
    range_m: float
    radial_velocity_mps: float
    az_deg: float
    el_deg: float
    rcs_dbsm: float
    link_snr_db: float  # single RE, single element, before any integration


@dataclass
class DropMetrics:
    drop: int
    tp: int
    fa: int
    fn: int
    gated: int = 0
    e_r: list[float] = field(default_factory=list)
    e_v: list[float] = field(default_factory=list)
    e_h: list[float] = field(default_factory=list)
    e_vert: list[float] = field(default_factory=list)
    e_v_raw: list[float] = field(default_factory=list)

    def __post_init__(self):
        if min(self.tp, self.fa, self.fn, self.gated) < 0:
            raise ValueError("counts must be non-negative")


@dataclass
class DropOutcome:
    drop: int
    gamma_db: float
    detections: list[Detection]
    truths: list[TruthInfo]
    matches: list[tuple[int, int]]
    metrics: DropMetrics
    # post-integration peak-to-floor proxy (dB) at each truth's expected cell
    truth_rd_snr_db: list[float] = field(default_factory=list)
    rd_power: np.ndarray | None = field(default=None, repr=False)
    rd_bin_size: tuple[float, float] = (0.0, 0.0)  # (m, m/s) per range / Doppler bin


@dataclass
class AggregateMetrics:
    pd: float
    pfa: float | None
    ptp: float | None
    f1: float
    tp: int
    fa: int
    fn: int
    gated: int
    n_drops: int
    n_scored_drops: int
    percentiles: dict[str, dict[str, float | None]]
    roc: list[tuple[float, float, float | None]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def draw_drop(scn: ScenarioConfig, drop_index: int) -> DropRealization:
    seed = scn.master_seed
    targets = draw_targets(scn, drop_rng(seed, drop_index, _TARGETS))
    rng_rcs = drop_rng(seed, drop_index, _RCS)
    rcs = np.array([draw_rcs(t, rng_rcs) for t in targets])
    rng_p = drop_rng(seed, drop_index, _PATHS)
    paths = PathSet.concat(target_paths(t, scn, r, rng_p, i) for i, (t, r) in enumerate(zip(targets, rcs)))
    bg = background_channel(scn, drop_rng(seed, drop_index, _BACKGROUND))
    return DropRealization(targets, rcs, paths, bg)


def rx_architecture(scn: ScenarioConfig):
    beam = None if scn.rx.analog_beam_index < 0 else scn.rx.analog_beam_index
    return make_rx_architecture(scn.rx.architecture, scn.array, beam_index=beam,
                                sector_half_width_deg=scn.sector_half_width_deg)


def make_renderer(scn: ScenarioConfig, targets: PathSet, background: PathSet, arch=None) -> ChannelRenderer:
    arch = arch or rx_architecture(scn)
    return ChannelRenderer(targets, background, scn.prs, scn.array, arch, quasi_omni_precoder(scn.array))


def render_cube(scn: ScenarioConfig, renderer: ChannelRenderer, drop_index: int = 0) -> RangeDopplerCube:
    """Synthesize PRS observations, add noise/SI and run the range-Doppler chain.

    RF chains are processed in blocks of ``rx.chain_block``. Every chain draws
    noise from its own stream, so the block size only affects floating-point
    rounding, never the random draws.
    """
    prs, rx = scn.prs, scn.rx
    grid = build_prs_grid(prs)
    occ = np.arange(prs.n_cpi)
    p_w = prs.tx_power_w
    amp = np.sqrt(p_w)
    # A silent transmitter still gets a finite matched filter.
    p_ref = p_w if p_w > 0 else 1.0
    noisy = scn.noise.total_variance(prs.scs_hz) > 0
    ks = [prs.active_subcarriers(l) for l in range(prs.n_prs_symbols)]
    syms = [grid.active_symbols(l)[None] for l in range(prs.n_prs_symbols)]
    # LS de-rotation factors, reused for every chain block.
    derot = [ls_estimate(np.ones(s.shape), s, p_ref) for s in syms]
    n_rf = renderer.arch.n_rf
    parts = []
    for start in range(0, n_rf, rx.chain_block):
        chains = range(start, min(start + rx.chain_block, n_rf))
        rngs = [drop_rng(scn.master_seed, drop_index, _NOISE, c) for c in chains] if noisy else []
        estimates = []
        for l, k in enumerate(ks):
            y = amp * renderer.effective(l, k, occ, slice(chains.start, chains.stop)) * syms[l]
            for i, r in enumerate(rngs):
                y[i] = apply_noise_and_si(y[i], scn.noise, r, prs.scs_hz)
            y *= derot[l]
            estimates.append(y)
        g = destagger(estimates, ks, prs.scs_hz)
        prof = suppress_static(range_profile(g, rx.n_range_fft or None, rx.range_window, rx.max_range_m))
        parts.append(doppler_map(prof, rx.n_doppler_fft or None, rx.doppler_window, prs.wavelength,
                                 prs.prs_period_s))
    return RangeDopplerCube.stack(parts)


def truth_info(scn: ScenarioConfig, drop: DropRealization) -> list[TruthInfo]:
    trp = np.asarray(scn.trp_position, dtype=float)
    n0 = scn.noise.thermal_variance(scn.prs.scs_hz)
    out = []
    for t, rcs in zip(drop.targets, drop.rcs_m2):
        los = t.position - trp
        d = float(np.linalg.norm(los))
        az = float(np.rad2deg(np.arctan2(los[1], los[0])))
        el = float(np.rad2deg(np.arcsin(los[2] / d)))
        laz, lel = to_local(az, el, scn.array)
        g_el = 2 * float(element_pattern_db(laz, lel, scn.array))
        rx_dbm = scn.prs.tx_power_dbm + g_el + float(lin2db(monostatic_gain2(rcs, d, scn.prs.wavelength)))
        snr = rx_dbm - float(watt2dbm(n0)) if n0 > 0 else float("inf")
        out.append(TruthInfo(t.position, t.velocity, d, radial_velocity(t, trp), az, el,
                             float(lin2db(rcs)), snr))
    return out


def associate(det_pos, truth_pos, gate_m: float):
    """Greedy one-to-one nearest-neighbour association in 3D.

    Returns ``(matches, unmatched_detections, missed_truths)`` where
    ``matches`` is a list of (detection index, truth index) in match order.
    """
    if gate_m <= 0:
        raise ValueError("gate_m must be positive")
    det_pos = np.asarray(det_pos, dtype=float).reshape(-1, 3)
    truth_pos = np.asarray(truth_pos, dtype=float).reshape(-1, 3)
    nd, nt = len(det_pos), len(truth_pos)
    matches: list[tuple[int, int]] = []
    if nd and nt:
        dist = np.linalg.norm(det_pos[:, None, :] - truth_pos[None, :, :], axis=-1)
        order = np.argsort(dist, axis=None, kind="stable")
        used_d, used_t = set(), set()
        for flat in order:
            i, j = divmod(int(flat), nt)
            if dist[i, j] > gate_m:
                break
            if i in used_d or j in used_t:
                continue
            matches.append((i, j))
            used_d.add(i)
            used_t.add(j)
    md = {i for i, _ in matches}
    mt = {j for _, j in matches}
    return matches, [i for i in range(nd) if i not in md], [j for j in range(nt) if j not in mt]


def fold_velocity(dv, span: float):
    """Wrap a velocity difference into [-span/2, span/2)."""
    return (np.asarray(dv) + span / 2) % span - span / 2


def score(drop_index: int, dets: list[Detection], truths: list[TruthInfo], gated: int, gate_m: float,
          velocity_span: float) -> tuple[DropMetrics, list[tuple[int, int]]]:
    matches, fa, fn = associate([d.position for d in dets], [t.position for t in truths], gate_m)
    m = DropMetrics(drop_index, tp=len(matches), fa=len(fa), fn=len(fn), gated=gated)
    for i, j in matches:
        d, t = dets[i], truths[j]
        m.e_r.append(abs(d.range_m - t.range_m))
        raw = d.radial_velocity_mps - t.radial_velocity_mps
        m.e_v_raw.append(abs(raw))
        m.e_v.append(float(abs(fold_velocity(raw, velocity_span))))
        m.e_h.append(float(np.linalg.norm(d.position[:2] - t.position[:2])))
        m.e_vert.append(abs(float(d.position[2] - t.position[2])))
    return m, matches


def _truth_cell_snr(cube: RangeDopplerCube, noise: np.ndarray, t: TruthInfo, span: float) -> float:
    n = int(round(t.range_m / cube.range_per_bin))
    if n >= cube.power.shape[0]:
        return float("nan")
    v = float(fold_velocity(t.radial_velocity_mps, span))
    col = (int(round(v / cube.velocity_per_bin)) + cube.n_d // 2) % cube.n_d
    rs = slice(max(n - 1, 0), n + 2)
    cols = [(col + c) % cube.n_d for c in (-1, 0, 1)]
    p = cube.power[rs][:, cols]
    q = noise[rs][:, cols]
    k = np.unravel_index(int(np.argmax(p)), p.shape)
    return float(lin2db(p[k] / q[k])) if q[k] > 0 else float("inf")


@lru_cache(maxsize=4)
def _scanner(scn: ScenarioConfig) -> BartlettScanner:
    return BartlettScanner(scn.array, rx_architecture(scn), scn.sector_half_width_deg,
                           scn.rx.bartlett_step_deg, scn.rx.bartlett_el_limits_deg)


def evaluate_cube(scn: ScenarioConfig, cube: RangeDopplerCube, truths: list[TruthInfo], drop_index: int,
                  gammas=None, arch=None, keep_power: bool = False) -> list[DropOutcome]:
    """Detect, localize and score one cube at each CFAR threshold in ``gammas`` (dB)."""
    arch = arch or rx_architecture(scn)
    gammas = [scn.cfar.threshold_db] if gammas is None else list(gammas)
    noise, _ = cfar_noise(cube.power, scn.cfar)
    scanner = _scanner(scn) if scn.rx.aoa_method == "bartlett" and arch.kind != "analog" else None
    span = scn.prs.wavelength / (2 * scn.prs.prs_period_s)
    truth_snr = [_truth_cell_snr(cube, noise, t, span) for t in truths]
    out = []
    for g in gammas:
        cfar = dataclasses.replace(scn.cfar, threshold_db=float(g))
        dets, gated = extract_detections(cube, cfar, scn.rx, scn.array, arch, scn.trp_position,
                                         scn.sector_half_width_deg, noise=noise, scanner=scanner)
        metrics, matches = score(drop_index, dets, truths, gated, scn.association_gate_m, span)
        out.append(DropOutcome(drop_index, float(g), dets, truths, matches, metrics, truth_snr,
                               cube.power.astype(np.float32) if keep_power else None,
                               (cube.range_per_bin, cube.velocity_per_bin)))
    return out


def simulate_drop(scn: ScenarioConfig, drop_index: int) -> tuple[RangeDopplerCube, list[TruthInfo]]:
    drop = draw_drop(scn, drop_index)
    cube = render_cube(scn, make_renderer(scn, drop.target_paths, drop.background.paths()), drop_index)
    return cube, truth_info(scn, drop)


def run_drop(scn: ScenarioConfig, drop_index: int) -> DropOutcome:
    """One full drop at the configured CFAR threshold."""
    cube, truths = simulate_drop(scn, drop_index)
    return evaluate_cube(scn, cube, truths, drop_index)[0]


def _drop_task(args) -> list[DropOutcome]:
    scn, drop_index, gammas, keep_power = args
    cube, truths = simulate_drop(scn, drop_index)
    return evaluate_cube(scn, cube, truths, drop_index, gammas, keep_power=keep_power)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("NR_SENSE_WORKERS", "1")))
    except ValueError:
        return 1


def run_monte_carlo(scn: ScenarioConfig, gammas=None, *, n_drops: int | None = None, workers: int | None = None,
                    keep_power: bool = False) -> list[list[DropOutcome]]:
    """Run drops 0..n_drops-1; returns ``outcomes[drop][gamma]`` in drop order."""
    n = scn.n_drops if n_drops is None else n_drops
    workers = default_workers() if workers is None else max(1, workers)
    tasks = [(scn, i, gammas, keep_power) for i in range(n)]
    if workers == 1 or n == 1:
        return [_drop_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_drop_task, tasks))


def _percentile(samples, q) -> float | None:
    return float(np.percentile(samples, q)) if len(samples) else None


def aggregate(drops: list[DropMetrics], roc=None) -> AggregateMetrics:
    """Pooled Pd and F1; Type-2 PFA/PTP averaged over drops with declarations.

    Ratios are accumulated as exact fractions and rounded once, so identities
    such as PTP = 1 - PFA hold without floating-point drift.
    """
    if not drops:
        raise ValueError("aggregate needs at least one drop")
    tp = sum(d.tp for d in drops)
    fa = sum(d.fa for d in drops)
    fn = sum(d.fn for d in drops)
    scored = [d for d in drops if d.tp + d.fa > 0]
    if scored:
        pfa_q = sum(Fraction(d.fa, d.tp + d.fa) for d in scored) / len(scored)
        pfa, ptp = float(pfa_q), float(1 - pfa_q)
    else:
        pfa = ptp = None
    pd = float(Fraction(tp, tp + fn)) if tp + fn else 0.0
    den = 2 * tp + fa + fn
    f1 = float(Fraction(2 * tp, den)) if den else 0.0
    pct = {}
    for name, attr in (("range", "e_r"), ("velocity", "e_v"), ("horizontal", "e_h"),
                       ("vertical", "e_vert"), ("velocity_raw", "e_v_raw")):
        samples = [x for d in drops for x in getattr(d, attr)]
        pct[name] = {"p50": _percentile(samples, 50), "p90": _percentile(samples, 90)}
    return AggregateMetrics(pd, pfa, ptp, f1, tp, fa, fn, sum(d.gated for d in drops), len(drops),
                            len(scored), pct, list(roc or []))


@dataclass
class SweepTable:
    axis: str
    values: list
    metrics: list[AggregateMetrics]
    outcomes: list[list[DropOutcome]]  # outcomes[value][drop]

    def roc(self) -> list[tuple[float, float, float | None]]:
        return [(float(v), m.pd, m.pfa) for v, m in zip(self.values, self.metrics)]


def apply_axis(scn: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    key = {
        "si_power": "noise.si_power_dbm",
        "cpi_length": "prs.n_cpi",
        "architecture": "rx.architecture",
        "dv_spacing": "array.dv",
    }.get(axis)
    if key is None:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    return scn.replace(**{key: value})


def sweep(scn: ScenarioConfig, axis: str, values, *, n_drops: int | None = None,
          workers: int | None = None) -> SweepTable:
    """Paired-seed sweep: drop ``i`` uses the same seeds for every value.

    The CFAR threshold axis scores every value on the same range-Doppler cube.
    """
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if axis == "cfar_gamma":
        for g in values:
            if float(g) <= 0:
                raise ConfigError(f"cfar_gamma value {g} must be positive")
        runs = run_monte_carlo(scn, [float(g) for g in values], n_drops=n_drops, workers=workers)
        per_value = [[r[i] for r in runs] for i in range(len(values))]
    else:
        scns = [apply_axis(scn, axis, v) for v in values]
        per_value = [[r[0] for r in run_monte_carlo(s, n_drops=n_drops, workers=workers)] for s in scns]
    metrics = [aggregate([o.metrics for o in outs]) for outs in per_value]
    table = SweepTable(axis, values, metrics, per_value)
    if axis == "cfar_gamma":
        for m in metrics:
            m.roc = table.roc()
    return table
