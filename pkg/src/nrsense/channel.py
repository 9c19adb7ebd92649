"""Monostatic ISAC channel: UAV target paths plus a static NLoS background.

The target channel keeps the Release-19 structure (one dominant scattering
point per UAV, RCS scaling, coupled rays, relative path dropping) but draws
its small-scale parameters from a compact parametric generator instead of the
full TR 38.901 / TR 36.777 tables. Every distribution is set in
:class:`ChannelConfig`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from nrsense.array import ArrayConfig, RxArchitecture, angles, steering_vector
from nrsense.prs import PrsConfig
from nrsense.units import SPEED_OF_LIGHT, db2lin, dbm2watt

if TYPE_CHECKING:
    from nrsense.config import ScenarioConfig

log = logging.getLogger(__name__)

PATHLOSS_LAWS = ("free_space", "uma_nlos")


@dataclass(frozen=True)
class ChannelConfig:
    altitude_m: tuple[float, float] = (25.0, 300.0)
    speed_kmh: tuple[float, float] = (0.0, 180.0)
    min_bs_distance_m: float = 10.0
    min_target_separation_m: float = 10.0
    max_placement_rounds: int = 10_000
    rcs_mean_dbsm: float = -12.81
    rcs_angular: float = 1.0
    rcs_sigma_db: float = 3.74
    n_scatter: int = 4
    scatter_delay_spread_s: float = 100e-9
    scatter_angle_spread_deg: float = 5.0
    scatter_power_db_mean: float = -25.0
    scatter_power_db_std: float = 6.0
    path_drop_db: float = 40.0
    n_rp: int = 3
    rp_distance_m: tuple[float, float] = (20.0, 100.0)
    rp_height_m: tuple[float, float] = (0.0, 10.0)
    n_clusters: int = 10
    cluster_delay_spread_s: float = 363e-9
    cluster_delay_scaling: float = 2.3
    cluster_shadow_db: float = 3.0
    cluster_az_spread_deg: float = 15.0
    cluster_el_spread_deg: float = 5.0
    pathloss_law: str = "uma_nlos"
    shadow_fading_db: float = 6.0

    def __post_init__(self):
        if self.pathloss_law not in PATHLOSS_LAWS:
            raise ValueError(f"pathloss_law must be one of {PATHLOSS_LAWS}")
        if self.n_scatter < 0 or self.n_rp < 0 or self.n_clusters < 1:
            raise ValueError("ray / RP / cluster counts must be non-negative")
        if self.altitude_m[0] < 0 or self.altitude_m[1] < self.altitude_m[0]:
            raise ValueError("altitude range must be non-negative and ordered")
        if self.speed_kmh[0] < 0 or self.speed_kmh[1] < self.speed_kmh[0]:
            raise ValueError("speed range must be non-negative and ordered")


@dataclass(frozen=True)
class NoiseModel:
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 5.0
    si_power_dbm: float = float("-inf")
    isolation_db: float = 80.0
    thermal: bool = True

    def thermal_variance(self, scs_hz: float) -> float:
        """Per-RE thermal noise power (W) over one subcarrier, including NF."""
        if not self.thermal:
            return 0.0
        return float(dbm2watt(self.noise_psd_dbm_hz + 10 * np.log10(scs_hz) + self.noise_figure_db))

    def si_variance(self) -> float:
        return float(dbm2watt(self.si_power_dbm))

    def total_variance(self, scs_hz: float) -> float:
        return self.thermal_variance(scs_hz) + self.si_variance()

    def validate(self, tx_power_dbm: float) -> None:
        if self.si_power_dbm > tx_power_dbm - self.isolation_db:
            raise ValueError(
                f"si_power_dbm={self.si_power_dbm} exceeds P_TX - isolation = {tx_power_dbm - self.isolation_db:.2f} dBm"
            )


@dataclass(frozen=True)
class TargetState:
    position: np.ndarray
    velocity: np.ndarray
    rcs_mean_dbsm: float = -12.81
    rcs_angular: float = 1.0
    rcs_sigma_db: float = 3.74


@dataclass(frozen=True)
class PathSet:
    """Flat list of propagation paths. Angles are global degrees.

    ``target`` holds the owning target index, or -1 for background clusters.
    ``gain`` is the complex field amplitude at t = 0.
    """

    delay: np.ndarray
    aoa_az: np.ndarray
    aoa_el: np.ndarray
    aod_az: np.ndarray
    aod_el: np.ndarray
    gain: np.ndarray
    doppler: np.ndarray
    target: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.delay.size

    @classmethod
    def empty(cls) -> PathSet:
        z = np.zeros(0)
        return cls(z, z, z, z, z, z.astype(complex), z, z.astype(int))

    @classmethod
    def concat(cls, sets) -> PathSet:
        sets = list(sets)
        if not sets:
            return cls.empty()
        names = ("delay", "aoa_az", "aoa_el", "aod_az", "aod_el", "gain", "doppler", "target")
        return cls(*(np.concatenate([getattr(s, n) for s in sets]) for n in names))

    def to_json(self, path) -> None:
        rows = [
            {
                "target": int(self.target[i]),
                "delay_s": float(self.delay[i]),
                "aoa_deg": [float(self.aoa_az[i]), float(self.aoa_el[i])],
                "aod_deg": [float(self.aod_az[i]), float(self.aod_el[i])],
                "gain": [float(self.gain[i].real), float(self.gain[i].imag)],
                "doppler_hz": float(self.doppler[i]),
            }
            for i in range(self.n_paths)
        ]
        Path(path).write_text(json.dumps(rows, indent=1))


@dataclass(frozen=True)
class BackgroundRealization:
    n_rp: int
    rp_positions: np.ndarray
    pathloss_db: np.ndarray
    shadow_db: np.ndarray
    clusters: list[PathSet] = field(repr=False)

    def paths(self) -> PathSet:
        """All clusters with the per-RP 10^(-(PL+SF)/20) scaling applied."""
        scaled = []
        for r, c in enumerate(self.clusters):
            s = 10 ** (-(self.pathloss_db[r] + self.shadow_db[r]) / 20)
            scaled.append(PathSet(c.delay, c.aoa_az, c.aoa_el, c.aod_az, c.aod_el, c.gain * s,
                                  c.doppler, c.target))
        return PathSet.concat(scaled)


def draw_targets(scn: ScenarioConfig, rng: np.random.Generator) -> list[TargetState]:
    """Place ``scn.n_targets`` UAVs uniformly over the forward sector.

    Horizontal positions are area-uniform over the sector wedge, altitude and
    horizontal speed uniform, heading uniform, vertical speed zero. Placements
    that violate the BS or inter-target distance limits are redrawn.
    """
    ch = scn.channel
    trp = np.asarray(scn.trp_position, dtype=float)
    yaw = scn.array.boresight_yaw_deg
    half = np.deg2rad(scn.sector_half_width_deg)
    targets: list[TargetState] = []
    rounds = 0
    while len(targets) < scn.n_targets:
        rounds += 1
        if rounds > ch.max_placement_rounds:
            raise RuntimeError(
                f"target placement failed after {ch.max_placement_rounds} rejection rounds"
            )
        r = scn.sector_radius_m * np.sqrt(rng.uniform())
        az = np.deg2rad(yaw) + rng.uniform(-half, half)
        h = rng.uniform(*ch.altitude_m)
        pos = np.array([trp[0] + r * np.cos(az), trp[1] + r * np.sin(az), h])
        speed = rng.uniform(*ch.speed_kmh) / 3.6
        heading = rng.uniform(0, 2 * np.pi)
        vel = np.array([speed * np.cos(heading), speed * np.sin(heading), 0.0])
        if np.linalg.norm(pos - trp) < ch.min_bs_distance_m:
            continue
        if any(np.linalg.norm(pos - t.position) < ch.min_target_separation_m for t in targets):
            continue
        targets.append(TargetState(pos, vel, ch.rcs_mean_dbsm, ch.rcs_angular, ch.rcs_sigma_db))
    return targets


def draw_rcs(target: TargetState, rng: np.random.Generator) -> float:
    """sigma_RCS = sigma_M * sigma_D * sigma_S with log-normal sigma_S (m^2)."""
    sigma_s_db = rng.normal(0.0, target.rcs_sigma_db) if target.rcs_sigma_db > 0 else 0.0
    return float(db2lin(target.rcs_mean_dbsm) * target.rcs_angular * db2lin(sigma_s_db))


def radial_velocity(target: TargetState, trp) -> float:
    """Range rate sign-flipped so approaching targets are positive."""
    los = target.position - np.asarray(trp, dtype=float)
    return float(-np.dot(target.velocity, los) / np.linalg.norm(los))


def monostatic_gain2(rcs_m2: float, distance_m: float, wavelength: float) -> float:
    """Two-way isotropic power gain lambda^2 sigma / ((4 pi)^3 d^4)."""
    return wavelength**2 * rcs_m2 / ((4 * np.pi) ** 3 * distance_m**4)


def target_paths(target: TargetState, scn: ScenarioConfig, rcs_m2: float, rng: np.random.Generator,
                 index: int = 0) -> PathSet:
    """Direct echo plus coupled scattered rays for one target.

    Rays trail the direct echo by exponential excess delays, deviate in angle by
    Laplacian offsets (independently at departure and arrival) and sit
    log-normally below the direct power. They share the target Doppler. Rays
    more than ``path_drop_db`` below the strongest path are discarded.
    """
    ch = scn.channel
    lam = scn.prs.wavelength
    trp = np.asarray(scn.trp_position, dtype=float)
    los = target.position - trp
    d = float(np.linalg.norm(los))
    az, el = angles(los)
    az, el = float(az), float(el)
    amp = np.sqrt(monostatic_gain2(rcs_m2, d, lam))
    f_d = 2 * radial_velocity(target, trp) / lam

    n = ch.n_scatter
    excess = rng.exponential(ch.scatter_delay_spread_s, n) if ch.scatter_delay_spread_s > 0 else np.zeros(n)
    b = ch.scatter_angle_spread_deg / np.sqrt(2)
    off = rng.laplace(0.0, b, (4, n)) if b > 0 else np.zeros((4, n))
    rel_db = np.minimum(rng.normal(ch.scatter_power_db_mean, ch.scatter_power_db_std, n), -1.0)
    phases = rng.uniform(0, 2 * np.pi, n + 1)

    p_db = np.concatenate([[0.0], rel_db])
    keep = p_db >= p_db.max() - ch.path_drop_db
    delay = 2 * d / SPEED_OF_LIGHT + np.concatenate([[0.0], excess])
    aoa_el = np.clip(el + np.concatenate([[0.0], off[1]]), -90, 90)
    aod_el = np.clip(el + np.concatenate([[0.0], off[3]]), -90, 90)
    gain = amp * 10 ** (p_db / 20) * np.exp(1j * phases)
    return PathSet(
        delay=delay[keep],
        aoa_az=(az + np.concatenate([[0.0], off[0]]))[keep],
        aoa_el=aoa_el[keep],
        aod_az=(az + np.concatenate([[0.0], off[2]]))[keep],
        aod_el=aod_el[keep],
        gain=gain[keep],
        doppler=np.full(keep.sum(), f_d),
        target=np.full(keep.sum(), index),
    )


def pathloss_db(d3d_m, h_m, fc_hz: float, law: str):
    d = np.maximum(np.asarray(d3d_m, dtype=float), 1.0)
    fc_ghz = fc_hz / 1e9
    fspl = 20 * np.log10(d) + 20 * np.log10(fc_ghz) + 32.45
    if law == "free_space":
        return fspl
    # TR 38.901 UMa NLoS PL' clipped below by free space.
    nlos = 13.54 + 39.08 * np.log10(d) + 20 * np.log10(fc_ghz) - 0.6 * (np.asarray(h_m) - 1.5)
    return np.maximum(nlos, fspl)


def _wrapped_normal(rng, centre, spread, size):
    return (centre + rng.normal(0.0, spread, size) + 180) % 360 - 180


def background_channel(scn: ScenarioConfig, rng: np.random.Generator) -> BackgroundRealization:
    """Static clutter from ``n_rp`` virtual reference points around the TRP.

    Each RP link is an NLoS cluster set: exponential delays, wrapped-Gaussian
    angles about the RP direction and Rayleigh cluster gains whose expected
    total power is one before path-loss and shadowing are applied.
    """
    ch = scn.channel
    trp = np.asarray(scn.trp_position, dtype=float)
    yaw = scn.array.boresight_yaw_deg
    pos, pl, sf, clusters = [], [], [], []
    for _ in range(ch.n_rp):
        dist = rng.uniform(*ch.rp_distance_m)
        height = rng.uniform(*ch.rp_height_m)
        phi = np.deg2rad(yaw + rng.uniform(-scn.sector_half_width_deg, scn.sector_half_width_deg))
        p = np.array([trp[0] + dist * np.cos(phi), trp[1] + dist * np.sin(phi), height])
        d3 = float(np.linalg.norm(p - trp))
        pos.append(p)
        pl.append(float(pathloss_db(d3, height, scn.prs.carrier_freq_hz, ch.pathloss_law)))
        sf.append(float(rng.normal(0.0, ch.shadow_fading_db)))

        n = ch.n_clusters
        r_tau = ch.cluster_delay_scaling
        tau = -r_tau * ch.cluster_delay_spread_s * np.log(rng.uniform(size=n))
        tau = np.sort(tau - tau.min())
        z = rng.normal(0.0, ch.cluster_shadow_db, n)
        pw = np.exp(-tau * (r_tau - 1) / (r_tau * ch.cluster_delay_spread_s)) * 10 ** (-z / 10)
        pw /= pw.sum()
        g = np.sqrt(pw / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        az0, el0 = angles(p - trp)
        clusters.append(PathSet(
            delay=2 * d3 / SPEED_OF_LIGHT + tau,
            aoa_az=_wrapped_normal(rng, float(az0), ch.cluster_az_spread_deg, n),
            aoa_el=np.clip(float(el0) + rng.normal(0.0, ch.cluster_el_spread_deg, n), -90, 90),
            aod_az=_wrapped_normal(rng, float(az0), ch.cluster_az_spread_deg, n),
            aod_el=np.clip(float(el0) + rng.normal(0.0, ch.cluster_el_spread_deg, n), -90, 90),
            gain=g,
            doppler=np.zeros(n),
            target=np.full(n, -1),
        ))
    return BackgroundRealization(
        n_rp=ch.n_rp,
        rp_positions=np.array(pos).reshape(-1, 3),
        pathloss_db=np.array(pl),
        shadow_db=np.array(sf),
        clusters=clusters,
    )


class ChannelRenderer:
    """Frequency-domain channel on PRS resource elements.

    ``matrix`` evaluates the full N x N matrix H_{k,l,m}; ``effective``
    evaluates W_RF^H H f directly through a separable path factorisation,
    which is what the simulation loop consumes. Background paths carry no
    Doppler and are rendered once per subcarrier, so they are bit-identical
    across symbols and occasions.
    """

    def __init__(self, targets: PathSet, background: PathSet, prs: PrsConfig, array: ArrayConfig,
                 arch: RxArchitecture, precoder: np.ndarray):
        self.targets = targets
        self.background = background
        self.prs = prs
        self.array = array
        self.arch = arch
        self.precoder = np.asarray(precoder, dtype=np.complex128)
        self._freqs = prs.subcarrier_freqs()
        if targets.n_paths and targets.delay.max() > 0.07 / prs.scs_hz:
            log.debug("path delay exceeds the normal cyclic prefix")
        self._sig_t = self._signatures(targets)
        self._sig_b = self._signatures(background)

    def _signatures(self, paths: PathSet) -> np.ndarray:
        """Per-path spatial term W^H a_rx (a_tx^H f), shape (N_RF, P)."""
        if paths.n_paths == 0:
            return np.zeros((self.arch.n_rf, 0), dtype=np.complex128)
        a_rx = steering_vector(paths.aoa_az, paths.aoa_el, self.array)
        a_tx = steering_vector(paths.aod_az, paths.aod_el, self.array)
        tx_gain = a_tx.conj() @ self.precoder
        return (self.arch.combine(a_rx) * tx_gain[:, None]).T

    def matrix(self, k: int, symbol: int, occasion: int, part: str = "all") -> np.ndarray:
        t = float(self.prs.re_time(symbol, occasion))
        f_k = self._freqs[k]
        h = np.zeros((self.array.n_elements,) * 2, dtype=np.complex128)
        sets = {"all": (self.targets, self.background), "targets": (self.targets,),
                "background": (self.background,)}[part]
        for paths in sets:
            if paths.n_paths == 0:
                continue
            a_rx = steering_vector(paths.aoa_az, paths.aoa_el, self.array)
            a_tx = steering_vector(paths.aod_az, paths.aod_el, self.array)
            w = paths.gain * np.exp(2j * np.pi * paths.doppler * t) * np.exp(-2j * np.pi * f_k * paths.delay)
            h += (a_rx * w[:, None]).T @ a_tx.conj()
        return h

    def background_response(self, subcarriers: np.ndarray, chains=slice(None)) -> np.ndarray:
        """Background term of g for the given subcarriers, shape (chains, K)."""
        b = self.background
        if b.n_paths == 0:
            return np.zeros((self._sig_b[chains].shape[0], subcarriers.size), dtype=np.complex128)
        freq = b.gain[:, None] * np.exp(-2j * np.pi * self._freqs[subcarriers][None, :] * b.delay[:, None])
        return self._sig_b[chains] @ freq

    def effective(self, symbol: int, subcarriers: np.ndarray, occasions: np.ndarray,
                  chains=slice(None), include_background: bool = True) -> np.ndarray:
        """g = W^H H f on (chains, occasions, subcarriers) for one PRS symbol."""
        occasions = np.asarray(occasions)
        p = self.targets
        sig = self._sig_t[chains]
        n_ch = sig.shape[0]
        out = np.zeros((n_ch, occasions.size, subcarriers.size), dtype=np.complex128)
        if p.n_paths:
            t_sym = symbol * self.prs.symbol_duration_s
            freq = (p.gain * np.exp(2j * np.pi * p.doppler * t_sym))[:, None] * np.exp(
                -2j * np.pi * self._freqs[subcarriers][None, :] * p.delay[:, None])
            slow = np.exp(2j * np.pi * p.doppler[:, None] * occasions[None, :] * self.prs.prs_period_s)
            c = sig[:, None, :] * slow.T[None, :, :]
            out += (c.reshape(-1, p.n_paths) @ freq).reshape(n_ch, occasions.size, subcarriers.size)
        if include_background:
            out += self.background_response(subcarriers, chains)[:, None, :]
        return out


def apply_noise_and_si(y_clean: np.ndarray, noise: NoiseModel, rng: np.random.Generator,
                       scs_hz: float) -> np.ndarray:
    """Add thermal noise and residual SI to per-RE baseband samples.

    Both terms are white circular Gaussian, independent of each other and of
    the signal, so their sum is drawn as a single CN(0, sigma_n^2 + sigma_si^2)
    field. This keeps paired-seed SI sweeps exactly paired. Combining with
    orthonormal W_RF columns leaves the per-chain variance unchanged.
    """
    var = noise.total_variance(scs_hz)
    if var == 0.0:
        return y_clean
    z = rng.standard_normal(y_clean.shape + (2,)).view(np.complex128)[..., 0]
    z *= np.sqrt(var / 2)
    return y_clean + z
