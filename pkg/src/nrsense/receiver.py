"""Baseline sensing receiver: channel estimation to 3D detections.

Array layouts used throughout (leading axis is always the RF chain):

* per-symbol observations and LS estimates: ``(chain, occasion, tone)``
* destaggered estimates (:class:`ChannelEstimateGrid`): ``(chain, occasion, tone)``
* range profiles: ``(chain, occasion, range_bin)``
* range-Doppler maps: ``(chain, range_bin, doppler_bin)``, Doppler fft-shifted
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from nrsense.array import ArrayConfig, RxArchitecture, direction, local_steering, to_global, wrap_deg
from nrsense.units import SPEED_OF_LIGHT, lin2db

WINDOWS = ("rect", "hann", "hamming")
AOA_METHODS = ("fft", "bartlett")


def window(name: str, n: int) -> np.ndarray:
    if name == "rect":
        return np.ones(n)
    if name == "hann":
        return np.hanning(n) if n > 2 else np.ones(n)
    if name == "hamming":
        return np.hamming(n) if n > 1 else np.ones(n)
    raise ValueError(f"unknown window {name!r}; expected one of {WINDOWS}")


@dataclass(frozen=True)
class RxConfig:
    architecture: str = "full_digital"
    aoa_method: str = "fft"
    aoa_fft_size: int = 128
    spatial_window: str = "hamming"
    range_window: str = "hann"
    doppler_window: str = "hann"
    n_range_fft: int = 0  # 0: next power of two above the destaggered tone count
    n_doppler_fft: int = 0  # 0: N_CPI
    max_range_m: float = 1000.0
    bartlett_step_deg: float = 1.0
    bartlett_el_limits_deg: tuple[float, float] = (-10.0, 90.0)
    analog_beam_index: int = -1  # -1: boresight beam
    interpolate: bool = False
    chain_block: int = 8

    def __post_init__(self):
        if self.aoa_method not in AOA_METHODS:
            raise ValueError(f"aoa_method must be one of {AOA_METHODS}")
        for w in (self.spatial_window, self.range_window, self.doppler_window):
            if w not in WINDOWS:
                raise ValueError(f"unknown window {w!r}")
        if self.bartlett_step_deg <= 0:
            raise ValueError("bartlett_step_deg must be positive")
        if self.chain_block < 1:
            raise ValueError("chain_block must be >= 1")


@dataclass(frozen=True)
class CfarConfig:
    guard: tuple[int, int] = (2, 2)
    training: tuple[int, int] = (8, 4)
    threshold_db: float = 20.0
    nms_radius: tuple[int, int] = (4, 3)
    # Doppler bins |v| <= doppler_notch are never cells under test (-1 disables).
    # Slow-time mean removal cancels those velocities anyway and leaves only the
    # windowed-DC residue of every moving target there.
    doppler_notch: int = 1

    def __post_init__(self):
        if min(self.guard) < 0 or min(self.training) < 0:
            raise ValueError("guard/training sizes must be non-negative")
        if self.n_training < 1:
            raise ValueError("CFAR training ring is empty")
        if self.threshold_db <= 0:
            raise ValueError("CFAR threshold must be positive in dB")

    @property
    def n_training(self) -> int:
        (gr, gd), (tr, td) = self.guard, self.training
        return (2 * (gr + tr) + 1) * (2 * (gd + td) + 1) - (2 * gr + 1) * (2 * gd + 1)

    @property
    def threshold_lin(self) -> float:
        return 10 ** (self.threshold_db / 10)


@dataclass(frozen=True)
class ChannelEstimateGrid:
    """Destaggered LS estimates, ``(chain, occasion, tone)``.

    ``subcarriers`` lists the subcarrier index of each tone; tones sit on a
    uniform lattice of spacing ``tone_spacing_hz`` (unmeasured lattice points
    hold zeros).
    """

    estimates: np.ndarray = field(repr=False)
    subcarriers: np.ndarray = field(repr=False)
    tone_spacing_hz: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.estimates)):
            raise ValueError("channel estimates contain non-finite values")
        if self.estimates.shape[-1] != self.subcarriers.size:
            raise ValueError("tone axis does not match subcarrier map")

    @property
    def n_tones(self) -> int:
        return self.subcarriers.size


@dataclass(frozen=True)
class RangeProfile:
    data: np.ndarray = field(repr=False)  # (chain, occasion, range_bin)
    n_r: int
    range_per_bin: float


@dataclass(frozen=True)
class RangeDopplerCube:
    maps: np.ndarray = field(repr=False)  # (chain, range_bin, doppler_bin)
    power: np.ndarray = field(repr=False)  # (range_bin, doppler_bin)
    n_r: int
    n_d: int
    range_per_bin: float
    velocity_per_bin: float

    @property
    def doppler_bins(self) -> np.ndarray:
        """Signed Doppler bin of each column."""
        return np.arange(self.n_d) - self.n_d // 2

    def range_m(self, n):
        return np.asarray(n) * self.range_per_bin

    def velocity_mps(self, col):
        return (np.asarray(col) - self.n_d // 2) * self.velocity_per_bin

    @classmethod
    def stack(cls, parts: list[RangeDopplerCube]) -> RangeDopplerCube:
        p0 = parts[0]
        maps = np.concatenate([p.maps for p in parts], axis=0)
        power = np.sum([p.power for p in parts], axis=0)
        return cls(maps, power, p0.n_r, p0.n_d, p0.range_per_bin, p0.velocity_per_bin)


class CfarHit(NamedTuple):
    n: int
    col: int
    power: float
    noise: float


@dataclass(frozen=True)
class Detection:
    range_m: float
    radial_velocity_mps: float
    az_deg: float
    el_deg: float
    position: np.ndarray
    peak_power: float
    snr_proxy_db: float
    rd_bin: tuple[int, int]


def ls_estimate(y, s, p_tx_w: float) -> np.ndarray:
    """Matched-filter LS estimate y s* / (sqrt(P_TX) |s|^2)."""
    s = np.asarray(s)
    mag2 = np.abs(s) ** 2
    if np.any(mag2 == 0):
        raise ValueError("LS estimation on an inactive resource element")
    return np.asarray(y) * s.conj() / (np.sqrt(p_tx_w) * mag2)


def destagger(estimates, subcarriers, scs_hz: float) -> ChannelEstimateGrid:
    """Interleave the active tones of the PRS symbols of each occasion.

    ``estimates[l]`` has shape (chain, occasion, |K_l|) on subcarriers
    ``subcarriers[l]``. Tones are placed on the coarsest uniform lattice that
    contains them all; a tone measured by several symbols is averaged.
    """
    ks = [np.asarray(k) for k in subcarriers]
    allk = np.unique(np.concatenate(ks))
    step = 0
    for d in np.diff(allk):
        step = gcd(step, int(d))
    step = max(step, 1)
    k0 = int(allk[0])
    n = (int(allk[-1]) - k0) // step + 1
    shape = estimates[0].shape[:-1] + (n,)
    acc = np.zeros(shape, dtype=np.complex128)
    hits = np.zeros(n, dtype=int)
    for est, k in zip(estimates, ks):
        j = (k - k0) // step
        dj = np.unique(np.diff(j))
        # Comb tones are evenly spaced, so a strided slice avoids a fancy-index gather.
        idx = slice(int(j[0]), int(j[-1]) + 1, int(dj[0])) if dj.size == 1 else j
        acc[..., idx] += est
        hits[idx] += 1
    if np.any(hits > 1):
        acc[..., hits > 1] /= hits[hits > 1]
    return ChannelEstimateGrid(acc, k0 + step * np.arange(n), step * scs_hz)


def next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def range_profile(grid: ChannelEstimateGrid, n_r: int | None = None, win: str = "hann",
                  max_range_m: float | None = None) -> RangeProfile:
    """Windowed N_R-point IFFT across tones, scaled by 1/sqrt(N_R).

    Bins beyond ``max_range_m`` are dropped after the transform.
    """
    n_tones = grid.n_tones
    if n_r is None or n_r == 0:
        n_r = next_pow2(n_tones)
    if n_r < n_tones:
        raise ValueError(f"n_r={n_r} smaller than the {n_tones} destaggered tones")
    w = window(win, n_tones)
    r = np.fft.ifft(grid.estimates * w, n=n_r, axis=-1) * np.sqrt(n_r)
    per_bin = SPEED_OF_LIGHT / (2 * n_r * grid.tone_spacing_hz)
    if max_range_m is not None:
        keep = min(n_r, int(np.floor(max_range_m / per_bin)) + 1)
        r = r[..., :keep]
    return RangeProfile(r, n_r, per_bin)


def suppress_static(profile: RangeProfile) -> RangeProfile:
    """Subtract the slow-time mean of every (chain, range bin)."""
    if profile.data.shape[1] < 2:
        raise ValueError("static suppression needs at least two occasions")
    d = profile.data - profile.data.mean(axis=1, keepdims=True)
    return RangeProfile(d, profile.n_r, profile.range_per_bin)


def doppler_map(profile: RangeProfile, n_d: int | None, win: str, wavelength: float,
                prs_period_s: float) -> RangeDopplerCube:
    """Windowed N_D-point FFT over occasions, fft-shifted, plus noncoherent power."""
    m = profile.data.shape[1]
    if n_d is None or n_d == 0:
        n_d = m
    if n_d < m:
        raise ValueError("n_d must be at least the number of occasions")
    w = window(win, m)
    x = np.fft.fft(profile.data * w[None, :, None], n=n_d, axis=1) / np.sqrt(n_d)
    x = np.fft.fftshift(x, axes=1).transpose(0, 2, 1)
    power = np.einsum("inv,inv->nv", x, x.conj()).real
    return RangeDopplerCube(
        maps=x,
        power=power,
        n_r=profile.n_r,
        n_d=n_d,
        range_per_bin=profile.range_per_bin,
        velocity_per_bin=wavelength / (2 * n_d * prs_period_s),
    )


def _ring_kernel(guard, training) -> np.ndarray:
    (gr, gd), (tr, td) = guard, training
    k = np.ones((2 * (gr + tr) + 1, 2 * (gd + td) + 1))
    k[tr:tr + 2 * gr + 1, td:td + 2 * gd + 1] = 0.0
    return k


def cfar_noise(power: np.ndarray, cfg: CfarConfig) -> tuple[np.ndarray, np.ndarray]:
    """Training-ring mean and cell count per CUT; the ring is clipped at the map edges."""
    k = _ring_kernel(cfg.guard, cfg.training)
    total = ndimage.correlate(power, k, mode="constant", cval=0.0)
    count = ndimage.correlate(np.ones_like(power), k, mode="constant", cval=0.0)
    return total / np.maximum(count, 1.0), count


def cfar_mask(power: np.ndarray, cfg: CfarConfig, noise: np.ndarray | None = None) -> np.ndarray:
    if noise is None:
        noise, _ = cfar_noise(power, cfg)
    return (power > cfg.threshold_lin * noise) & (power > 0)


def non_max_suppression(cells: np.ndarray, powers: np.ndarray, radius: tuple[int, int]) -> np.ndarray:
    """Greedy NMS: strongest first, drop anything within ``radius`` of a kept cell.

    Returns indices into ``cells`` of the survivors, strongest first.
    """
    cells = np.asarray(cells, dtype=int).reshape(-1, 2)
    if cells.shape[0] == 0:
        return np.zeros(0, dtype=int)
    order = np.argsort(-np.asarray(powers), kind="stable")
    rr, rd = radius
    blocked = np.zeros(tuple(cells.max(axis=0) + 1), dtype=bool)
    kept: list[int] = []
    for i in order:
        n, v = cells[i]
        if blocked[n, v]:
            continue
        kept.append(int(i))
        blocked[max(n - rr, 0):n + rr + 1, max(v - rd, 0):v + rd + 1] = True
    return np.array(kept, dtype=int)


def cfar_detect(power, cfg: CfarConfig, noise: np.ndarray | None = None) -> list[CfarHit]:
    """2D CA-CFAR followed by NMS on a noncoherent power map (or cube).

    The map is expected fft-shifted along Doppler (zero velocity in column n_d // 2).
    """
    if isinstance(power, RangeDopplerCube):
        power = power.power
    if not np.any(power):
        return []
    if noise is None:
        noise, _ = cfar_noise(power, cfg)
    mask = cfar_mask(power, cfg, noise)
    if cfg.doppler_notch >= 0:
        dc = power.shape[1] // 2
        mask[:, max(dc - cfg.doppler_notch, 0):dc + cfg.doppler_notch + 1] = False
    cells = np.argwhere(mask)
    if cells.size == 0:
        return []
    pw = power[mask]
    kept = non_max_suppression(cells, pw, cfg.nms_radius)
    return [CfarHit(int(cells[i, 0]), int(cells[i, 1]), float(pw[i]), float(noise[tuple(cells[i])]))
            for i in kept]


def beamspace_spectrum(snapshot: np.ndarray, grid_shape: tuple[int, int], fft_size: int,
                       win: str = "hamming") -> np.ndarray:
    """|FFT2(W * X_grid)|^2, indexed (vertical bin, horizontal bin)."""
    rows, cols = grid_shape
    x = np.asarray(snapshot).reshape(rows, cols)
    w = np.outer(window(win, rows), window(win, cols))
    return np.abs(np.fft.fft2(w * x, s=(fft_size, fft_size))) ** 2


def fft_spatial_freqs(fft_size: int, spacing: float) -> np.ndarray:
    """Direction cosine probed by each FFT bin for element spacing ``spacing``."""
    q = np.arange(fft_size)
    q = np.where(q >= fft_size // 2, q - fft_size, q)
    return q / (fft_size * spacing)


def uv_to_angles(u_h, u_v):
    """Local (az, el) in degrees from horizontal/vertical direction cosines."""
    u_v = np.clip(u_v, -1.0, 1.0)
    el = np.arcsin(u_v)
    s = np.clip(np.asarray(u_h) / np.maximum(np.cos(el), 1e-12), -1.0, 1.0)
    return np.rad2deg(np.arcsin(s)), np.rad2deg(el)


def _check_half_wavelength(arch: RxArchitecture) -> None:
    if not np.allclose(arch.grid_spacing, (0.5, 0.5), atol=1e-9):
        raise ValueError(
            f"beamspace FFT needs a half-wavelength aperture, got spacing {arch.grid_spacing}; use bartlett"
        )


def aoa_fft(snapshot: np.ndarray, arch: RxArchitecture, fft_size: int = 128,
            win: str = "hamming") -> tuple[float, float]:
    """Beamspace FFT angle estimate, returned as local (az, el) in degrees."""
    _check_half_wavelength(arch)
    spec = beamspace_spectrum(snapshot, arch.grid_shape, fft_size, win)
    p, q = np.unravel_index(int(np.argmax(spec)), spec.shape)
    u = fft_spatial_freqs(fft_size, 0.5)
    az, el = uv_to_angles(u[q], u[p])
    return float(az), float(el)


def bartlett_spectrum(snapshot: np.ndarray, steering: np.ndarray) -> np.ndarray:
    """|a^H X|^2 over the leading axes of ``steering`` (..., N_RF)."""
    return np.abs(steering.conj() @ np.asarray(snapshot)) ** 2


def aoa_bartlett(snapshot: np.ndarray, steering: np.ndarray, az_grid, el_grid) -> tuple[float, float]:
    """Grid-search maximiser of the Bartlett spectrum.

    ``steering`` has shape (len(el_grid), len(az_grid), N_RF). Exact ties go
    to the smallest |az|, then the smallest |el|.
    """
    az_grid = np.asarray(az_grid, dtype=float)
    el_grid = np.asarray(el_grid, dtype=float)
    if az_grid.size == 0 or el_grid.size == 0:
        raise ValueError("empty Bartlett search grid")
    spec = bartlett_spectrum(snapshot, steering)
    ie, ia = np.nonzero(spec == spec.max())
    best = min(zip(ie, ia), key=lambda t: (abs(az_grid[t[1]]), abs(el_grid[t[0]])))
    return float(az_grid[best[1]]), float(el_grid[best[0]])


class BartlettScanner:
    """Unit-norm effective steering table over a local (az, el) grid for one architecture."""

    def __init__(self, array: ArrayConfig, arch: RxArchitecture, half_width_deg: float,
                 step_deg: float = 1.0, el_limits=(-10.0, 90.0)):
        self.az = np.arange(-half_width_deg, half_width_deg + step_deg / 2, step_deg)
        self.el = np.arange(el_limits[0], el_limits[1] + step_deg / 2, step_deg)
        ee, aa = np.meshgrid(self.el, self.az, indexing="ij")
        a = arch.combine(local_steering(aa, ee, array))
        # Normalised Bartlett: the element pattern makes steering norms angle dependent.
        self.steering = a / np.linalg.norm(a, axis=-1, keepdims=True)

    def __call__(self, snapshot):
        return aoa_bartlett(snapshot, self.steering, self.az, self.el)


def localize(range_m: float, az_local: float, el_local: float, array: ArrayConfig, trp,
             half_width_deg: float) -> tuple[float, float, np.ndarray] | None:
    """p = p_TRP + R u(az, el) in the global frame; None if sector-gated."""
    if abs(wrap_deg(az_local)) > half_width_deg + 1e-9:
        return None
    az, el = to_global(az_local, el_local, array)
    pos = np.asarray(trp, dtype=float) + range_m * direction(float(az), float(el))
    if pos[2] < 0:
        return None
    return float(az), float(el), pos


def _parabolic(y_m, y_0, y_p) -> float:
    den = y_m - 2 * y_0 + y_p
    return 0.0 if den == 0 else float(np.clip(0.5 * (y_m - y_p) / den, -0.5, 0.5))


def extract_detections(cube: RangeDopplerCube, cfar: CfarConfig, rx: RxConfig, array: ArrayConfig,
                       arch: RxArchitecture, trp, half_width_deg: float,
                       noise: np.ndarray | None = None,
                       scanner: BartlettScanner | None = None) -> tuple[list[Detection], int]:
    """CFAR + NMS + AoA + positioning. Returns (detections, number sector-gated)."""
    hits = cfar_detect(cube.power, cfar, noise)
    if rx.aoa_method == "bartlett" and scanner is None and arch.kind != "analog":
        scanner = BartlettScanner(array, arch, half_width_deg, rx.bartlett_step_deg, rx.bartlett_el_limits_deg)
    dets: list[Detection] = []
    gated = 0
    p = cube.power
    for h in hits:
        snap = cube.maps[:, h.n, h.col]
        if arch.kind == "analog":
            az_l, el_l = (float(a) for a in arch.beam_angles[arch.beam_index])
        elif rx.aoa_method == "fft":
            az_l, el_l = aoa_fft(snap, arch, rx.aoa_fft_size, rx.spatial_window)
        else:
            az_l, el_l = scanner(snap)
        n_f, c_f = float(h.n), float(h.col)
        if rx.interpolate:
            if 0 < h.n < p.shape[0] - 1:
                n_f += _parabolic(p[h.n - 1, h.col], p[h.n, h.col], p[h.n + 1, h.col])
            if 0 < h.col < p.shape[1] - 1:
                c_f += _parabolic(p[h.n, h.col - 1], p[h.n, h.col], p[h.n, h.col + 1])
        rng_m = float(cube.range_m(n_f))
        loc = localize(rng_m, az_l, el_l, array, trp, half_width_deg)
        if loc is None:
            gated += 1
            continue
        az, el, pos = loc
        dets.append(Detection(
            range_m=rng_m,
            radial_velocity_mps=float(cube.velocity_mps(c_f)),
            az_deg=az,
            el_deg=el,
            position=pos,
            peak_power=h.power,
            snr_proxy_db=float(lin2db(h.power / h.noise)) if h.noise > 0 else float("inf"),
            rd_bin=(h.n, h.col - cube.n_d // 2),
        ))
    return dets, gated
