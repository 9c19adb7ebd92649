"""URA geometry, TR 38.901 element pattern, steering vectors and RX combining.

Angle convention: azimuth is measured from the x-axis towards y, elevation
from the horizontal plane, so the unit direction is
``u = (cos az cos el, sin az cos el, sin el)``. The array lies in the local
y-z plane and faces the local x-axis; element (row, col) sits at
``(0, col * dh, row * dv)`` wavelengths. Element index is ``row * n_cols + col``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from nrsense.units import db2lin

ARCHITECTURES = ("full_digital", "hybrid", "analog")


@dataclass(frozen=True)
class ArrayConfig:
    n_rows: int = 8
    n_cols: int = 8
    dh: float = 0.5
    dv: float = 0.5
    boresight_yaw_deg: float = 30.0
    mech_tilt_deg: float = 0.0
    element_gain_dbi: float = 8.0
    beamwidth_az_deg: float = 65.0
    beamwidth_el_deg: float = 65.0
    sla_db: float = 30.0
    am_db: float = 30.0

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("array needs at least one element")
        if self.dh <= 0 or self.dv <= 0:
            raise ValueError("element spacings must be positive")
        for bw in (self.beamwidth_az_deg, self.beamwidth_el_deg):
            if not 0 < bw < 180:
                raise ValueError("beamwidths must lie in (0, 180) deg")

    @property
    def n_elements(self) -> int:
        return self.n_rows * self.n_cols

    def element_rows_cols(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(self.n_elements)
        return idx // self.n_cols, idx % self.n_cols

    def rotation(self) -> np.ndarray:
        """Local-to-global rotation: yaw about z after downtilt about y."""
        psi = np.deg2rad(self.boresight_yaw_deg)
        beta = np.deg2rad(self.mech_tilt_deg)
        rz = np.array([[np.cos(psi), -np.sin(psi), 0], [np.sin(psi), np.cos(psi), 0], [0, 0, 1]])
        ry = np.array([[np.cos(beta), 0, np.sin(beta)], [0, 1, 0], [-np.sin(beta), 0, np.cos(beta)]])
        return rz @ ry


def direction(az_deg, el_deg) -> np.ndarray:
    az = np.deg2rad(np.asarray(az_deg, dtype=float))
    el = np.deg2rad(np.asarray(el_deg, dtype=float))
    return np.stack([np.cos(az) * np.cos(el), np.sin(az) * np.cos(el), np.sin(el)], axis=-1)


def angles(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    az = np.rad2deg(np.arctan2(u[..., 1], u[..., 0]))
    el = np.rad2deg(np.arcsin(np.clip(u[..., 2], -1.0, 1.0)))
    return az, el


def wrap_deg(a):
    return (np.asarray(a, dtype=float) + 180.0) % 360.0 - 180.0


def to_local(az_deg, el_deg, cfg: ArrayConfig):
    if cfg.mech_tilt_deg == 0.0:
        return wrap_deg(np.asarray(az_deg) - cfg.boresight_yaw_deg), np.asarray(el_deg, dtype=float)
    u = direction(az_deg, el_deg) @ cfg.rotation()  # R^T u, row-vector form
    return angles(u)


def to_global(az_deg, el_deg, cfg: ArrayConfig):
    if cfg.mech_tilt_deg == 0.0:
        return wrap_deg(np.asarray(az_deg) + cfg.boresight_yaw_deg), np.asarray(el_deg, dtype=float)
    u = direction(az_deg, el_deg) @ cfg.rotation().T
    return angles(u)


def element_pattern_db(az_deg, el_deg, cfg: ArrayConfig):
    """TR 38.901 directional element gain (dBi) at local angles."""
    az = wrap_deg(az_deg)
    el = np.asarray(el_deg, dtype=float)
    a_h = np.minimum(12.0 * (az / cfg.beamwidth_az_deg) ** 2, cfg.am_db)
    a_v = np.minimum(12.0 * (el / cfg.beamwidth_el_deg) ** 2, cfg.sla_db)
    return cfg.element_gain_dbi - np.minimum(a_h + a_v, cfg.am_db)


def local_steering(az_deg, el_deg, cfg: ArrayConfig, *, pattern: bool = True) -> np.ndarray:
    """Array response at local angles; shape ``angles.shape + (N,)``."""
    az = np.deg2rad(np.asarray(az_deg, dtype=float))
    el = np.deg2rad(np.asarray(el_deg, dtype=float))
    u_h = np.sin(az) * np.cos(el)
    u_v = np.sin(el)
    rows, cols = cfg.element_rows_cols()
    phase = 2 * np.pi * (cfg.dh * cols * u_h[..., None] + cfg.dv * rows * u_v[..., None])
    a = np.exp(1j * phase)
    if pattern:
        amp = np.sqrt(db2lin(element_pattern_db(np.rad2deg(az), np.rad2deg(el), cfg)))
        a = a * amp[..., None]
    return a


def steering_vector(az_deg, el_deg, cfg: ArrayConfig, *, pattern: bool = True) -> np.ndarray:
    """Array response for global angles, weighted by the element amplitude pattern."""
    laz, lel = to_local(az_deg, el_deg, cfg)
    return local_steering(laz, lel, cfg, pattern=pattern)


@dataclass(frozen=True)
class RxArchitecture:
    kind: str
    w_rf: np.ndarray = field(repr=False)
    subarray_map: np.ndarray | None = field(default=None, repr=False)
    codebook: np.ndarray | None = field(default=None, repr=False)
    beam_index: int | None = None
    beam_angles: np.ndarray | None = field(default=None, repr=False)
    grid_shape: tuple[int, int] = (1, 1)
    grid_spacing: tuple[float, float] = (0.5, 0.5)

    @property
    def n_rf(self) -> int:
        return self.w_rf.shape[1]

    def combine(self, a: np.ndarray) -> np.ndarray:
        """W_RF^H a along the last axis."""
        if self.kind == "full_digital":
            return a
        return a @ self.w_rf.conj()


def make_rx_architecture(kind: str, cfg: ArrayConfig, *, beam_index: int | None = None,
                         n_beams: int = 13, sector_half_width_deg: float = 60.0) -> RxArchitecture:
    """Build W_RF for a full-digital, hybrid (2x1 vertical subarrays) or analog receiver.

    ``grid_shape``/``grid_spacing`` describe the effective aperture seen at
    baseband as (rows, cols) and (vertical, horizontal) spacing in wavelengths.
    """
    n = cfg.n_elements
    if kind == "full_digital":
        return RxArchitecture(kind, np.eye(n, dtype=np.complex128),
                              grid_shape=(cfg.n_rows, cfg.n_cols), grid_spacing=(cfg.dv, cfg.dh))
    if kind == "hybrid":
        if cfg.n_rows % 2:
            raise ValueError("hybrid subarrays pair vertical neighbours; n_rows must be even")
        rows, cols = cfg.element_rows_cols()
        chain = (rows // 2) * cfg.n_cols + cols
        w = np.zeros((n, n // 2), dtype=np.complex128)
        w[np.arange(n), chain] = 1 / np.sqrt(2)
        return RxArchitecture(kind, w, subarray_map=chain,
                              grid_shape=(cfg.n_rows // 2, cfg.n_cols), grid_spacing=(2 * cfg.dv, cfg.dh))
    if kind == "analog":
        az = np.linspace(-sector_half_width_deg, sector_half_width_deg, n_beams)
        codebook = local_steering(az, np.zeros_like(az), cfg, pattern=False).T / np.sqrt(n)
        if beam_index is None:
            beam_index = n_beams // 2
        w = codebook[:, [beam_index]]
        beams = np.stack([az, np.zeros_like(az)], axis=-1)
        return RxArchitecture(kind, w, codebook=codebook, beam_index=beam_index, beam_angles=beams,
                              grid_shape=(1, 1), grid_spacing=(cfg.dv, cfg.dh))
    raise ValueError(f"unknown architecture {kind!r}; expected one of {ARCHITECTURES}")


def quasi_omni_precoder(cfg: ArrayConfig) -> np.ndarray:
    """Single-element precoder e_1: the beam is exactly the element pattern."""
    f = np.zeros(cfg.n_elements, dtype=np.complex128)
    f[0] = 1.0
    return f


def effective_steering(az_deg, el_deg, cfg: ArrayConfig, arch: RxArchitecture) -> np.ndarray:
    """Steering seen after analog combining, for global angles."""
    return arch.combine(steering_vector(az_deg, el_deg, cfg))
