"""PRS resource grid: Gold-sequence QPSK pilots on a staggered subcarrier comb.

The simulator never leaves the frequency domain. Under an ideal CP-OFDM link
(delay spread inside the cyclic prefix) per-RE multiplication by the channel
frequency response is exact, so IFFT/CP synthesis is skipped.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from nrsense.units import SPEED_OF_LIGHT, dbm2watt

GOLD_NC = 1600
_GOLD_DEGREE = 31

# Per-symbol RE offsets for L_PRS = K (TS 38.211 PRS comb staggering). Shorter
# occasions use the leading entries; longer ones cycle.
COMB_OFFSETS = {
    2: (0, 1),
    4: (0, 2, 1, 3),
    6: (0, 3, 1, 4, 2, 5),
    12: (0, 6, 3, 9, 1, 7, 4, 10, 2, 8, 5, 11),
}

# 52 dBm total spread evenly over the 1632 active REs of a 272-PRB comb-2 symbol.
DEFAULT_TX_POWER_DBM = 52.0 - 10.0 * np.log10(3264 / 2)


@dataclass(frozen=True)
class PrsConfig:
    carrier_freq_hz: float = 4.0e9
    scs_hz: float = 30.0e3
    n_subcarriers: int = 3264
    comb_size: int = 2
    n_prs_symbols: int = 2
    prs_period_s: float = 1.0e-3
    n_cpi: int = 128
    tx_power_dbm: float = float(DEFAULT_TX_POWER_DBM)
    gold_seed: int = 0

    def __post_init__(self):
        if self.comb_size not in COMB_OFFSETS:
            raise ValueError(f"comb_size must be one of {sorted(COMB_OFFSETS)}, got {self.comb_size}")
        if self.n_subcarriers <= 0:
            raise ValueError("n_subcarriers must be positive")
        if self.scs_hz <= 0:
            raise ValueError("scs_hz must be positive")
        if self.n_prs_symbols < 1 or self.n_prs_symbols > 14:
            raise ValueError("n_prs_symbols must be in [1, 14]")
        if self.n_cpi < 1:
            raise ValueError("n_cpi must be >= 1")
        if self.prs_period_s <= 0:
            raise ValueError("prs_period_s must be positive")
        if not 0 <= self.gold_seed < 2**31:
            raise ValueError("gold_seed must fit in 31 bits")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def bandwidth_hz(self) -> float:
        return self.n_subcarriers * self.scs_hz

    @property
    def cpi_duration_s(self) -> float:
        return self.n_cpi * self.prs_period_s

    @property
    def numerology(self) -> int:
        return int(round(np.log2(self.scs_hz / 15e3)))

    @property
    def symbol_duration_s(self) -> float:
        """Average OFDM symbol duration incl. normal CP (14 symbols per slot)."""
        return 1e-3 / (14 * 2**self.numerology)

    @property
    def tx_power_w(self) -> float:
        return float(dbm2watt(self.tx_power_dbm))

    def comb_offsets(self) -> tuple[int, ...]:
        base = COMB_OFFSETS[self.comb_size]
        return tuple(base[l % self.comb_size] for l in range(self.n_prs_symbols))

    def active_subcarriers(self, symbol: int) -> np.ndarray:
        off = self.comb_offsets()[symbol]
        return np.arange(off, self.n_subcarriers, self.comb_size)

    def subcarrier_freqs(self) -> np.ndarray:
        """Baseband frequency of every subcarrier, centred on the carrier."""
        return (np.arange(self.n_subcarriers) - self.n_subcarriers // 2) * self.scs_hz

    def re_time(self, symbol, occasion):
        """Absolute start time (s) of PRS symbol ``symbol`` in occasion ``occasion``."""
        return np.asarray(occasion) * self.prs_period_s + np.asarray(symbol) * self.symbol_duration_s


def _lfsr(state: np.ndarray, taps: tuple[int, ...], total: int) -> np.ndarray:
    """Run a length-31 Fibonacci LFSR for ``total`` outputs.

    ``state`` has shape (batch, 31) holding x(0..30); returns (batch, total).
    """
    out = np.zeros((state.shape[0], total + _GOLD_DEGREE), dtype=np.uint8)
    out[:, :_GOLD_DEGREE] = state
    for n in range(total):
        acc = out[:, n + taps[0]].copy()
        for t in taps[1:]:
            acc ^= out[:, n + t]
        out[:, n + _GOLD_DEGREE] = acc
    return out[:, :total]


def _init_bits(inits: np.ndarray) -> np.ndarray:
    shifts = np.arange(_GOLD_DEGREE, dtype=np.int64)
    return ((inits[:, None] >> shifts) & 1).astype(np.uint8)


@lru_cache(maxsize=8)
def _x1_stream(total: int) -> np.ndarray:
    state = np.zeros((1, _GOLD_DEGREE), dtype=np.uint8)
    state[0, 0] = 1
    return _lfsr(state, (3, 0), total)[0]


def gold_sequences(inits, length: int) -> np.ndarray:
    """Length-31 Gold sequences c(n), n < length, for a batch of initialisers."""
    inits = np.atleast_1d(np.asarray(inits, dtype=np.int64))
    if length < 1:
        raise ValueError("length must be >= 1")
    if np.any(inits < 0) or np.any(inits >= 2**31):
        raise ValueError("Gold init must fit in 31 bits")
    total = length + GOLD_NC
    x1 = _x1_stream(total)
    x2 = _lfsr(_init_bits(inits), (3, 2, 1, 0), total)
    return (x1[None, GOLD_NC:] ^ x2[:, GOLD_NC:]).astype(np.uint8)


def gold_sequence(init: int, length: int) -> np.ndarray:
    """NR length-31 Gold pseudo-random sequence c(n) (TS 38.211)."""
    return gold_sequences([init], length)[0]


def qpsk(bits: np.ndarray) -> np.ndarray:
    b = np.asarray(bits, dtype=float).reshape(*np.shape(bits)[:-1], -1, 2)
    return ((1 - 2 * b[..., 0]) + 1j * (1 - 2 * b[..., 1])) / np.sqrt(2)


def symbol_init(gold_seed: int, symbol: int, occasion: int, cfg: PrsConfig) -> int:
    """Per-symbol Gold initialiser, following the NR PRS c_init formula.

    Each occasion is placed at the start of a slot; the slot number wraps with
    the 10 ms frame so sequences repeat frame to frame as on air.
    """
    slots_per_frame = 10 * 2**cfg.numerology
    slot_dur = 1e-3 / 2**cfg.numerology
    slot = int(round(occasion * cfg.prs_period_s / slot_dur)) % slots_per_frame
    nid_hi, nid_lo = divmod(gold_seed % 4096, 1024)
    c = (2**22) * nid_hi + (2**10) * (14 * slot + symbol + 1) * (2 * nid_lo + 1) + nid_lo
    return c % 2**31


@dataclass(frozen=True)
class PrsGrid:
    """Frequency-domain PRS grid indexed ``[k, l, m]`` (subcarrier, symbol, occasion)."""

    cfg: PrsConfig
    symbols: np.ndarray = field(repr=False)
    active_mask: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.symbols.shape

    def active_symbols(self, symbol: int) -> np.ndarray:
        """Symbols on the active tones of PRS symbol ``symbol``, shape (M, |K_l|)."""
        k = self.cfg.active_subcarriers(symbol)
        return self.symbols[k, symbol, :].T

    def dump(self, path) -> tuple[Path, Path]:
        """Write a little-endian complex64 raster plus a JSON sidecar."""
        path = Path(path)
        raster = path.with_suffix(".bin")
        self.symbols.astype("<c8").tofile(raster)
        meta = {
            "dtype": "complex64",
            "byteorder": "little",
            "shape": list(self.symbols.shape),
            "index_order": ["k", "l", "m"],
            "config": asdict(self.cfg),
        }
        sidecar = path.with_suffix(".json")
        sidecar.write_text(json.dumps(meta, indent=2))
        return raster, sidecar


@lru_cache(maxsize=16)
def build_prs_grid(cfg: PrsConfig) -> PrsGrid:
    n_sc, n_l, n_m = cfg.n_subcarriers, cfg.n_prs_symbols, cfg.n_cpi
    symbols = np.zeros((n_sc, n_l, n_m), dtype=np.complex128)
    mask = np.zeros((n_sc, n_l, n_m), dtype=bool)

    keys = [(l, m) for m in range(n_m) for l in range(n_l)]
    inits = np.array([symbol_init(cfg.gold_seed, l, m, cfg) for l, m in keys], dtype=np.int64)
    uniq, inverse = np.unique(inits, return_inverse=True)
    n_active_max = -(-n_sc // cfg.comb_size)
    seqs = gold_sequences(uniq, 2 * n_active_max)
    qp = qpsk(seqs)

    for (l, m), idx in zip(keys, inverse):
        k = cfg.active_subcarriers(l)
        symbols[k, l, m] = qp[idx, : k.size]
        mask[k, l, m] = True
    symbols.setflags(write=False)
    mask.setflags(write=False)
    return PrsGrid(cfg=cfg, symbols=symbols, active_mask=mask)


def tx_vector(grid_symbol: complex, precoder: np.ndarray, tx_power_dbm: float) -> np.ndarray:
    """Transmitted array signal sqrt(P_TX) f s for one RE."""
    f = np.asarray(precoder, dtype=np.complex128)
    if abs(np.linalg.norm(f) - 1.0) > 1e-9:
        raise ValueError("precoder must have unit 2-norm")
    return np.sqrt(dbm2watt(tx_power_dbm)) * f * grid_symbol
