import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nrsense.prs import (
    COMB_OFFSETS,
    DEFAULT_TX_POWER_DBM,
    PrsConfig,
    build_prs_grid,
    gold_sequence,
    gold_sequences,
    qpsk,
    symbol_init,
    tx_vector,
)

# First 32 output bits for a few initialisers, produced by a stand-alone
# pure-Python run of the length-31 Gold recurrence (Nc = 1600).
GOLD_REFERENCE = {
    0: "00000010000110100001001001111010",
    1: "00000010100000110000001101110100",
    2**31 - 1: "11111101000010111111001110001110",
    123456: "10100010001010001010001101010000",
}


def _bits(s):
    return np.array([int(c) for c in s], dtype=np.uint8)


@pytest.mark.parametrize("init", sorted(GOLD_REFERENCE))
def test_gold_matches_reference_bits(init):
    np.testing.assert_array_equal(gold_sequence(init, 32), _bits(GOLD_REFERENCE[init]))


def test_gold_rejects_out_of_range_init():
    with pytest.raises(ValueError):
        gold_sequence(2**31, 8)
    with pytest.raises(ValueError):
        gold_sequence(-1, 8)


@given(st.lists(st.integers(0, 2**31 - 1), min_size=1, max_size=5), st.integers(1, 64))
def test_gold_batch_equals_single(inits, length):
    batch = gold_sequences(inits, length)
    for row, c in zip(batch, inits):
        np.testing.assert_array_equal(row, gold_sequence(c, length))


def test_gold_prefix_is_stable():
    long = gold_sequence(777, 200)
    np.testing.assert_array_equal(gold_sequence(777, 50), long[:50])


@given(st.lists(st.integers(0, 1), min_size=2, max_size=40).filter(lambda b: len(b) % 2 == 0))
def test_qpsk_unit_modulus(bits):
    sym = qpsk(np.array(bits))
    np.testing.assert_allclose(np.abs(sym), 1.0, atol=1e-12)
    assert sym.size == len(bits) // 2


def test_qpsk_mapping():
    sym = qpsk(np.array([0, 0, 0, 1, 1, 0, 1, 1]))
    expected = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)
    np.testing.assert_allclose(sym, expected)


def test_default_power_is_52_dbm_over_active_res():
    total = DEFAULT_TX_POWER_DBM + 10 * np.log10(1632)
    assert total == pytest.approx(52.0, abs=1e-12)


@pytest.mark.parametrize("k", sorted(COMB_OFFSETS))
def test_full_staggering_covers_every_subcarrier_once(k):
    cfg = PrsConfig(n_subcarriers=96, comb_size=k, n_prs_symbols=k, n_cpi=2)
    grid = build_prs_grid(cfg)
    per_sc = grid.active_mask[:, :, 0].sum(axis=1)
    np.testing.assert_array_equal(per_sc, np.ones(96))


@given(st.sampled_from(sorted(COMB_OFFSETS)), st.integers(1, 14), st.integers(1, 4))
def test_grid_activity_and_modulus(k, n_sym, n_cpi):
    cfg = PrsConfig(n_subcarriers=48, comb_size=k, n_prs_symbols=n_sym, n_cpi=n_cpi)
    grid = build_prs_grid(cfg)
    assert grid.shape == (48, n_sym, n_cpi)
    # each symbol occupies exactly every k-th subcarrier
    assert np.all(grid.active_mask.sum(axis=0) == 48 // k)
    np.testing.assert_allclose(np.abs(grid.symbols[grid.active_mask]), 1.0, atol=1e-12)
    assert not np.any(grid.symbols[~grid.active_mask])


def test_grid_is_read_only():
    grid = build_prs_grid(PrsConfig(n_subcarriers=24, n_cpi=2))
    with pytest.raises(ValueError):
        grid.symbols[0, 0, 0] = 0


def test_occasions_use_distinct_sequences():
    grid = build_prs_grid(PrsConfig(n_subcarriers=64, n_cpi=3))
    a, b = grid.active_symbols(0)[0], grid.active_symbols(0)[1]
    assert not np.allclose(a, b)


def test_symbol_init_follows_slot_and_symbol():
    cfg = PrsConfig()
    # 30 kHz: 20 slots per frame, 1 ms period -> occasion m sits in slot 2m
    c = symbol_init(0, 1, 3, cfg)
    assert c == (2**10) * (14 * 6 + 1 + 1) * 1
    assert symbol_init(0, 0, 10, cfg) == symbol_init(0, 0, 0, cfg)  # frame wrap


def test_config_validation():
    with pytest.raises(ValueError):
        PrsConfig(comb_size=3)
    with pytest.raises(ValueError):
        PrsConfig(n_prs_symbols=0)
    with pytest.raises(ValueError):
        PrsConfig(n_cpi=0)


def test_derived_quantities():
    cfg = PrsConfig()
    assert cfg.wavelength == pytest.approx(0.0749481145, rel=1e-9)
    assert cfg.bandwidth_hz == pytest.approx(97.92e6)
    assert cfg.cpi_duration_s == pytest.approx(0.128)


def test_tx_vector_requires_unit_precoder():
    f = np.zeros(4, complex)
    f[0] = 1
    x = tx_vector(1 + 0j, f, 30.0)
    assert np.abs(x[0]) ** 2 == pytest.approx(1.0)
    with pytest.raises(ValueError):
        tx_vector(1, 2 * f, 30.0)


def test_dump_round_trip(tmp_path):
    cfg = PrsConfig(n_subcarriers=12, n_cpi=2)
    grid = build_prs_grid(cfg)
    raster, sidecar = grid.dump(tmp_path / "prs")
    meta = json.loads(sidecar.read_text())
    back = np.fromfile(raster, dtype="<c8").reshape(meta["shape"])
    np.testing.assert_allclose(back, grid.symbols, atol=1e-7)
    assert meta["index_order"] == ["k", "l", "m"]
