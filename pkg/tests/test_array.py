import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nrsense.array import (
    ArrayConfig,
    angles,
    direction,
    effective_steering,
    element_pattern_db,
    local_steering,
    make_rx_architecture,
    quasi_omni_precoder,
    steering_vector,
    to_global,
    to_local,
)

az_s = st.floats(-179.0, 179.0)
el_s = st.floats(-89.0, 89.0)


def test_pattern_peak_and_floor():
    cfg = ArrayConfig()
    assert element_pattern_db(0.0, 0.0, cfg) == pytest.approx(8.0)
    # 3 dB points sit at half the beamwidth
    assert element_pattern_db(32.5, 0.0, cfg) == pytest.approx(5.0)
    assert element_pattern_db(0.0, 32.5, cfg) == pytest.approx(5.0)
    assert element_pattern_db(180.0, 0.0, cfg) == pytest.approx(8.0 - 30.0)


@given(az_s, el_s)
def test_pattern_bounded(az, el):
    g = element_pattern_db(az, el, ArrayConfig())
    assert -22.0 - 1e-9 <= g <= 8.0 + 1e-9


@given(az_s, el_s)
def test_direction_angles_round_trip(az, el):
    a, e = angles(direction(az, el))
    assert e == pytest.approx(el, abs=1e-9)
    if abs(el) < 89:
        assert (a - az + 180) % 360 - 180 == pytest.approx(0.0, abs=1e-7)


@given(az_s, st.floats(-80.0, 80.0), st.floats(-180, 180), st.floats(-20, 20))
def test_local_global_round_trip(az, el, yaw, tilt):
    cfg = ArrayConfig(boresight_yaw_deg=yaw, mech_tilt_deg=tilt)
    la, le = to_local(az, el, cfg)
    ga, ge = to_global(la, le, cfg)
    np.testing.assert_allclose(direction(ga, ge), direction(az, el), atol=1e-9)


def test_boresight_maps_to_local_zero():
    cfg = ArrayConfig(boresight_yaw_deg=30.0)
    la, le = to_local(30.0, 0.0, cfg)
    assert float(la) == pytest.approx(0.0) and float(le) == pytest.approx(0.0)


def test_rotation_is_orthonormal():
    r = ArrayConfig(boresight_yaw_deg=17, mech_tilt_deg=6).rotation()
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0)


def test_steering_phase_progression():
    cfg = ArrayConfig(n_rows=2, n_cols=3)
    a = local_steering(30.0, 0.0, cfg, pattern=False)
    # horizontal neighbours differ by pi sin(30 deg) = pi / 2
    np.testing.assert_allclose(a[1] / a[0], np.exp(1j * np.pi / 2), atol=1e-12)
    np.testing.assert_allclose(a[3], a[0], atol=1e-12)  # el = 0: rows identical


@given(az_s, el_s)
def test_steering_amplitude_is_element_gain(az, el):
    cfg = ArrayConfig(n_rows=2, n_cols=2)
    a = steering_vector(az, el, cfg)
    la, le = to_local(az, el, cfg)
    g = 10 ** (element_pattern_db(la, le, cfg) / 10)
    np.testing.assert_allclose(np.abs(a) ** 2, g, rtol=1e-9)


def test_full_digital_is_identity():
    arch = make_rx_architecture("full_digital", ArrayConfig())
    assert arch.n_rf == 64
    x = np.arange(64) + 0j
    np.testing.assert_array_equal(arch.combine(x), x)


def test_hybrid_subarrays_orthonormal():
    cfg = ArrayConfig()
    arch = make_rx_architecture("hybrid", cfg)
    assert arch.n_rf == 32
    np.testing.assert_allclose(arch.w_rf.conj().T @ arch.w_rf, np.eye(32), atol=1e-12)
    assert arch.grid_shape == (4, 8) and arch.grid_spacing == (1.0, 0.5)
    # chain 0 combines elements (row 0, col 0) and (row 1, col 0)
    assert set(np.nonzero(arch.w_rf[:, 0])[0]) == {0, 8}


def test_hybrid_rejects_odd_rows():
    with pytest.raises(ValueError):
        make_rx_architecture("hybrid", ArrayConfig(n_rows=3))


def test_analog_codebook():
    cfg = ArrayConfig()
    arch = make_rx_architecture("analog", cfg)
    assert arch.n_rf == 1
    np.testing.assert_allclose(np.linalg.norm(arch.codebook, axis=0), 1.0)
    assert tuple(arch.beam_angles[arch.beam_index]) == (0.0, 0.0)
    # the selected beam is matched to its own pointing direction
    a = local_steering(0.0, 0.0, cfg, pattern=False)
    assert abs(arch.combine(a)[0]) == pytest.approx(np.sqrt(64))


def test_unknown_architecture():
    with pytest.raises(ValueError):
        make_rx_architecture("optical", ArrayConfig())


def test_precoder_and_effective_steering():
    cfg = ArrayConfig()
    f = quasi_omni_precoder(cfg)
    assert np.linalg.norm(f) == 1.0 and f[0] == 1.0
    arch = make_rx_architecture("hybrid", cfg)
    e = effective_steering(30.0, 10.0, cfg, arch)
    assert e.shape == (32,)


def test_config_validation():
    with pytest.raises(ValueError):
        ArrayConfig(dh=0)
    with pytest.raises(ValueError):
        ArrayConfig(n_rows=0)
