import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dwb.signal_model import (SPEED_OF_LIGHT, ArrayGeometry, Bearings, ChannelRealization, OfdmGrid,
                              QamConstellation, SpoofProfile, circulant_channel, deceptive_time_signal,
                              dft_matrix, freq_channel_diag, idft_matrix, ofdm_demod, ofdm_mod,
                              qam_nearest, simulate_rx, spoof_matrix_diag, steering_matrix,
                              steering_vector)

GEO16 = ArrayGeometry(16, 0.5)


# --- steering -------------------------------------------------------------

def test_steering_broadside_all_ones():
    np.testing.assert_array_equal(steering_vector(ArrayGeometry(4), np.pi / 2).real, np.ones(4))
    np.testing.assert_allclose(steering_vector(ArrayGeometry(4), np.pi / 2), np.ones(4), atol=1e-15)


def test_steering_endfire_alternates():
    np.testing.assert_allclose(steering_vector(ArrayGeometry(4), 0.0), [1, -1, 1, -1], atol=1e-15)


def test_steering_80deg_matches_per_element_formula():
    theta = math.radians(80)
    expected = [cmath.exp(1j * 2 * math.pi * 0.5 * k * math.cos(theta)) for k in range(16)]
    np.testing.assert_allclose(steering_vector(GEO16, theta), expected, rtol=0, atol=1e-14)


@pytest.mark.parametrize("bad", [-0.01, np.pi + 1e-9, np.nan])
def test_steering_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        steering_vector(GEO16, bad)


@given(st.floats(0, np.pi), st.integers(1, 40), st.floats(0.05, 2.0))
def test_steering_unit_modulus_first_element_one(theta, n, spacing):
    v = steering_vector(ArrayGeometry(n, spacing), theta)
    assert v[0] == 1 + 0j
    np.testing.assert_allclose(np.abs(v), 1.0, atol=1e-14)


def test_steering_matrix_rows():
    angles = np.deg2rad([70, 90])
    A = steering_matrix(GEO16, angles)
    assert A.shape == (2, 16)
    for i, a in enumerate(angles):
        np.testing.assert_array_equal(A[i], steering_vector(GEO16, a))
    assert steering_matrix(GEO16, []).shape == (0, 16)
    np.testing.assert_allclose(steering_matrix(ArrayGeometry(5), [np.pi / 2]), np.ones((1, 5)), atol=1e-15)
    dup = steering_matrix(GEO16, [1.0, 1.0])
    assert np.linalg.matrix_rank(dup) == 1


def test_bearings_validation():
    with pytest.raises(ValueError):
        Bearings((), ())
    with pytest.raises(ValueError):
        Bearings((4.0,), ())
    b = Bearings.from_degrees([80], [])
    assert b.n_comm == 1 and b.n_eve == 0


# --- OFDM -----------------------------------------------------------------

def test_idft_small_cases():
    np.testing.assert_allclose(idft_matrix(1), [[1.0]])
    np.testing.assert_allclose(idft_matrix(2), np.array([[1, 1], [1, -1]]) / np.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("L", [1, 2, 3, 16, 64, 128])
def test_idft_unitary(L):
    F = idft_matrix(L)
    assert np.max(np.abs(F.conj().T @ F - np.eye(L))) < 1e-12
    assert np.max(np.abs(F @ F.conj().T - np.eye(L))) < 1e-12


def test_fft_helpers_match_matrices():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    np.testing.assert_allclose(ofdm_mod(x), idft_matrix(64) @ x, atol=1e-12)
    np.testing.assert_allclose(ofdm_demod(x), dft_matrix(64) @ x, atol=1e-12)


def test_ofdm_demod_properties():
    L = 32
    Fh = idft_matrix(L)
    e = ofdm_demod(Fh[:, 5])
    expected = np.zeros(L)
    expected[5] = 1
    np.testing.assert_allclose(e, expected, atol=1e-12)
    rng = np.random.default_rng(2)
    x = rng.standard_normal(L) + 1j * rng.standard_normal(L)
    np.testing.assert_allclose(ofdm_demod(ofdm_mod(x)), x, atol=1e-12)
    assert abs(np.linalg.norm(ofdm_demod(x)) - np.linalg.norm(x)) < 1e-12


def test_grid_derived_quantities():
    g = OfdmGrid()
    assert g.symbol_duration_s * g.subcarrier_spacing_hz == 1.0
    assert g.sample_rate_hz == 64 * 312.5e3
    with pytest.raises(ValueError):
        OfdmGrid(n_subcarriers=8, cp_len=8)
    with pytest.raises(ValueError):
        g.check_symbol_index(32)


# --- QAM ------------------------------------------------------------------

@pytest.mark.parametrize("order", [4, 16, 64, 256])
def test_constellation_unit_energy_and_symmetry(order):
    c = QamConstellation(order)
    assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12
    np.testing.assert_allclose(c.per_axis_levels, -c.per_axis_levels[::-1])
    assert c.points.size == order
    assert not np.any(c.points == 0)


def test_qam_nearest_qpsk():
    c = QamConstellation(4)
    assert qam_nearest(0.3 - 0.8j, c) == pytest.approx((1 - 1j) / np.sqrt(2))


def test_qam_nearest_tie_rules():
    c = QamConstellation(64)
    lv = c.per_axis_levels  # -7..7 over sqrt(42)
    mid = 0.5 * (lv[5] + lv[6])  # between +3 and +5 -> +3
    assert qam_nearest(complex(mid, mid), c) == complex(lv[5], lv[5])
    mid_neg = 0.5 * (lv[1] + lv[2])  # between -5 and -3 -> -3
    assert qam_nearest(complex(mid_neg, 0.0), c).real == lv[2]
    # 0 is equidistant from +1 and -1 -> negative
    assert qam_nearest(0.0 + 0.0j, c) == complex(lv[3], lv[3])


@settings(max_examples=200)
@given(st.sampled_from([4, 16, 64, 256]), st.floats(0.1, 50),
       st.floats(-20, 20), st.floats(-20, 20))
def test_qam_nearest_idempotent_and_in_alphabet(order, ps, re, im):
    c = QamConstellation(order, ps)
    q = qam_nearest(complex(re, im), c)
    assert np.min(np.abs(c.points - q)) == 0
    assert qam_nearest(q, c) == q
    # true Euclidean nearest (up to ties)
    d = np.abs(c.points - complex(re, im))
    assert abs(q - complex(re, im)) <= d.min() + 1e-9


def test_qam_nearest_vectorised():
    c = QamConstellation(16, 10.0)
    rng = np.random.default_rng(0)
    x = c.random_symbols(rng, (3, 7))
    np.testing.assert_array_equal(qam_nearest(x, c), x)


# --- spoofing -------------------------------------------------------------

def test_spoof_identity():
    g = OfdmGrid()
    np.testing.assert_allclose(spoof_matrix_diag(g, SpoofProfile(0, 0), 7), np.ones(64))


def test_spoof_direct_formula():
    g = OfdmGrid(n_subcarriers=64, subcarrier_spacing_hz=312.5e3)
    R, f, m = 30.0, 500.0, 3
    T = 1 / 312.5e3
    expected = [cmath.exp(-2j * math.pi * (l * 312.5e3) * R / 299792458.0) *
                cmath.exp(2j * math.pi * f * m * T) for l in range(64)]
    np.testing.assert_allclose(spoof_matrix_diag(g, SpoofProfile(R, f), m), expected, rtol=0, atol=1e-12)


def test_spoof_doppler_step_per_symbol():
    g = OfdmGrid()
    p = SpoofProfile(12.0, 1234.0)
    step = np.exp(2j * np.pi * 1234.0 * g.symbol_duration_s)
    for m in range(5):
        ratio = spoof_matrix_diag(g, p, m + 1) / spoof_matrix_diag(g, p, m)
        np.testing.assert_allclose(ratio, step, atol=1e-13)


@given(st.floats(-1e4, 1e4), st.floats(-1e5, 1e5), st.integers(0, 31))
def test_spoof_unit_modulus(R, f, m):
    h = spoof_matrix_diag(OfdmGrid(), SpoofProfile(R, f), m)
    assert np.max(np.abs(np.abs(h) - 1.0)) < 1e-14


def test_deceptive_time_signal():
    g = OfdmGrid(n_subcarriers=16, n_symbols=4, cp_len=4)
    Fh = idft_matrix(16)
    X = np.zeros((1, 16), complex)
    X[0, 3] = 1
    np.testing.assert_allclose(deceptive_time_signal(g, SpoofProfile(), X, 0)[0], Fh[:, 3], atol=1e-14)
    np.testing.assert_array_equal(deceptive_time_signal(g, SpoofProfile(5, 7), np.zeros((2, 16)), 1), 0)
    rng = np.random.default_rng(3)
    X = rng.standard_normal((3, 16)) + 1j * rng.standard_normal((3, 16))
    D = deceptive_time_signal(g, SpoofProfile(40, 900), X, 2)
    np.testing.assert_allclose(np.linalg.norm(D, axis=1), np.linalg.norm(X, axis=1), rtol=1e-12)
    # explicit F^H diag(h) x
    h = spoof_matrix_diag(g, SpoofProfile(40, 900), 2)
    np.testing.assert_allclose(D[1], Fh @ (h * X[1]), atol=1e-12)
    with pytest.raises(ValueError):
        deceptive_time_signal(g, SpoofProfile(), np.zeros((1, 8)), 0)


# --- channels -------------------------------------------------------------

def test_circulant_identity_and_two_tap_example():
    np.testing.assert_array_equal(circulant_channel([1], 5), np.eye(5))
    h0, h1 = 0.7 - 0.2j, 0.3 + 0.4j
    expected = np.array([[h0, 0, h1], [h1, h0, 0], [0, h1, h0]])
    np.testing.assert_array_equal(circulant_channel([h0, h1], 3), expected)
    with pytest.raises(ValueError):
        circulant_channel([1, 2, 3, 4], 3)


def test_circulant_matches_cp_linear_convolution():
    # linear convolution with a CP, then CP removal, equals the circulant product
    rng = np.random.default_rng(4)
    L, Q = 16, 4
    h = rng.standard_normal(Q) + 1j * rng.standard_normal(Q)
    d = rng.standard_normal(L) + 1j * rng.standard_normal(L)
    with_cp = np.concatenate([d[-(Q - 1):], d])
    y = np.convolve(with_cp, h)[Q - 1:Q - 1 + L]
    np.testing.assert_allclose(circulant_channel(h, L) @ d, y, atol=1e-12)


@settings(max_examples=50)
@given(st.integers(1, 8), st.integers(8, 40), st.integers(0, 10_000))
def test_circulant_diagonalised_by_dft(Q, L, seed):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(Q) + 1j * rng.standard_normal(Q)
    F = dft_matrix(L)
    D = F @ circulant_channel(h, L) @ F.conj().T
    off = D - np.diag(np.diag(D))
    assert np.max(np.abs(off)) < 1e-10 * np.linalg.norm(h)
    np.testing.assert_allclose(np.diag(D), np.fft.fft(h, n=L), atol=1e-10 * np.linalg.norm(h))


def test_freq_channel_ideal_mode():
    g = OfdmGrid()
    np.testing.assert_allclose(freq_channel_diag(ChannelRealization(1.0, 0.0, 0.0), g, 5), np.ones(64))
    ch = ChannelRealization(path_gain=0.5, range_m=30.0, velocity_mps=0.0)
    np.testing.assert_allclose(freq_channel_diag(ch, g, 3),
                               0.5 * spoof_matrix_diag(g, SpoofProfile(30.0, 0.0), 3), atol=1e-14)
    ch = ChannelRealization(path_gain=2.0, range_m=17.0, velocity_mps=25.0, carrier_hz=g.carrier_hz)
    np.testing.assert_allclose(ch.doppler_hz, 25.0 * g.carrier_hz / SPEED_OF_LIGHT)
    np.testing.assert_allclose(freq_channel_diag(ch, g, 4),
                               2.0 * spoof_matrix_diag(g, SpoofProfile(17.0, ch.doppler_hz), 4), atol=1e-13)


def test_freq_channel_tap_mode_roundtrip():
    g = OfdmGrid(n_subcarriers=8, n_symbols=4, cp_len=7)
    ideal = ChannelRealization(path_gain=1.3, range_m=70.0, velocity_mps=3.0, carrier_hz=g.carrier_hz)
    diag = freq_channel_diag(ideal, g, 2)
    taps = np.fft.ifft(diag)  # FFT oracle
    tapped = ChannelRealization(taps=tuple(taps))
    np.testing.assert_allclose(freq_channel_diag(tapped, g, 2), diag, atol=1e-12)
    with pytest.raises(ValueError):
        freq_channel_diag(ChannelRealization(taps=(1, 1, 1)), OfdmGrid(n_subcarriers=8, cp_len=1), 0)


def test_simulate_rx_noiseless_and_deterministic():
    g = OfdmGrid(n_subcarriers=16, n_symbols=4, cp_len=4)
    geo = ArrayGeometry(4)
    rng = np.random.default_rng(5)
    S = rng.standard_normal((4, 16)) + 1j * rng.standard_normal((4, 16))
    a = steering_vector(geo, 1.1)
    y = simulate_rx(S, a, ChannelRealization(noise_var=0.0), g, 0)
    np.testing.assert_allclose(y, S.T @ a, atol=1e-12)

    # taps=[1] and S^T a = F^H x -> demod gives H x with H = identity
    x = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    S2 = np.outer(a.conj(), ofdm_mod(x)) / 4
    y = simulate_rx(S2, a, ChannelRealization(noise_var=0.0, taps=(1.0,)), g, 0)
    np.testing.assert_allclose(ofdm_demod(y), x, atol=1e-12)

    # ideal mode: demod equals diag(h) x
    ch = ChannelRealization(path_gain=0.8, range_m=33.0, velocity_mps=12.0, carrier_hz=g.carrier_hz, noise_var=0.0)
    y = simulate_rx(S2, a, ch, g, 3)
    np.testing.assert_allclose(ofdm_demod(y), freq_channel_diag(ch, g, 3) * x, atol=1e-12)

    noisy = ChannelRealization(noise_var=2.0)
    y1 = simulate_rx(S, a, noisy, g, 0, rng_seed=42)
    y2 = simulate_rx(S, a, noisy, g, 0, rng_seed=42)
    np.testing.assert_array_equal(y1, y2)


def test_simulate_rx_noise_variance():
    g = OfdmGrid(n_subcarriers=64, n_symbols=1, cp_len=0)
    S = np.zeros((2, 64), complex)
    a = np.ones(2, complex)
    n = np.concatenate([simulate_rx(S, a, ChannelRealization(noise_var=3.0), g, 0, rng_seed=s)
                        for s in range(300)])
    assert abs(np.mean(np.abs(n) ** 2) - 3.0) < 0.1
    assert abs(np.var(n.real) - 1.5) < 0.08
    with pytest.raises(ValueError):
        simulate_rx(np.zeros((3, 64)), a, ChannelRealization(), g, 0)
