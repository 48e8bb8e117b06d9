import csv
import math

import numpy as np
import pytest
from scipy.special import erfc

from dwb.radar import (RangeDopplerMap, RxFrame, SymbolKnowledge, blind_demod, collect_frame, find_peak,
                       is_aliased, range_doppler_map, remove_symbols, unambiguous_range_m, wrap_to_map,
                       write_map_csv)
from dwb.signal_model import SPEED_OF_LIGHT, OfdmGrid, QamConstellation

GRID = OfdmGrid(n_subcarriers=64, subcarrier_spacing_hz=312.5e3, n_symbols=32)
RANGE_BIN = SPEED_OF_LIGHT / (4 * 64 * 312.5e3)
DOPPLER_BIN = 312.5e3 / (4 * 32)


def ramp(grid, range_m, doppler_hz, gain=1.0):
    """Delay/Doppler phase pattern written out explicitly."""
    L, M = grid.n_subcarriers, grid.n_symbols
    T = 1.0 / grid.subcarrier_spacing_hz
    out = np.empty((L, M), complex)
    for l in range(L):
        for m in range(M):
            out[l, m] = gain * np.exp(
                -2j * math.pi * l * grid.subcarrier_spacing_hz * range_m / SPEED_OF_LIGHT) * np.exp(
                2j * math.pi * doppler_hz * m * T)
    return out


def test_axes():
    m = range_doppler_map(np.ones((64, 32)), GRID)
    assert m.magnitudes.shape == (256, 128)
    assert m.range_bin_m == pytest.approx(RANGE_BIN)
    assert m.doppler_bin_hz == pytest.approx(DOPPLER_BIN)
    assert m.range_axis_m[0] == 0 and m.doppler_axis_hz[64] == 0
    assert m.doppler_axis_hz[0] == pytest.approx(-312.5e3 / 2)
    assert unambiguous_range_m(GRID) == pytest.approx(959.33586, rel=1e-6)


def test_constant_frame_peaks_at_origin():
    est = find_peak(range_doppler_map(np.ones((64, 32)), GRID))
    assert est.range_m == pytest.approx(0.0, abs=1e-9)
    assert est.doppler_hz == pytest.approx(0.0, abs=1e-9)
    assert est.range_index == 0 and est.doppler_index == 64


@pytest.mark.parametrize("R,f", [(45.0, 800.0), (0.0, 0.0), (123.4, -2500.0), (500.0, 40_000.0)])
def test_synthetic_target_within_half_bin(R, f):
    est = find_peak(range_doppler_map(ramp(GRID, R, f), GRID))
    assert abs(est.range_m - R) <= RANGE_BIN / 2
    assert abs(est.doppler_hz - f) <= DOPPLER_BIN / 2


def test_on_grid_target_is_exact():
    R = 10 * RANGE_BIN
    f = 3 * DOPPLER_BIN
    est = find_peak(range_doppler_map(ramp(GRID, R, f), GRID))
    assert est.range_m == pytest.approx(R, abs=1e-9)
    assert est.doppler_hz == pytest.approx(f, abs=1e-6)


def test_interpolation_reduces_error():
    rng = np.random.default_rng(0)
    raw, fine = [], []
    for _ in range(30):
        R, f = rng.uniform(5, 300), rng.uniform(-5000, 5000)
        m = range_doppler_map(ramp(GRID, R, f), GRID)
        a, b = find_peak(m, interpolate=False), find_peak(m)
        raw.append(abs(a.range_m - R) / RANGE_BIN + abs(a.doppler_hz - f) / DOPPLER_BIN)
        fine.append(abs(b.range_m - R) / RANGE_BIN + abs(b.doppler_hz - f) / DOPPLER_BIN)
    assert np.mean(fine) < np.mean(raw)


def test_two_targets_stronger_wins():
    Z = ramp(GRID, 30.0, 1000.0) + 0.5 * ramp(GRID, 200.0, -3000.0)
    est = find_peak(range_doppler_map(Z, GRID))
    assert abs(est.range_m - 30.0) <= RANGE_BIN / 2
    assert abs(est.doppler_hz - 1000.0) <= DOPPLER_BIN / 2


def test_map_is_linear_before_magnitude():
    rng = np.random.default_rng(1)
    Z1 = rng.standard_normal((64, 32)) + 1j * rng.standard_normal((64, 32))
    m1 = range_doppler_map(Z1, GRID).magnitudes
    m2 = range_doppler_map(2.5 * Z1, GRID).magnitudes
    np.testing.assert_allclose(m2, 2.5 * m1, rtol=1e-12)
    # Parseval on the unpadded transform
    m = range_doppler_map(Z1, GRID, 1, 1).magnitudes
    assert np.sum(m ** 2) == pytest.approx(64 ** 2 * 32 * np.sum(np.abs(Z1) ** 2) / 64, rel=1e-10)


def test_peak_tie_goes_to_smallest_indices():
    mags = np.zeros((4, 4))
    mags[1, 2] = mags[3, 0] = 5.0
    m = RangeDopplerMap(mags, np.arange(4.0), np.arange(4.0))
    est = find_peak(m, interpolate=False)
    assert (est.range_index, est.doppler_index) == (1, 2)


def test_known_mode_recovers_delay_doppler_through_symbols():
    rng = np.random.default_rng(2)
    c = QamConstellation(64)
    X = c.random_symbols(rng, (64, 32))
    frame = collect_frame(GRID, list((X * ramp(GRID, 45.0, 800.0)).T))
    Z = remove_symbols(frame, SymbolKnowledge("known", X))
    est = find_peak(range_doppler_map(Z, GRID))
    assert abs(est.range_m - 45.0) <= RANGE_BIN / 2
    assert abs(est.doppler_hz - 800.0) <= DOPPLER_BIN / 2


def test_known_mode_noise_robustness():
    c = QamConstellation(16)
    hits = 0
    for trial in range(200):
        rng = np.random.default_rng(1000 + trial)
        X = c.random_symbols(rng, (64, 32))
        sigma2 = 0.1  # 10 dB per sample
        noise = np.sqrt(sigma2 / 2) * (rng.standard_normal((64, 32)) + 1j * rng.standard_normal((64, 32)))
        frame = RxFrame(GRID, X * ramp(GRID, 45.0, 800.0) + noise)
        est = find_peak(range_doppler_map(remove_symbols(frame, SymbolKnowledge("known", X)), GRID))
        hits += abs(est.range_m - 45.0) <= RANGE_BIN / 2 and abs(est.doppler_hz - 800.0) <= DOPPLER_BIN / 2
    assert hits >= 198


def test_blind_flat_channel_high_snr():
    rng = np.random.default_rng(3)
    c = QamConstellation(64)
    X = c.random_symbols(rng, (64, 32))
    noise = 1e-2 * (rng.standard_normal(X.shape) + 1j * rng.standard_normal(X.shape)) / np.sqrt(2)
    frame = RxFrame(GRID, X + noise)
    np.testing.assert_array_equal(blind_demod(frame, c), X)
    est = find_peak(range_doppler_map(remove_symbols(frame, SymbolKnowledge("blind"), c), GRID))
    assert abs(est.range_m) <= RANGE_BIN / 2 and abs(est.doppler_hz) <= DOPPLER_BIN / 2


def test_blind_phase_only_tracks_delay():
    rng = np.random.default_rng(4)
    c = QamConstellation(64)
    X = c.random_symbols(rng, (64, 32))
    frame = RxFrame(GRID, X * ramp(GRID, 45.0, 0.0))
    decided = blind_demod(frame, c, "phase-only")
    # decisions equal the truth up to one common quarter turn
    k = np.round(np.angle(np.mean(decided / X)) / (np.pi / 2))
    np.testing.assert_allclose(decided, X * np.exp(1j * np.pi / 2 * k), atol=1e-12)
    Z = remove_symbols(frame, SymbolKnowledge("blind"), c, "phase-only")
    est = find_peak(range_doppler_map(Z, GRID))
    assert abs(est.range_m - 45.0) <= RANGE_BIN / 2
    with pytest.raises(ValueError):
        blind_demod(frame, c, "zf")


def qam_ser(order, es_over_n0):
    """Closed-form symbol error rate of square QAM in AWGN."""
    k = math.sqrt(order)
    p = (1 - 1 / k) * erfc(math.sqrt(1.5 * es_over_n0 / (order - 1)))
    return 1 - (1 - p) ** 2


@pytest.mark.parametrize("order,snr_db", [(4, 8.0), (16, 14.0), (64, 20.0)])
def test_blind_ser_matches_theory(order, snr_db):
    rng = np.random.default_rng(order)
    c = QamConstellation(order)
    n = 200_000
    x = c.random_symbols(rng, n)
    s2 = 10 ** (-snr_db / 10)
    y = x + np.sqrt(s2 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    decided = blind_demod(RxFrame(OfdmGrid(n_subcarriers=n, n_symbols=1, cp_len=0), y[:, None]), c)
    ser = np.mean(decided[:, 0] != x)
    ref = qam_ser(order, 1 / s2)
    assert abs(ser - ref) < 5 * math.sqrt(ref * (1 - ref) / n) + 1e-4


def test_remove_symbols_errors():
    frame = RxFrame(GRID, np.ones((64, 32), complex))
    X = np.ones((64, 32), complex)
    X[3, 3] = 0
    with pytest.raises(ZeroDivisionError):
        remove_symbols(frame, SymbolKnowledge("known", X))
    with pytest.raises(ValueError):
        remove_symbols(frame, SymbolKnowledge("known", np.ones((64, 31))))
    with pytest.raises(ValueError):
        remove_symbols(frame, SymbolKnowledge("blind"))
    with pytest.raises(ValueError):
        RxFrame(GRID, np.ones((63, 32)))
    with pytest.raises(ValueError):
        collect_frame(GRID, [np.ones(64)] * 31)


def test_aliasing_helpers():
    r_max = unambiguous_range_m(GRID)
    assert not is_aliased(GRID, 50.0, 700.0)
    assert is_aliased(GRID, r_max + 1, 0.0)
    assert is_aliased(GRID, 10.0, 200e3)
    r, f = wrap_to_map(GRID, r_max + 40.7, 200e3)
    assert r == pytest.approx(40.7) and f == pytest.approx(200e3 - 312.5e3)


def test_aliased_target_shows_at_wrapped_position():
    r_max = unambiguous_range_m(GRID)
    est = find_peak(range_doppler_map(ramp(GRID, r_max + 40.0, 0.0), GRID))
    assert abs(est.range_m - 40.0) <= RANGE_BIN / 2


def test_map_csv_roundtrip(tmp_path):
    g = OfdmGrid(n_subcarriers=4, n_symbols=2, cp_len=1)
    m = range_doppler_map(ramp(g, 100.0, 0.0), g, 2, 2)
    p = tmp_path / "map.csv"
    write_map_csv(m, p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["range_m", "doppler_hz", "magnitude_db"]
    assert len(rows) == 1 + 8 * 4
    db = np.array([float(r[2]) for r in rows[1:]])
    assert db.max() == 0.0 and np.all(db <= 0)
    assert float(rows[1][0]) == 0.0


def test_qpsk_rotated_ten_degrees_still_decided():
    c = QamConstellation(4)
    x = c.points
    frame = RxFrame(OfdmGrid(n_subcarriers=4, n_symbols=1, cp_len=0), (x * np.exp(1j * np.deg2rad(10)))[:, None])
    np.testing.assert_array_equal(blind_demod(frame, c)[:, 0], x)


def test_all_ones_symbols_leave_frame_unchanged():
    rng = np.random.default_rng(6)
    Y = rng.standard_normal((64, 32)) + 1j * rng.standard_normal((64, 32))
    Z = remove_symbols(RxFrame(GRID, Y), SymbolKnowledge("known", np.ones((64, 32))))
    np.testing.assert_array_equal(Z, Y)


def test_frame_order_is_semantic():
    rng = np.random.default_rng(7)
    cols = [rng.standard_normal(64) + 0j for _ in range(32)]
    a = collect_frame(GRID, cols)
    b = collect_frame(GRID, cols[::-1])
    np.testing.assert_array_equal(a.fd_samples[:, 3], cols[3])
    assert not np.array_equal(a.fd_samples, b.fd_samples)
