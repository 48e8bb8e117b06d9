"""Physical-layer model: ULA steering, OFDM transforms, QAM, spoofing and channels.

All functions are pure. Angles are in radians, measured from the array axis,
so broadside is ``pi / 2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    n_antennas: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if int(self.n_antennas) < 1:
            raise ValueError("n_antennas must be >= 1")
        if not self.spacing_over_wavelength > 0:
            raise ValueError("spacing_over_wavelength must be positive")


@dataclass(frozen=True)
class Bearings:
    comm_angles_rad: tuple = ()
    eve_angles_rad: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "comm_angles_rad", tuple(float(a) for a in self.comm_angles_rad))
        object.__setattr__(self, "eve_angles_rad", tuple(float(a) for a in self.eve_angles_rad))
        for a in self.comm_angles_rad + self.eve_angles_rad:
            _check_angle(a)
        if self.n_comm + self.n_eve < 1:
            raise ValueError("at least one bearing is required")

    @classmethod
    def from_degrees(cls, comm_deg: Sequence[float] = (), eve_deg: Sequence[float] = ()):
        return cls(tuple(np.deg2rad(comm_deg)), tuple(np.deg2rad(eve_deg)))

    @property
    def n_comm(self) -> int:
        return len(self.comm_angles_rad)

    @property
    def n_eve(self) -> int:
        return len(self.eve_angles_rad)


@dataclass(frozen=True)
class OfdmGrid:
    n_subcarriers: int = 64
    subcarrier_spacing_hz: float = 312.5e3
    n_symbols: int = 32
    carrier_hz: float = 5.9e9
    cp_len: int = 16

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.n_symbols < 1:
            raise ValueError("n_subcarriers and n_symbols must be >= 1")
        if not self.subcarrier_spacing_hz > 0 or not self.carrier_hz > 0:
            raise ValueError("subcarrier spacing and carrier must be positive")
        if not 0 <= self.cp_len < self.n_subcarriers:
            raise ValueError("cp_len must satisfy 0 <= cp_len < n_subcarriers")

    @property
    def symbol_duration_s(self) -> float:
        """Useful symbol time ``1 / delta_f``; the cyclic prefix is not included."""
        return 1.0 / self.subcarrier_spacing_hz

    @property
    def sample_rate_hz(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing_hz

    @property
    def subcarrier_freqs_hz(self) -> np.ndarray:
        return np.arange(self.n_subcarriers) * self.subcarrier_spacing_hz

    def check_symbol_index(self, m: int) -> None:
        if not 0 <= m < self.n_symbols:
            raise ValueError(f"symbol index {m} outside [0, {self.n_symbols})")


@dataclass(frozen=True)
class QamConstellation:
    """Square QAM with unit mean energy, scaled by ``sqrt(symbol_power_w)``."""

    order: int = 64
    symbol_power_w: float = 1.0

    def __post_init__(self):
        if self.order not in (4, 16, 64, 256):
            raise ValueError(f"unsupported QAM order {self.order}")
        if not self.symbol_power_w > 0:
            raise ValueError("symbol_power_w must be positive")

    @property
    def unit_levels(self) -> np.ndarray:
        k = int(round(np.sqrt(self.order)))
        raw = np.arange(-(k - 1), k, 2, dtype=float)
        return raw / np.sqrt(2.0 * (self.order - 1) / 3.0)

    @property
    def per_axis_levels(self) -> np.ndarray:
        return self.unit_levels * np.sqrt(self.symbol_power_w)

    @property
    def points(self) -> np.ndarray:
        lv = self.per_axis_levels
        return (lv[:, None] + 1j * lv[None, :]).ravel()

    def scaled(self, symbol_power_w: float) -> "QamConstellation":
        return QamConstellation(self.order, symbol_power_w)

    def random_symbols(self, rng: np.random.Generator, shape) -> np.ndarray:
        lv = self.per_axis_levels
        re = rng.integers(0, lv.size, size=shape)
        im = rng.integers(0, lv.size, size=shape)
        return lv[re] + 1j * lv[im]


@dataclass(frozen=True)
class SpoofProfile:
    fake_range_m: float = 0.0
    fake_doppler_hz: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.fake_range_m) and np.isfinite(self.fake_doppler_hz)):
            raise ValueError("spoof parameters must be finite")


@dataclass(frozen=True)
class ChannelRealization:
    """Single-path channel toward one receiver.

    With ``taps=None`` the channel is the idealized flat-per-subcarrier model
    built from ``(path_gain, range_m, doppler_hz)``. With explicit taps it is the
    circulant time-domain channel of a CP-OFDM link.
    """

    path_gain: float = 1.0
    range_m: float = 0.0
    velocity_mps: float = 0.0
    carrier_hz: float = 5.9e9
    noise_var: float = 1.0
    taps: Optional[tuple] = field(default=None)

    @property
    def doppler_hz(self) -> float:
        return self.velocity_mps * self.carrier_hz / SPEED_OF_LIGHT


def _check_angle(angle: float) -> None:
    if not (0.0 <= angle <= np.pi) or not np.isfinite(angle):
        raise ValueError(f"angle {angle!r} rad outside [0, pi]")


def steering_vector(geometry: ArrayGeometry, angle_rad: float) -> np.ndarray:
    _check_angle(angle_rad)
    k = np.arange(geometry.n_antennas)
    phase = 2 * np.pi * geometry.spacing_over_wavelength * k * np.cos(angle_rad)
    v = np.exp(1j * phase)
    v[0] = 1.0 + 0.0j
    return v


def steering_matrix(geometry: ArrayGeometry, angles: Sequence[float]) -> np.ndarray:
    """Stack steering vectors as rows; an empty list gives a ``0 x N_T`` matrix."""
    rows = [steering_vector(geometry, a) for a in angles]
    if not rows:
        return np.zeros((0, geometry.n_antennas), dtype=complex)
    return np.vstack(rows)


def idft_matrix(L: int) -> np.ndarray:
    """Unitary IDFT matrix ``F^H`` with entry ``(n, l) = exp(j 2 pi n l / L) / sqrt(L)``."""
    n = np.arange(L)
    return np.exp(2j * np.pi * np.outer(n, n) / L) / np.sqrt(L)


def dft_matrix(L: int) -> np.ndarray:
    return idft_matrix(L).conj().T


def ofdm_mod(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Apply ``F^H`` along ``axis`` (frequency -> time)."""
    return np.fft.ifft(x, axis=axis, norm="ortho")


def ofdm_demod(y: np.ndarray, axis: int = -1) -> np.ndarray:
    """Apply ``F`` along ``axis`` (time -> frequency)."""
    return np.fft.fft(y, axis=axis, norm="ortho")


def qam_nearest(value, constellation: QamConstellation):
    """Nearest constellation point, decided independently per axis.

    Ties go to the level of smaller magnitude; a tie between ``+a`` and ``-a``
    goes to ``-a``.
    """
    value = np.asarray(value)
    if not np.all(np.isfinite(value)):
        raise ValueError("qam_nearest needs finite input")
    levels = constellation.per_axis_levels
    # preference order among equidistant candidates
    pref = levels[np.lexsort((levels, np.abs(levels)))]
    scale = np.abs(levels).max()
    out = _nearest_level(value.real, pref, scale) + 1j * _nearest_level(value.imag, pref, scale)
    return out if out.ndim else complex(out)


def _nearest_level(v: np.ndarray, pref: np.ndarray, scale: float) -> np.ndarray:
    d = np.abs(v[..., None] - pref)
    cand = d <= d.min(axis=-1, keepdims=True) + 1e-12 * scale
    return pref[np.argmax(cand, axis=-1)]


def spoof_matrix_diag(grid: OfdmGrid, profile: SpoofProfile, m: int) -> np.ndarray:
    """Diagonal of the deceiving channel: fake delay ramp times fake Doppler phase."""
    grid.check_symbol_index(m)
    return _delay_doppler_diag(grid, profile.fake_range_m, profile.fake_doppler_hz, m)


def _delay_doppler_diag(grid: OfdmGrid, range_m: float, doppler_hz: float, m: int) -> np.ndarray:
    f = grid.subcarrier_freqs_hz
    delay = np.exp(-2j * np.pi * f * range_m / SPEED_OF_LIGHT)
    doppler = np.exp(2j * np.pi * doppler_hz * m * grid.symbol_duration_s)
    return delay * doppler


def deceptive_time_signal(grid: OfdmGrid, profile: SpoofProfile, X_e: np.ndarray, m: int) -> np.ndarray:
    """Rows ``(F^H diag(h_sp) x_e_i)^T`` for each eavesdropper row of ``X_e``."""
    X_e = np.atleast_2d(np.asarray(X_e, dtype=complex))
    if X_e.shape[1] != grid.n_subcarriers:
        raise ValueError(f"X_e has {X_e.shape[1]} columns, grid has {grid.n_subcarriers} subcarriers")
    h = spoof_matrix_diag(grid, profile, m)
    return ofdm_mod(X_e * h[None, :], axis=1)


def circulant_channel(taps: Sequence[complex], L: int) -> np.ndarray:
    taps = np.asarray(taps, dtype=complex).ravel()
    if taps.size < 1:
        raise ValueError("need at least one tap")
    if taps.size > L:
        raise ValueError(f"{taps.size} taps exceed block length {L}; cyclic prefix assumption violated")
    col = np.zeros(L, dtype=complex)
    col[: taps.size] = taps
    idx = (np.arange(L)[:, None] - np.arange(L)[None, :]) % L
    return col[idx]


def freq_channel_diag(channel: ChannelRealization, grid: OfdmGrid, m: int) -> np.ndarray:
    grid.check_symbol_index(m)
    if channel.taps is not None:
        taps = np.asarray(channel.taps, dtype=complex)
        if taps.size > grid.cp_len + 1:
            raise ValueError("channel longer than cyclic prefix")
        # F H_circ F^H = diag(fft(zero-padded taps)); unitary scaling cancels
        return np.fft.fft(taps, n=grid.n_subcarriers)
    return channel.path_gain * _delay_doppler_diag(grid, channel.range_m, channel.doppler_hz, m)


def time_channel(channel: ChannelRealization, grid: OfdmGrid, m: int) -> np.ndarray:
    """Time-domain ``L x L`` circulant channel for symbol ``m``."""
    L = grid.n_subcarriers
    if channel.taps is not None:
        if len(channel.taps) > grid.cp_len + 1:
            raise ValueError("channel longer than cyclic prefix")
        return circulant_channel(channel.taps, L)
    h = freq_channel_diag(channel, grid, m)
    F = dft_matrix(L)
    return F.conj().T @ (h[:, None] * F)


def simulate_rx(S: np.ndarray, steer: np.ndarray, channel: ChannelRealization, grid: OfdmGrid,
                m: int, rng_seed=None) -> np.ndarray:
    """Received time-domain block ``H_circ S^T a + n``."""
    S = np.asarray(S)
    steer = np.asarray(steer)
    if S.shape != (steer.size, grid.n_subcarriers):
        raise ValueError(f"S shape {S.shape} incompatible with steering length {steer.size} and L={grid.n_subcarriers}")
    y = time_channel(channel, grid, m) @ (S.T @ steer)
    if channel.noise_var > 0:
        rng = np.random.default_rng(rng_seed)
        std = np.sqrt(channel.noise_var / 2.0)
        y = y + std * (rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size))
    return y
