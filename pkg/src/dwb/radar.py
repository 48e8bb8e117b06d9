"""The eavesdropper's OFDM passive-radar estimator.

Demodulated symbols are stacked into an ``L x M`` frame, the data symbols are
divided out, and a 2D transform of what remains gives a range-Doppler map.
The phase model it inverts is

    Z[l, m] = beta * exp(-j 2 pi l df R / c) * exp(+j 2 pi f_D m T)

so the subcarrier axis is transformed with an ``exp(+j ...)`` kernel (inverse
FFT) and the symbol axis with an ``exp(-j ...)`` kernel (forward FFT). With the
opposite signs the axes would come out mirrored.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .signal_model import SPEED_OF_LIGHT, OfdmGrid, QamConstellation, qam_nearest


@dataclass(frozen=True)
class RxFrame:
    grid: OfdmGrid
    fd_samples: np.ndarray  # L x M, column m = demodulated symbol m

    def __post_init__(self):
        shape = np.shape(self.fd_samples)
        if shape != (self.grid.n_subcarriers, self.grid.n_symbols):
            raise ValueError(f"frame shape {shape} does not match grid "
                             f"({self.grid.n_subcarriers}, {self.grid.n_symbols})")


@dataclass(frozen=True)
class SymbolKnowledge:
    mode: str = "known"
    symbols: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode not in ("known", "blind"):
            raise ValueError(f"unknown symbol knowledge mode {self.mode!r}")
        if self.mode == "known" and self.symbols is None:
            raise ValueError("known mode needs the symbols")


@dataclass
class RangeDopplerMap:
    magnitudes: np.ndarray  # P x Q
    range_axis_m: np.ndarray
    doppler_axis_hz: np.ndarray

    @property
    def range_bin_m(self) -> float:
        return float(self.range_axis_m[1] - self.range_axis_m[0]) if self.range_axis_m.size > 1 else np.inf

    @property
    def doppler_bin_hz(self) -> float:
        return float(self.doppler_axis_hz[1] - self.doppler_axis_hz[0]) if self.doppler_axis_hz.size > 1 else np.inf


@dataclass(frozen=True)
class PeakEstimate:
    range_m: float
    doppler_hz: float
    peak_to_floor_db: float
    range_index: int
    doppler_index: int


def collect_frame(grid: OfdmGrid, symbols: Sequence[np.ndarray]) -> RxFrame:
    """Stack per-symbol frequency-domain vectors as columns, in order."""
    cols = [np.asarray(v, dtype=complex).ravel() for v in symbols]
    if len(cols) != grid.n_symbols:
        raise ValueError(f"expected {grid.n_symbols} symbols, got {len(cols)}")
    for v in cols:
        if v.size != grid.n_subcarriers:
            raise ValueError(f"symbol vector of length {v.size}, grid has {grid.n_subcarriers} subcarriers")
    return RxFrame(grid, np.stack(cols, axis=1))


def blind_demod(frame: RxFrame, constellation: QamConstellation, equalization: str = "none") -> np.ndarray:
    """Nearest-point decisions on the received frame.

    ``equalization="phase-only"`` first de-rotates each subcarrier by its
    fourth-power phase estimate, unwrapped across subcarriers. Square QAM is
    invariant to quarter turns, so one common ``k * pi/2`` ambiguity remains;
    it is constant over the frame and does not move the range-Doppler peak.
    The initial estimate is a linear phase across subcarriers (a pure delay),
    refined by a few decision-directed passes. Unwrapping assumes the channel
    phase changes by less than ``pi/4`` between adjacent subcarriers.
    """
    Y = frame.fd_samples
    if equalization == "none":
        return qam_nearest(Y, constellation)
    if equalization == "phase-only":
        # fourth powers of square QAM average onto the negative real axis
        quad = np.unwrap(np.angle(-np.sum(Y ** 4, axis=1)))
        # a straight-line fit over subcarriers rejects single bad estimates
        ell = np.arange(Y.shape[0])
        phase = np.polyval(np.polyfit(ell, quad, 1), ell) / 4.0 if ell.size > 1 else quad / 4.0
        X = qam_nearest(Y * np.exp(-1j * phase)[:, None], constellation)
        # decision-directed refinement per subcarrier
        for _ in range(3):
            phase = np.angle(np.sum(Y * np.conj(X), axis=1))
            X = qam_nearest(Y * np.exp(-1j * phase)[:, None], constellation)
        return X
    raise ValueError(f"unknown equalization {equalization!r}")


def remove_symbols(frame: RxFrame, knowledge: SymbolKnowledge,
                   constellation: Optional[QamConstellation] = None,
                   equalization: str = "none") -> np.ndarray:
    """Elementwise division of the frame by the (known or decided) symbols."""
    if knowledge.mode == "known":
        X = np.asarray(knowledge.symbols, dtype=complex)
        if X.shape != frame.fd_samples.shape:
            raise ValueError("known symbols do not match frame shape")
    else:
        if constellation is None:
            raise ValueError("blind mode needs a constellation")
        X = np.asarray(blind_demod(frame, constellation, equalization))
    if np.any(X == 0):
        raise ZeroDivisionError("symbol matrix contains zeros")
    return frame.fd_samples / X


def range_doppler_map(Z: np.ndarray, grid: OfdmGrid, pad_range: int = 4, pad_doppler: int = 4) -> RangeDopplerMap:
    """Zero-padded 2D transform of ``Z`` (``L x M``).

    The range axis covers ``[0, c / df)``; the Doppler axis is centred,
    covering ``[-df/2, df/2)``.
    """
    if pad_range < 1 or pad_doppler < 1:
        raise ValueError("padding factors must be >= 1")
    Z = np.asarray(Z, dtype=complex)
    L, M = Z.shape
    P, Q = pad_range * L, pad_doppler * M
    rd = np.fft.ifft(Z, n=P, axis=0) * P
    rd = np.fft.fftshift(np.fft.fft(rd, n=Q, axis=1), axes=1)
    df = grid.subcarrier_spacing_hz
    range_axis = np.arange(P) * SPEED_OF_LIGHT / (P * df)
    doppler_axis = (np.arange(Q) - Q // 2) / (Q * grid.symbol_duration_s)
    return RangeDopplerMap(np.abs(rd), range_axis, doppler_axis)


def _vertex(left: float, mid: float, right: float) -> float:
    denom = left - 2.0 * mid + right
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def find_peak(rd_map: RangeDopplerMap, interpolate: bool = True) -> PeakEstimate:
    """Global maximum, with optional 3-point parabolic refinement per axis.

    Ties resolve to the smallest (range, Doppler) indices. Neighbours wrap
    around, matching the periodicity of both axes.
    """
    A = rd_map.magnitudes
    if A.size == 0:
        raise ValueError("empty map")
    p, q = np.unravel_index(int(np.argmax(A)), A.shape)
    P, Q = A.shape
    dp = dq = 0.0
    if interpolate:
        if P >= 3:
            dp = _vertex(A[(p - 1) % P, q], A[p, q], A[(p + 1) % P, q])
        if Q >= 3:
            dq = _vertex(A[p, (q - 1) % Q], A[p, q], A[p, (q + 1) % Q])
    rng = rd_map.range_axis_m[p] + dp * rd_map.range_bin_m if P > 1 else rd_map.range_axis_m[p]
    dop = rd_map.doppler_axis_hz[q] + dq * rd_map.doppler_bin_hz if Q > 1 else rd_map.doppler_axis_hz[q]
    floor = np.median(A)
    ratio = A[p, q] / floor if floor > 0 else np.inf
    return PeakEstimate(float(rng), float(dop), float(20 * np.log10(ratio)) if ratio > 0 else -np.inf,
                        int(p), int(q))


def unambiguous_range_m(grid: OfdmGrid) -> float:
    return SPEED_OF_LIGHT / grid.subcarrier_spacing_hz


def is_aliased(grid: OfdmGrid, range_m: float, doppler_hz: float) -> bool:
    """True when ``(range_m, doppler_hz)`` lies outside the map's unambiguous region."""
    half = grid.subcarrier_spacing_hz / 2.0
    return not (0.0 <= range_m < unambiguous_range_m(grid) and -half <= doppler_hz < half)


def wrap_to_map(grid: OfdmGrid, range_m: float, doppler_hz: float) -> tuple:
    """Where an arbitrary (range, Doppler) shows up on the map."""
    r_max = unambiguous_range_m(grid)
    df = grid.subcarrier_spacing_hz
    return float(np.mod(range_m, r_max)), float(np.mod(doppler_hz + df / 2, df) - df / 2)


def write_map_csv(rd_map: RangeDopplerMap, path) -> None:
    """Write ``range_m,doppler_hz,magnitude_db`` rows, range-major."""
    mag = rd_map.magnitudes
    peak = mag.max() if mag.size else 1.0
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(np.maximum(mag / peak, 1e-30)) if peak > 0 else np.full(mag.shape, -600.0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["range_m", "doppler_hz", "magnitude_db"])
        for i, r in enumerate(rd_map.range_axis_m):
            for j, f in enumerate(rd_map.doppler_axis_hz):
                w.writerow([f"{r:.6f}", f"{f:.6f}", f"{db[i, j]:.6f}"])
