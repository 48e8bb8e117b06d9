"""Deceptive wireless beamforming and the nulling benchmark.

Per OFDM symbol the transmitter picks ``S`` (``N_T x L``) of least power such
that the comm receivers see their OFDM symbols ``D_c`` exactly and every
eavesdropper sees a valid OFDM symbol carrying a fake delay/Doppler. The
eavesdropper QAM symbols ``X_e`` are free; they are relaxed to a box, solved
jointly with ``S``, rounded to the constellation and ``S`` is re-derived.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .qp_core import (BoxQp, LeastNormProblem, QpSolution, RankDeficientError, least_norm_solve,
                      lift_to_real, orthonormalize_rows, solve_box_qp, RANK_RTOL)
from .signal_model import (ArrayGeometry, Bearings, OfdmGrid, QamConstellation, SpoofProfile,
                           deceptive_time_signal, idft_matrix, ofdm_mod, qam_nearest,
                           spoof_matrix_diag, steering_matrix, steering_vector)


class BearingConflictError(RankDeficientError):
    """Steering rows are linearly dependent (duplicate or too many bearings)."""


@dataclass(frozen=True)
class DwbProblem:
    geometry: ArrayGeometry
    bearings: Bearings
    grid: OfdmGrid
    constellation: QamConstellation  # unit-energy alphabet; P_s comes from the SNR
    spoof: SpoofProfile
    comm_symbols: np.ndarray  # N_c x L unit-energy QAM symbols
    tx_snr_db: float = 10.0
    noise_var: float = 1.0
    symbol_index: int = 0

    @property
    def symbol_power(self) -> float:
        return power_per_symbol(self.tx_snr_db, self.noise_var)

    @property
    def scaled_constellation(self) -> QamConstellation:
        return QamConstellation(self.constellation.order, self.symbol_power)

    def comm_targets(self) -> np.ndarray:
        """Time-domain comm rows ``D_c`` after power scaling."""
        X_c = scale_comm_symbols(self.comm_symbols, self.symbol_power)
        X_c = np.asarray(X_c, dtype=complex).reshape(self.bearings.n_comm, self.grid.n_subcarriers)
        return ofdm_mod(X_c, axis=1)

    def steering(self):
        A_c = steering_matrix(self.geometry, self.bearings.comm_angles_rad)
        A_e = steering_matrix(self.geometry, self.bearings.eve_angles_rad)
        return A_c, A_e


@dataclass
class DwbSolution:
    tx_signal: np.ndarray
    deceptive_symbols_relaxed: np.ndarray
    deceptive_symbols_rounded: np.ndarray
    power_w: float
    relaxed_power_w: float
    relaxed_tx_signal: np.ndarray
    solver_diag: dict = field(default_factory=dict)


@dataclass
class NullingSolution:
    tx_signal: np.ndarray
    power_w: float


def power_per_symbol(tx_snr_db: float, noise_var: float) -> float:
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    return 10.0 ** (tx_snr_db / 10.0) * noise_var


def scale_comm_symbols(symbols, P_s: float):
    return np.sqrt(P_s) * np.asarray(symbols)


def tx_power(S) -> float:
    S = np.asarray(S)
    return float(np.vdot(S, S).real)


def tx_snr_toward(S, geometry: ArrayGeometry, angle: float, noise_var: float) -> float:
    d = np.asarray(S).T @ steering_vector(geometry, angle)
    return float(np.vdot(d, d).real / noise_var)


def _check_problem(problem: DwbProblem) -> np.ndarray:
    """Validate dimensions and rank; return the stacked ``[A_c; A_e]``."""
    b = problem.bearings
    n_t = problem.geometry.n_antennas
    if n_t <= b.n_comm + b.n_eve:
        raise BearingConflictError(
            f"N_T={n_t} must exceed N_c + N_e = {b.n_comm + b.n_eve} for an under-determined system")
    problem.grid.check_symbol_index(problem.symbol_index)
    if np.shape(problem.comm_symbols) != (b.n_comm, problem.grid.n_subcarriers):
        raise ValueError(f"comm_symbols must be {b.n_comm} x {problem.grid.n_subcarriers}")
    A_c, A_e = problem.steering()
    A = np.vstack([A_c, A_e])
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= RANK_RTOL * sv[0]:
        angles = np.rad2deg(np.array(b.comm_angles_rad + b.eve_angles_rad))
        gaps = np.abs(angles[:, None] - angles[None, :]) + np.eye(angles.size) * 1e9
        i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
        raise BearingConflictError(
            f"steering matrix is rank deficient (sigma ratio {sv[-1] / sv[0]:.2e}); "
            f"closest bearings {angles[i]:.3f} deg and {angles[j]:.3f} deg")
    return A


def transmit_for_symbols(problem: DwbProblem, X_e: Optional[np.ndarray]) -> np.ndarray:
    """Least-norm ``S`` delivering ``D_c`` and the spoofed OFDM symbols of ``X_e``."""
    A = _check_problem(problem)
    D_c = problem.comm_targets()
    n_e = problem.bearings.n_eve
    if n_e:
        X_e = np.zeros((n_e, problem.grid.n_subcarriers), complex) if X_e is None else X_e
        D_e = deceptive_time_signal(problem.grid, problem.spoof, X_e, problem.symbol_index)
    else:
        D_e = np.zeros((0, problem.grid.n_subcarriers), complex)
    try:
        return least_norm_solve(LeastNormProblem(A, np.vstack([D_c, D_e])))
    except RankDeficientError as exc:
        raise BearingConflictError(str(exc)) from None


def build_relaxed_qp(problem: DwbProblem) -> BoxQp:
    """Real-lifted relaxed problem over ``[vec(S); vec(X_e)]``.

    ``vec(S)`` stacks the columns of ``S``; ``vec(X_e)`` stacks the rows of
    ``X_e``. Constraint rows are ordered sample-major, receiver-minor, with comm
    rows before eavesdropper rows inside each sample.
    """
    A = _check_problem(problem)
    grid = problem.grid
    L = grid.n_subcarriers
    n_c, n_e = problem.bearings.n_comm, problem.bearings.n_eve
    N, K = A.shape
    # orthonormalized rows keep the equality Gram matrix at identity
    Q, R = orthonormalize_rows(A)
    T = sla.solve_triangular(R, np.eye(N), trans="C")  # R^{-H}
    eye = sp.identity(L, format="csr")
    E_s = sp.kron(eye, sp.csr_matrix(Q.conj().T), format="csr")
    T_blk = sp.kron(eye, sp.csr_matrix(T), format="csr")

    rhs = np.zeros((N, L), dtype=complex)
    rhs[:n_c] = problem.comm_targets()
    rhs = T_blk @ rhs.T.ravel()

    if n_e:
        h = spoof_matrix_diag(grid, problem.spoof, problem.symbol_index)
        G = idft_matrix(L) * h[None, :]  # G[n, l] = Fh[n, l] h_l
        # row n*N + n_c + i, column i*L + l  ->  -G[n, l]
        rows = (np.arange(L)[:, None, None] * N + n_c + np.arange(n_e)[None, :, None])
        cols = np.arange(n_e)[None, :, None] * L + np.arange(L)[None, None, :]
        vals = np.broadcast_to(-G[:, None, :], (L, n_e, L))
        rows = np.broadcast_to(rows, (L, n_e, L))
        cols = np.broadcast_to(cols, (L, n_e, L))
        E_x = sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(N * L, n_e * L))
        E_x = T_blk @ E_x
    else:
        E_x = sp.csr_matrix((N * L, 0), dtype=complex)

    E_r, r_r = lift_to_real(sp.hstack([E_s, E_x], format="csr"), rhs)
    ks, kx = K * L, n_e * L
    # lifted columns are [Re s, Re x, Im s, Im x]; reorder to [Re s, Im s, Re x, Im x]
    order = np.concatenate([np.arange(ks), ks + kx + np.arange(ks),
                            ks + np.arange(kx), 2 * ks + kx + np.arange(kx)])
    E_r = E_r.tocsc()[:, order]
    return BoxQp(dim_free=2 * ks, dim_boxed=2 * kx, equality_lhs=E_r, equality_rhs=r_r,
                 box_bound=float(np.sqrt(problem.symbol_power)))


def _unpack(problem: DwbProblem, sol: QpSolution):
    L = problem.grid.n_subcarriers
    n_t = problem.geometry.n_antennas
    s = sol.free_block[: n_t * L] + 1j * sol.free_block[n_t * L:]
    kx = sol.boxed_block.size // 2
    x = sol.boxed_block[:kx] + 1j * sol.boxed_block[kx:]
    return s.reshape(L, n_t).T, x.reshape(problem.bearings.n_eve, L)


def solve_dwb(problem: DwbProblem, tol: float = 1e-8, max_iter: int = 5000,
              resolve_after_rounding: bool = True) -> DwbSolution:
    """Relaxed QP, per-axis QAM rounding of ``X_e``, then least-norm re-solve of ``S``.

    With ``resolve_after_rounding=False`` the relaxed ``S`` is emitted as is;
    its eavesdropper rows then carry the relaxed rather than rounded symbols.
    """
    qp = build_relaxed_qp(problem)
    try:
        sol = solve_box_qp(qp, tol=tol, max_iter=max_iter)
    except RankDeficientError as exc:
        raise BearingConflictError(str(exc)) from None
    S_relaxed, X_relaxed = _unpack(problem, sol)
    X_round = qam_nearest(X_relaxed, problem.scaled_constellation)
    X_round = np.asarray(X_round, dtype=complex).reshape(X_relaxed.shape)
    if resolve_after_rounding:
        S = transmit_for_symbols(problem, X_round)
    else:
        S = S_relaxed
    diag = {
        "iterations": sol.iterations,
        "converged": sol.converged,
        "equality_residual": sol.equality_residual,
        "relaxed_objective": sol.objective,
    }
    return DwbSolution(tx_signal=S, deceptive_symbols_relaxed=X_relaxed,
                       deceptive_symbols_rounded=X_round, power_w=tx_power(S),
                       relaxed_power_w=sol.objective, relaxed_tx_signal=S_relaxed,
                       solver_diag=diag)


def solve_nulling(problem: DwbProblem) -> NullingSolution:
    """Least-norm ``S`` with ``A_e S = 0`` and ``A_c S = D_c``."""
    S = transmit_for_symbols(problem, None)
    return NullingSolution(tx_signal=S, power_w=tx_power(S))


def exhaustive_dwb_power(problem: DwbProblem) -> tuple:
    """Minimum power over every discrete ``X_e`` (tiny instances only).

    Returns ``(power, X_e)``.
    """
    n_e, L = problem.bearings.n_eve, problem.grid.n_subcarriers
    pts = problem.scaled_constellation.points
    if pts.size ** (n_e * L) > 200_000:
        raise ValueError("instance too large for enumeration")
    best, best_x = np.inf, None
    for combo in itertools.product(range(pts.size), repeat=n_e * L):
        X = pts[list(combo)].reshape(n_e, L)
        p = tx_power(transmit_for_symbols(problem, X))
        if p < best:
            best, best_x = p, X
    return best, best_x


def constraint_residuals(problem: DwbProblem, S: np.ndarray, X_e: Optional[np.ndarray]) -> tuple:
    """Relative residuals ``(comm, eve)`` of the two equality constraints."""
    A_c, A_e = problem.steering()
    D_c = problem.comm_targets()
    rc = np.linalg.norm(A_c @ S - D_c) / max(np.linalg.norm(D_c), 1e-300)
    if problem.bearings.n_eve == 0:
        return float(rc), 0.0
    if X_e is None:
        D_e = np.zeros((problem.bearings.n_eve, problem.grid.n_subcarriers), complex)
        re = np.linalg.norm(A_e @ S) / max(np.linalg.norm(S), 1e-300)
    else:
        D_e = deceptive_time_signal(problem.grid, problem.spoof, X_e, problem.symbol_index)
        re = np.linalg.norm(A_e @ S - D_e) / max(np.linalg.norm(D_e), 1e-300)
    return float(rc), float(re)
