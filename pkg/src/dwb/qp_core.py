"""Least-norm and box-constrained QP machinery used by the beamformer.

The generic problem handled here is

    minimize    ||u||^2
    subject to  E_u u + E_x x = r,   |x_i| <= b

with ``u`` the power-penalized (free) block and ``x`` the boxed block. Because
only ``u`` is penalized, ``u`` can be eliminated in closed form, which leaves a
box-constrained least-squares problem in ``x`` alone.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RANK_RTOL = 1e-10


class RankDeficientError(ValueError):
    """Constraint matrix is (numerically) rank deficient."""


class InfeasibleError(ValueError):
    """Equality constraints cannot be met."""


@dataclass(frozen=True)
class LeastNormProblem:
    constraint_matrix: np.ndarray
    targets: np.ndarray


@dataclass(frozen=True)
class BoxQp:
    dim_free: int
    dim_boxed: int
    equality_lhs: object  # ndarray or scipy sparse, shape (n_eq, dim_free + dim_boxed)
    equality_rhs: np.ndarray
    box_bound: float


@dataclass
class QpSolution:
    free_block: np.ndarray
    boxed_block: np.ndarray
    objective: float
    equality_residual: float
    iterations: int
    converged: bool


def lift_to_real(A, b=None):
    """Embed ``A z = b`` (complex) as ``[[Re A, -Im A], [Im A, Re A]] [Re z; Im z] = [Re b; Im b]``."""
    if sp.issparse(A):
        A = sp.csr_matrix(A)
        Ar = sp.bmat([[A.real, -A.imag], [A.imag, A.real]], format="csr")
    else:
        A = np.asarray(A)
        Ar = np.block([[A.real, -A.imag], [A.imag, A.real]])
    if b is None:
        return Ar
    b = np.asarray(b)
    return Ar, np.concatenate([b.real, b.imag])


def unlift(z_real: np.ndarray) -> np.ndarray:
    z_real = np.asarray(z_real, dtype=float)
    n = z_real.shape[0] // 2
    return z_real[:n] + 1j * z_real[n:]


def check_full_row_rank(A: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Return singular values of ``A``; raise if the smallest is below ``rtol`` times the largest."""
    A = np.asarray(A)
    if A.shape[0] == 0:
        return np.zeros(0)
    if A.shape[0] > A.shape[1]:
        raise RankDeficientError(f"{A.shape[0]} constraints exceed {A.shape[1]} unknowns")
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= rtol * sv[0]:
        raise RankDeficientError(
            f"constraint matrix is rank deficient (sigma_min/sigma_max = {sv[-1] / sv[0]:.3e})")
    return sv


def orthonormalize_rows(A: np.ndarray):
    """Return ``(Q, R)`` with ``A = R^H Q^H`` and ``Q`` having orthonormal columns.

    ``A x = t`` is then equivalent to ``Q^H x = R^{-H} t``, whose Gram matrix
    is the identity regardless of how close the rows of ``A`` are.
    """
    return np.linalg.qr(np.asarray(A).conj().T, mode="reduced")


def least_norm_solve(problem: LeastNormProblem) -> np.ndarray:
    """Minimum-Frobenius-norm ``S`` with ``A S = D``, i.e. ``A^H (A A^H)^{-1} D``."""
    A = np.asarray(problem.constraint_matrix)
    D = np.asarray(problem.targets)
    squeeze = D.ndim == 1
    D = D[:, None] if squeeze else D
    if D.shape[0] != A.shape[0]:
        raise ValueError("targets must have one row per constraint")
    if A.shape[0] == 0:
        S = np.zeros((A.shape[1], D.shape[1]), dtype=np.result_type(A, D, float))
        return S[:, 0] if squeeze else S
    check_full_row_rank(A)
    Q, R = orthonormalize_rows(A)
    S = Q @ sla.solve_triangular(R, D, trans="C")
    resid = np.linalg.norm(A @ S - D)
    if resid > 1e-9 * max(np.linalg.norm(D), np.finfo(float).tiny):
        raise RankDeficientError(f"least-norm residual {resid:.3e} too large; system is ill-conditioned")
    return S[:, 0] if squeeze else S


class _GramSolver:
    """Factorization of ``E_u E_u^T`` (dense Cholesky or sparse LU)."""

    def __init__(self, E_u):
        self.sparse = sp.issparse(E_u)
        if self.sparse:
            M = (E_u @ E_u.T).tocsc()
            diag = M.diagonal()
            if diag.size and diag.min() <= 0:
                raise RankDeficientError("free block does not reach every equality row")
            try:
                self._lu = spla.splu(M)
            except RuntimeError as exc:
                raise RankDeficientError(f"equality Gram matrix is singular: {exc}") from None
            piv = np.abs(self._lu.U.diagonal())
            if piv.size and piv.min() <= RANK_RTOL ** 2 * piv.max():
                raise RankDeficientError("equality Gram matrix is numerically singular")
        else:
            M = E_u @ E_u.T
            try:
                self._cho = sla.cho_factor(M)
            except np.linalg.LinAlgError:
                raise RankDeficientError("equality Gram matrix is not positive definite") from None
            d = np.abs(np.diag(self._cho[0])) ** 2
            if d.size and d.min() <= RANK_RTOL ** 2 * d.max():
                raise RankDeficientError("equality Gram matrix is numerically singular")

    def solve(self, rhs):
        rhs = rhs.toarray() if sp.issparse(rhs) else np.asarray(rhs, dtype=float)
        if self.sparse:
            return self._lu.solve(rhs)
        return sla.cho_solve(self._cho, rhs)


def _split(problem: BoxQp):
    E = problem.equality_lhs
    E = sp.csc_matrix(E) if sp.issparse(E) else np.asarray(E, dtype=float)
    n_free = problem.dim_free
    if E.shape[1] != n_free + problem.dim_boxed:
        raise ValueError("equality_lhs width does not match block sizes")
    return E[:, :n_free], E[:, n_free:], np.asarray(problem.equality_rhs, dtype=float)


def _dense(X):
    return X.toarray() if sp.issparse(X) else np.asarray(X)


def solve_box_qp(problem: BoxQp, tol: float = 1e-8, max_iter: int = 5000) -> QpSolution:
    """Solve the box-constrained least-power problem.

    The unboxed KKT point is computed first by a direct factorization. If its
    boxed block already lies in the box it is optimal. Otherwise an ADMM
    refinement runs on the reduced problem, followed by an active-set polish
    that makes the solution exact when the active set has been identified.
    """
    E_u, E_x, r = _split(problem)
    gram = _GramSolver(E_u)
    nb = problem.dim_boxed
    bound = float(problem.box_bound)

    def finish(x, iterations, converged):
        lam = gram.solve(r - (E_x @ x if nb else 0.0))
        u = np.asarray(E_u.T @ lam).ravel()
        resid = np.linalg.norm(E_u @ u + (E_x @ x if nb else 0.0) - r)
        return QpSolution(u, x, float(u @ u), float(resid), iterations, converged)

    if nb == 0:
        return finish(np.zeros(0), 0, True)

    if sp.issparse(E_x) and E_x.nnz > 0.05 * E_x.shape[0] * E_x.shape[1]:
        E_x = E_x.toarray()
    MinvEx = gram.solve(E_x)
    H = _dense(E_x.T @ MinvEx)
    H = 0.5 * (H + H.T)
    g = np.asarray(E_x.T @ gram.solve(r)).ravel()

    try:
        x = sla.cho_solve(sla.cho_factor(H), g)
        w = V = None
    except np.linalg.LinAlgError:
        # flat directions: any minimizer has the same objective, take the min-norm one
        w, V = np.linalg.eigh(H)
        keep = w > 1e-14 * w.max()
        x = V[:, keep] @ ((V[:, keep].T @ g) / w[keep])
    if np.all(np.abs(x) <= bound):
        return finish(x, 0, True)

    if w is None:
        w, V = np.linalg.eigh(H)
    w = np.maximum(w, 0.0)
    x, iters, ok = _admm_box(H, w, V, g, bound, x, tol, max_iter)
    return finish(x, iters, ok)


def _admm_box(H, w, V, g, bound, x0, tol, max_iter):
    """ADMM on ``min 1/2 x^T H x - g^T x`` s.t. ``|x| <= bound`` with ``H = V diag(w) V^T``.

    Whenever the active set has been stable for a few iterations an exact
    polish on that set is attempted; a successful polish ends the run.
    """
    rho = 1.0
    z = np.clip(x0, -bound, bound)
    y = np.zeros_like(z)  # scaled dual
    Vtg = V.T @ g
    pattern, stable, tried = None, 0, set()
    for it in range(1, max_iter + 1):
        x = V @ ((Vtg + rho * (V.T @ (z - y))) / (w + rho))
        z_prev = z
        z = np.clip(x + y, -bound, bound)
        y = y + x - z
        r_pri = np.linalg.norm(x - z)
        r_dual = rho * np.linalg.norm(z - z_prev)
        eps_pri = tol * max(1.0, np.linalg.norm(x), np.linalg.norm(z))
        eps_dual = tol * max(1.0, rho * np.linalg.norm(y))
        if r_pri <= eps_pri and r_dual <= eps_dual:
            polished = _polish(H, g, z, bound)
            return (z if polished is None else polished), it, True

        active = np.sign(z) * (np.abs(z) >= bound)
        key = active.tobytes()
        stable = stable + 1 if key == pattern else 0
        pattern = key
        if stable >= 5 and key not in tried:
            tried.add(key)
            polished = _polish(H, g, z, bound)
            if polished is not None:
                return polished, it, True

        if r_pri > 10 * r_dual:
            rho *= 10.0
            y /= 10.0
        elif r_dual > 10 * r_pri:
            rho /= 10.0
            y *= 10.0
    polished = _polish(H, g, z, bound)
    if polished is not None:
        return polished, max_iter, True
    return z, max_iter, False


def _polish(H, g, x, bound):
    """Re-solve on the identified free set; return the exact optimum or ``None``."""
    upper = x >= bound
    lower = x <= -bound
    free = ~(upper | lower)
    xp = np.where(upper, bound, np.where(lower, -bound, 0.0))
    if free.any():
        Hff = H[np.ix_(free, free)]
        rhs = g[free] - H[np.ix_(free, ~free)] @ xp[~free]
        try:
            xp[free] = sla.solve(Hff, rhs, assume_a="pos")
        except (np.linalg.LinAlgError, sla.LinAlgError):
            return None
        if np.any(np.abs(xp[free]) > bound * (1 + 1e-12)):
            return None
        xp = np.clip(xp, -bound, bound)
    grad = H @ xp - g
    scale = max(np.linalg.norm(g), 1.0)
    # multipliers must push outward at active bounds
    if np.any(grad[upper] > 1e-9 * scale) or np.any(grad[lower] < -1e-9 * scale):
        return None
    return xp


def kkt_residual(problem: BoxQp, solution: QpSolution) -> Tuple[float, float, float]:
    """Norms of (stationarity, primal feasibility, box violation)."""
    E_u, E_x, r = _split(problem)
    u = np.asarray(solution.free_block, dtype=float)
    x = np.asarray(solution.boxed_block, dtype=float)
    bound = float(problem.box_bound)
    Ex_x = E_x @ x if problem.dim_boxed else 0.0
    primal = float(np.linalg.norm(E_u @ u + Ex_x - r))
    box = float(np.max(np.abs(x)) - bound) if x.size else 0.0
    box = max(box, 0.0)

    # multipliers that best explain 2u + E_u^T lam = 0
    gram = _GramSolver(E_u)
    lam = -2.0 * gram.solve(np.asarray(E_u @ u).ravel())
    stat_u = 2.0 * u + np.asarray(E_u.T @ lam).ravel()
    if x.size:
        gx = np.asarray(E_x.T @ lam).ravel()
        at_up = x >= bound
        at_lo = x <= -bound
        viol = np.where(at_up, np.maximum(gx, 0.0), np.where(at_lo, np.maximum(-gx, 0.0), np.abs(gx)))
    else:
        viol = np.zeros(0)
    stationarity = float(np.sqrt(stat_u @ stat_u + viol @ viol))
    return stationarity, primal, box
