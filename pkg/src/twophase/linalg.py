"""Sparse SPD solves.

The direct path is SuperLU run without row pivoting and with a symmetric
fill-reducing ordering, which makes it an LDL^T factorization; a
nonpositive pivot then certifies that the matrix is not positive definite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class FactorizationError(np.linalg.LinAlgError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, x=None, iterations=0, residual=np.inf):
        super().__init__(message)
        self.x = x
        self.iterations = iterations
        self.residual = residual


# a pivot below this fraction of its own diagonal entry counts as zero
PIVOT_TOL = 1e-14


@dataclass(frozen=True)
class SpdFactor:
    lu: spla.SuperLU
    n: int
    perm: np.ndarray

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve_with_factor(self, rhs)


def factorize_spd(A) -> SpdFactor:
    A = sp.csc_matrix(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise FactorizationError("matrix is not square")
    if n == 0:
        raise FactorizationError("empty matrix")
    if abs(A - A.T).max() > 1e-12 * max(abs(A).max(), 1.0):
        raise FactorizationError("matrix is not symmetric")
    try:
        lu = spla.splu(
            A,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:  # exactly singular
        raise FactorizationError(str(exc)) from exc
    if not (np.array_equal(lu.perm_r, lu.perm_c)):
        raise FactorizationError("factorization used off-diagonal pivots")
    pivots = lu.U.diagonal()
    diag = A.diagonal()[lu.perm_c]
    bad = pivots <= PIVOT_TOL * np.abs(diag)
    if np.any(bad):
        raise FactorizationError(f"nonpositive pivot {pivots[bad].min():.3e}")
    perm = lu.perm_c.copy()
    perm.setflags(write=False)
    return SpdFactor(lu=lu, n=n, perm=perm)


@dataclass(frozen=True)
class LuFactor:
    lu: spla.SuperLU
    n: int

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ValueError(f"rhs has {rhs.shape[0]} rows, factor has {self.n}")
        return self.lu.solve(rhs)


def factorize_indefinite(A) -> LuFactor:
    """Pivoted sparse LU for symmetric indefinite (saddle point) matrices."""
    A = sp.csc_matrix(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or n == 0:
        raise FactorizationError("matrix must be square and nonempty")
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise FactorizationError(str(exc)) from exc
    return LuFactor(lu=lu, n=n)


def solve_with_factor(f: SpdFactor, rhs) -> np.ndarray:
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != f.n:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, factor has {f.n}")
    return f.lu.solve(rhs)


def cg_solve(apply_A, rhs, tol: float = 1e-10, maxit: int = 1000, x0=None):
    """Plain conjugate gradients on a symmetric positive definite operator.

    Returns ``(x, iterations)``.  Raises ``ConvergenceError`` carrying the
    best iterate when the relative residual stays above ``tol`` after
    ``maxit`` steps, or when a direction of nonpositive curvature shows up.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(rhs, dtype=float)
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    r = b - apply_A(x)
    p = r.copy()
    rr = r @ r
    best, best_res = x.copy(), np.sqrt(rr) / bnorm
    for it in range(1, maxit + 1):
        if best_res <= tol:
            return best, it - 1
        Ap = apply_A(p)
        curv = p @ Ap
        if curv <= 0.0:
            raise ConvergenceError("nonpositive curvature", best, it, best_res)
        step = rr / curv
        x = x + step * p
        r = r - step * Ap
        rr_new = r @ r
        res = np.sqrt(rr_new) / bnorm
        if res < best_res:
            best, best_res = x.copy(), res
        p = r + (rr_new / rr) * p
        rr = rr_new
    if best_res <= tol:
        return best, maxit
    raise ConvergenceError("iteration limit reached", best, maxit, best_res)
