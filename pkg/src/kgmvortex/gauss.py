"""Gauss equation ``-Lap Phi + u^2 Phi = u^2`` and the reduction ``phi_u = omega Phi_u``.

The system is assembled in weak form, ``(S + diag(w u^2)) Phi = w u^2`` with
``S`` the r-weighted stiffness matrix and ``w`` the cell volumes. ``S`` is an
M-matrix with nonnegative row sums, so the discrete solution obeys
``0 <= Phi <= 1`` exactly; only the linear solve tolerance can move it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cylgrid import CylGrid, stiffness
from .model import ModelParams

log = logging.getLogger(__name__)

DEFAULT_LIN_TOL = 1e-10
BOUND_TOL = 1e-10
DENSE_MAX_UNKNOWNS = 64 * 64


class GaussConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"Gauss solve did not converge: {iterations} iterations, relative residual {residual:.3e}"
        )
        self.iterations = iterations
        self.residual = residual


@dataclass
class GaussSolution:
    Phi: np.ndarray
    iterations: int
    residual: float

    @property
    def excursion(self) -> float:
        """Largest violation of ``0 <= Phi <= 1`` (0 when the bounds hold)."""
        if self.Phi.size == 0:
            return 0.0
        return float(max(0.0, -self.Phi.min(), self.Phi.max() - 1.0))


def check_m_matrix(A: sp.spmatrix) -> None:
    """Assert symmetry, positive diagonal and nonpositive off-diagonal entries."""
    A = sp.csr_matrix(A)
    if abs(A - A.T).max() > 1e-12 * abs(A).max():
        raise AssertionError("Gauss matrix is not symmetric")
    d = A.diagonal()
    if np.any(d <= 0):
        raise AssertionError("Gauss matrix has a nonpositive diagonal entry")
    off = A - sp.diags(d)
    if off.nnz and off.data.max() > 0:
        raise AssertionError("Gauss matrix has a positive off-diagonal entry")


@lru_cache(maxsize=32)
def _checked_stiffness(g: CylGrid) -> sp.csr_matrix:
    S = stiffness(g, "r")
    check_m_matrix(S)
    return S


def assemble_gauss(u: np.ndarray, g: CylGrid) -> tuple[sp.csr_matrix, np.ndarray]:
    """Matrix and right-hand side of the weak-form Gauss system (flattened)."""
    u = g.check(u)
    m = (g.weights * u**2).ravel()
    A = _checked_stiffness(g) + sp.diags(m)
    return A.tocsr(), m


def _pcg(A, b, x0, winv, tol, max_iter):
    """Jacobi-preconditioned CG; the stopping norm is ``sqrt(sum r^2 / w)``."""
    dinv = 1.0 / A.diagonal()
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    bnorm = np.sqrt(np.dot(b * winv, b))
    rel = np.sqrt(np.dot(r * winv, r)) / bnorm
    if rel <= tol:
        return x, 0, rel
    z = dinv * r
    d = z.copy()
    rz = np.dot(r, z)
    for it in range(1, max_iter + 1):
        q = A @ d
        alpha = rz / np.dot(d, q)
        x += alpha * d
        r -= alpha * q
        rel = np.sqrt(np.dot(r * winv, r)) / bnorm
        if rel <= tol:
            # confirm against the true residual to rule out drift
            rel_true = np.sqrt(np.dot((b - A @ x) ** 2, winv)) / bnorm
            if rel_true <= tol:
                return x, it, rel_true
            r = b - A @ x
        z = dinv * r
        rz_new = np.dot(r, z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise GaussConvergenceError(max_iter, float(rel))


def solve_gauss(
    u: np.ndarray,
    g: CylGrid,
    lin_tol: float = DEFAULT_LIN_TOL,
    method: str = "sparse",
    x0: np.ndarray | None = None,
    max_iter: int | None = None,
) -> GaussSolution:
    """Solve for ``Phi_u`` on ``g``.

    Args:
        u: matter amplitude on ``g``.
        lin_tol: relative residual target of ``"cg"``, measured in the L2
            norm of the strong-form residual.
        method: ``"sparse"`` (sparse LU, default), ``"cg"`` (Jacobi-preconditioned
            conjugate gradients) or ``"dense"`` (dense Cholesky, oracle use on
            grids up to 64 x 64). The direct solves keep ``0 <= Phi <= 1`` to
            roundoff; CG at a residual tolerance ``tol`` can overshoot by
            roughly ``tol`` times the condition number.
        x0: optional initial iterate for ``"cg"``.

    Raises:
        GaussConvergenceError: if CG exhausts ``max_iter``.
    """
    if not lin_tol > 0:
        raise ValueError("lin_tol must be positive")
    if method not in ("cg", "sparse", "dense"):
        raise ValueError(f"unknown method {method!r}")
    u = g.check(u)
    if not np.all(np.isfinite(u)):
        raise ValueError("u contains non-finite values")
    A, b = assemble_gauss(u, g)
    if not np.any(b):
        return GaussSolution(g.zeros(), 0, 0.0)
    winv = 1.0 / g.weights.ravel()
    if method == "cg":
        x0f = None if x0 is None else g.check(x0).ravel()
        x, its, rel = _pcg(A, b, x0f, winv, lin_tol, max_iter or 20 * g.size)
    else:
        if method == "dense":
            if g.size > DENSE_MAX_UNKNOWNS:
                raise ValueError(f"dense Gauss solve limited to {DENSE_MAX_UNKNOWNS} unknowns")
            x = scipy.linalg.solve(A.toarray(), b, assume_a="pos")
        else:
            x = spla.spsolve(A.tocsc(), b)
        its = 1
        rel = float(np.sqrt(np.dot((b - A @ x) ** 2, winv) / np.dot(b**2, winv)))
    sol = GaussSolution(x.reshape(g.shape), its, float(rel))
    if sol.excursion > BOUND_TOL:
        log.warning("Gauss solution leaves [0, 1] by %.3e (method %s)", sol.excursion, method)
    return sol


def phi_from_Phi(Phi: np.ndarray, P: ModelParams) -> np.ndarray:
    """Electric potential ``phi = omega Phi``."""
    return P.omega * np.asarray(Phi, dtype=float)


def gauss_residual(u: np.ndarray, Phi: np.ndarray, g: CylGrid) -> np.ndarray:
    """Strong-form residual ``-Lap Phi + u^2 Phi - u^2`` of the discrete system."""
    A, b = assemble_gauss(u, g)
    return ((A @ g.check(Phi).ravel() - b) / g.weights.ravel()).reshape(g.shape)
