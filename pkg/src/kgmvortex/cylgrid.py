"""Truncated axisymmetric (r, z) mesh, volume quadrature and difference operators.

The mesh is cell-centered::

    r_i = (i + 1/2) * hr,            i = 0 .. nr-1
    z_j = -z_half + (j + 1/2) * hz,  j = 0 .. nz-1

so no node sits on the axis r = 0. Fields are plain ``numpy`` arrays of shape
``(nr, nz)``; flattening in C order gives the documented row-major layout
with the z index running fastest.

Two weak-form (quadrature weighted) quadratic forms are assembled here:

* ``stiffness(grid, "r")`` realizes ``int |grad f|^2 dx`` for axisymmetric f
  (face weight r). The axis face has zero measure, outer faces are
  homogeneous Dirichlet.
* ``stiffness(grid, "inv_r")`` realizes ``2 pi int |grad b|^2 / r dr dz``,
  the Dirichlet energy of the vector field ``b grad(theta)``. Every radial
  interval carries the energy of the interpolant ``alpha + beta r^2``, the
  homogeneous solutions of ``-b_rr + b_r/r = 0``; this reduces to the usual
  face weight ``1/r_face`` in the interior and gives the finite value
  ``2 b_0^2 / r_0^2`` on the half cell touching the axis where ``b = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Literal

import numpy as np
import scipy.sparse as sp

TWO_PI = 2.0 * np.pi


class InvalidDimensionError(ValueError):
    """Raised when grid dimensions violate their preconditions."""


class GridMismatchError(ValueError):
    """Raised when a field does not live on the grid it is used with."""


@dataclass(frozen=True)
class CylGrid:
    """Cell-centered mesh of the cylinder ``r <= r_max, |z| <= z_half``."""

    r_max: float
    z_half: float
    nr: int
    nz: int

    @property
    def hr(self) -> float:
        return self.r_max / self.nr

    @property
    def hz(self) -> float:
        return 2.0 * self.z_half / self.nz

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nr, self.nz)

    @property
    def size(self) -> int:
        return self.nr * self.nz

    @cached_property
    def r(self) -> np.ndarray:
        return (np.arange(self.nr) + 0.5) * self.hr

    @cached_property
    def z(self) -> np.ndarray:
        return -self.z_half + (np.arange(self.nz) + 0.5) * self.hz

    @cached_property
    def R(self) -> np.ndarray:
        """Radial coordinate broadcast to field shape."""
        return np.broadcast_to(self.r[:, None], self.shape)

    @cached_property
    def Z(self) -> np.ndarray:
        return np.broadcast_to(self.z[None, :], self.shape)

    @cached_property
    def weights(self) -> np.ndarray:
        """Cell volumes ``2 pi r_i hr hz`` (exact annulus measure)."""
        return TWO_PI * self.R * self.hr * self.hz

    def check(self, f: np.ndarray) -> np.ndarray:
        """Return ``f`` as a float array, raising if it is not a field on this grid."""
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise GridMismatchError(f"field of shape {f.shape} does not match grid {self.shape}")
        return f

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def refine(self, factor: int = 2) -> "CylGrid":
        return CylGrid(self.r_max, self.z_half, self.nr * factor, self.nz * factor)

    def to_dict(self) -> dict:
        return {"r_max": self.r_max, "z_half": self.z_half, "nr": self.nr, "nz": self.nz}


def make_grid(r_max: float, z_half: float, nr: int, nz: int) -> CylGrid:
    """Build a validated :class:`CylGrid`.

    Raises:
        InvalidDimensionError: if a length is not positive or a cell count is below 4.
    """
    if not (np.isfinite(r_max) and np.isfinite(z_half)) or r_max <= 0 or z_half <= 0:
        raise InvalidDimensionError(f"r_max and z_half must be positive, got {r_max}, {z_half}")
    if int(nr) != nr or int(nz) != nz or nr < 4 or nz < 4:
        raise InvalidDimensionError(f"nr and nz must be integers >= 4, got {nr}, {nz}")
    return CylGrid(float(r_max), float(z_half), int(nr), int(nz))


def integrate_volume(f: np.ndarray, g: CylGrid) -> float:
    """Integral over the truncated cylinder of an axisymmetric integrand.

    Computes ``2 pi sum_ij f_ij r_i hr hz``. This is exact for integrands of
    the form ``(a + b/r)(c + d z)``, since then ``f r`` is linear in both
    variables on every cell.
    """
    f = g.check(f)
    return float(np.sum(f * g.weights))


def grad2d(f: np.ndarray, g: CylGrid) -> tuple[np.ndarray, np.ndarray]:
    """``(d/dr, d/dz)`` by central differences, second-order one-sided at the edges."""
    f = g.check(f)
    fr, fz = np.gradient(f, g.hr, g.hz, edge_order=2)
    return fr, fz


def ghost_extend(
    f: np.ndarray,
    g: CylGrid,
    axis_parity: Literal["even", "odd"] = "odd",
    outer: Literal["dirichlet0"] = "dirichlet0",
) -> np.ndarray:
    """Pad ``f`` with one ghost layer, returning an ``(nr+2, nz+2)`` array.

    The axis ghost mirrors the first cell with sign +1 (even) or -1 (odd).
    Outer ghosts are the negated boundary cell, so the linear interpolant
    vanishes on the outer faces.
    """
    f = g.check(f)
    if axis_parity not in ("even", "odd"):
        raise ValueError(f"unknown axis parity {axis_parity!r}")
    if outer != "dirichlet0":
        raise ValueError(f"unknown outer rule {outer!r}")
    sign = 1.0 if axis_parity == "even" else -1.0
    ext = np.empty((g.nr + 2, g.nz + 2))
    ext[1:-1, 1:-1] = f
    ext[0, 1:-1] = sign * f[0]
    ext[-1, 1:-1] = -f[-1]
    ext[:, 0] = -ext[:, 1]
    ext[:, -1] = -ext[:, -2]
    return ext


def _difference_matrix(n: int) -> sp.csr_matrix:
    """(n+1) x n face differences with zero boundary values on both ends."""
    main = np.ones(n + 1)
    return sp.diags([main[:n], -main[:n]], [0, -1], shape=(n + 1, n), format="csr")


def _radial_face_weights(g: CylGrid, weight: str) -> np.ndarray:
    hr, r = g.hr, g.r
    faces = np.arange(g.nr + 1) * hr
    if weight == "r":
        c = faces / hr
        c[-1] = 2.0 * g.r_max / hr  # half cell next to the outer wall
        return c
    # interpolant alpha + beta r^2 on each interval between sample points
    left = np.concatenate(([0.0], r))
    right = np.concatenate((r, [g.r_max]))
    return 2.0 / (right**2 - left**2)


@lru_cache(maxsize=32)
def stiffness(g: CylGrid, weight: Literal["r", "inv_r"] = "r") -> sp.csr_matrix:
    """Symmetric matrix ``S`` with ``f @ S @ f`` approximating the weighted Dirichlet energy.

    ``weight="r"`` gives ``int |grad f|^2 dx``; ``weight="inv_r"`` gives
    ``2 pi int (f_r^2 + f_z^2)/r dr dz``. Both carry the full ``2 pi`` factor
    and homogeneous Dirichlet conditions on ``r = r_max`` and ``|z| = z_half``.
    The inverse-r form also imposes ``f = 0`` on the axis.
    """
    if weight not in ("r", "inv_r"):
        raise ValueError(f"unknown weight {weight!r}")
    Dr = _difference_matrix(g.nr)
    Dz = _difference_matrix(g.nz)
    cr = _radial_face_weights(g, weight)
    Lr = (Dr.T @ sp.diags(cr) @ Dr) * (TWO_PI * g.hz)
    ez = np.ones(g.nz + 1)
    ez[0] = ez[-1] = 2.0
    Lz = (Dz.T @ sp.diags(ez) @ Dz) / g.hz
    if weight == "r":
        az = TWO_PI * g.r * g.hr
    else:
        az = TWO_PI * g.hr / g.r
    S = sp.kron(Lr, sp.identity(g.nz)) + sp.kron(sp.diags(az), Lz)
    S = S.tocsr()
    S.sort_indices()
    return S


def apply_stiffness(f: np.ndarray, g: CylGrid, weight: str = "r") -> np.ndarray:
    """``S f`` reshaped to field shape (Euclidean gradient of ``f.S.f / 2``)."""
    return (stiffness(g, weight) @ f.ravel()).reshape(g.shape)


def dirichlet_energy(f: np.ndarray, g: CylGrid, weight: str = "r") -> float:
    f = g.check(f)
    v = f.ravel()
    return float(v @ (stiffness(g, weight) @ v))


def laplacian(f: np.ndarray, g: CylGrid) -> np.ndarray:
    """Conservative discrete ``f_rr + f_r/r + f_zz`` (regular on the axis)."""
    f = g.check(f)
    return -apply_stiffness(f, g, "r") / g.weights


def profile_curlcurl(a: np.ndarray, g: CylGrid) -> np.ndarray:
    """Discrete ``-a_rr + a_r/r - a_zz``, the curl-curl of ``a grad(theta)`` in profile form."""
    a = g.check(a)
    return g.R**2 * apply_stiffness(a, g, "inv_r") / g.weights
