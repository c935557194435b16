"""Reduced functional ``I(u, b)``, its gradient, the energy and the field-equation residuals.

Everything is written for the profile representation ``A = b grad(theta)``,
``|grad theta| = 1/r``, on a :class:`~kgmvortex.cylgrid.CylGrid`. With ``w``
the cell volumes, ``S`` and ``S_b`` the two stiffness matrices of
:mod:`kgmvortex.cylgrid` and ``Phi`` the Gauss solution for ``u``::

    I = 1/2 u.S.u + 1/2 b.S_b.b + 1/2 sum w (b-k)^2 u^2 / r^2
        - omega^2/2 [Phi.S.Phi + sum w (1-Phi)^2 u^2] + sum w W(u)

This is the full functional restricted to ``phi = omega Phi_u``. At the
discrete Gauss solution the bracket equals ``sum w (1-Phi) u^2``, giving the
closed form ``-omega^2/2 int (1-Phi) u^2``; the restricted form above is the
default because ``phi`` is stationary there, which makes the value
insensitive (to second order) to the linear-solve tolerance.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .cylgrid import CylGrid, apply_stiffness, dirichlet_energy
from .gauss import DEFAULT_LIN_TOL, solve_gauss
from .model import F, ModelParams, W, Wprime

FORMS = ("manifold", "closed", "rearranged")


@dataclass
class VortexState:
    """Matter amplitude ``u`` and gauge profile ``b`` on one grid."""

    u: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.u.shape != self.b.shape:
            raise ValueError(f"u and b shapes differ: {self.u.shape} vs {self.b.shape}")

    def copy(self) -> "VortexState":
        return VortexState(self.u.copy(), self.b.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.b)))

    @classmethod
    def zeros(cls, g: CylGrid) -> "VortexState":
        return cls(g.zeros(), g.zeros())


@dataclass
class EnergyBreakdown:
    dirichlet_u: float
    gauge_field: float
    coupling: float
    phi_field: float
    potential: float

    @property
    def total(self) -> float:
        return self.dirichlet_u + self.gauge_field + self.coupling + self.phi_field + self.potential

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


def inner(f: np.ndarray, h: np.ndarray, g: CylGrid) -> float:
    """Quadrature inner product ``int f h dx``."""
    return float(np.sum(g.weights * f * h))


def weighted_norm(f: np.ndarray, g: CylGrid) -> float:
    return float(np.sqrt(np.sum(g.weights * f * f)))


def lp_norm_p(u: np.ndarray, g: CylGrid, p: float) -> float:
    """``int |u|^p dx``."""
    return float(np.sum(g.weights * np.abs(u) ** p))


def gauss_for(u: np.ndarray, P: ModelParams, g: CylGrid, lin_tol: float, Phi0=None):
    """``Phi_u`` when the functional needs it (omega != 0), else ``None``."""
    if P.omega == 0.0:
        return None
    return solve_gauss(u, g, lin_tol, x0=Phi0).Phi


def _coupling_mag(u, b, P: ModelParams, g: CylGrid):
    return np.sum(g.weights * (b - P.k) ** 2 * u**2 / g.R**2)


def _electric(u, Phi, P: ModelParams, g: CylGrid, form: str) -> float:
    """The omega-dependent part of ``I``."""
    if P.omega == 0.0 or Phi is None:
        return 0.0
    w2 = P.omega**2
    if form == "manifold":
        return -0.5 * w2 * (
            dirichlet_energy(Phi, g) + np.sum(g.weights * (1.0 - Phi) ** 2 * u**2)
        )
    return -0.5 * w2 * float(np.sum(g.weights * (1.0 - Phi) * u**2))


def reduced_I(
    S: VortexState,
    P: ModelParams,
    g: CylGrid,
    lin_tol: float = DEFAULT_LIN_TOL,
    form: str = "manifold",
    Phi: np.ndarray | None = None,
) -> float:
    """Value of the reduced functional at ``S``.

    Args:
        form: ``"manifold"`` evaluates the full functional at ``phi = omega Phi_u``;
            ``"closed"`` uses ``-omega^2/2 int (1-Phi)u^2 + int W(u)``;
            ``"rearranged"`` uses ``1/2 int (1 - omega^2 (1-Phi)) u^2 - int F(u)``.
            All three agree at the exact Gauss solution.
        Phi: precomputed Gauss solution for ``S.u``; solved for when omitted.
    """
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}")
    u, b = g.check(S.u), g.check(S.b)
    if Phi is None:
        Phi = gauss_for(u, P, g, lin_tol)
    val = 0.5 * dirichlet_energy(u, g, "r") + 0.5 * dirichlet_energy(b, g, "inv_r")
    val += 0.5 * _coupling_mag(u, b, P, g)
    if form == "rearranged":
        reduced = np.ones_like(u) if Phi is None else 1.0 - P.omega**2 * (1.0 - Phi)
        val += 0.5 * np.sum(g.weights * reduced * u**2) - np.sum(g.weights * F(u, P))
    else:
        val += _electric(u, Phi, P, g, form) + np.sum(g.weights * W(u, P))
    return float(val)


def euclidean_gradient(S: VortexState, P: ModelParams, g: CylGrid, Phi=None):
    """Partial derivatives of the discrete ``I`` with respect to every nodal value.

    ``Phi`` must be the Gauss solution of ``S.u`` when ``omega != 0``. No
    term from the dependence of ``Phi`` on ``u`` appears: ``phi`` is stationary.
    """
    u, b = S.u, S.b
    w = g.weights
    inv_r2 = 1.0 / g.R**2
    gu = apply_stiffness(u, g, "r") + w * ((b - P.k) ** 2 * inv_r2 * u + Wprime(u, P))
    if P.omega != 0.0:
        gu -= w * P.omega**2 * (1.0 - Phi) ** 2 * u
    gb = apply_stiffness(b, g, "inv_r") + w * (b - P.k) * u**2 * inv_r2
    return gu, gb


def grad_I(
    S: VortexState,
    P: ModelParams,
    g: CylGrid,
    lin_tol: float = DEFAULT_LIN_TOL,
    Phi: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``I`` in the quadrature inner product.

    ``inner(gu, du) + inner(gb, db)`` is the directional derivative of
    :func:`reduced_I` along ``(du, db)``.
    """
    g.check(S.u), g.check(S.b)
    if Phi is None:
        Phi = gauss_for(S.u, P, g, lin_tol)
    gu, gb = euclidean_gradient(S, P, g, Phi)
    return gu / g.weights, gb / g.weights


def residuals(
    u: np.ndarray,
    Phi: np.ndarray,
    b: np.ndarray,
    P: ModelParams,
    g: CylGrid,
) -> tuple[float, float, float]:
    """L2 norms of the discrete residuals of the three stationary field equations.

    * matter: ``-Lap u + [(b-k)^2/r^2 - (omega Phi - omega)^2] u + W'(u)``
    * Gauss: ``-Lap phi - (omega - phi) u^2`` with ``phi = omega Phi``
    * gauge: the profile ``R = (-b_rr + b_r/r - b_zz) - (k - b) u^2``; the
      curl-curl equation residual is the vector field ``R grad(theta)``, whose
      norm ``(int R^2 / r^2 dx)^(1/2)`` is returned.

    The Laplacians are the conservative stencils of the discrete functional,
    so these are norms of the discrete field equations.
    """
    u, Phi, b = g.check(u), g.check(Phi), g.check(b)
    w = g.weights
    R2 = g.R**2
    om = P.omega
    r1 = (
        apply_stiffness(u, g, "r") / w
        + ((b - P.k) ** 2 / R2 - (om * Phi - om) ** 2) * u
        + Wprime(u, P)
    )
    phi = om * Phi
    r3 = apply_stiffness(phi, g, "r") / w - (om - phi) * u**2
    r4 = R2 * apply_stiffness(b, g, "inv_r") / w - (P.k - b) * u**2
    return weighted_norm(r1, g), weighted_norm(r3, g), weighted_norm(r4 / g.R, g)


def total_energy(
    S: VortexState,
    P: ModelParams,
    g: CylGrid,
    lin_tol: float = DEFAULT_LIN_TOL,
    Phi: np.ndarray | None = None,
) -> EnergyBreakdown:
    """The five addends of the field energy with ``phi = omega Phi_u``."""
    u, b = g.check(S.u), g.check(S.b)
    w = g.weights
    if Phi is None:
        Phi = gauss_for(u, P, g, lin_tol)
    if P.omega == 0.0:
        phi_field = 0.0
        electric = 0.0
    else:
        phi = P.omega * Phi
        phi_field = 0.5 * dirichlet_energy(phi, g)
        electric = float(np.sum(w * (phi - P.omega) ** 2 * u**2))
    return EnergyBreakdown(
        dirichlet_u=0.5 * dirichlet_energy(u, g, "r"),
        gauge_field=0.5 * dirichlet_energy(b, g, "inv_r"),
        coupling=0.5 * (float(_coupling_mag(u, b, P, g)) + electric),
        phi_field=float(phi_field),
        potential=float(np.sum(w * W(u, P))),
    )
