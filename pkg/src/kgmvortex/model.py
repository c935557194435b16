"""The lower-order term ``W(s) = s^2/2 - F(s)`` and the parameters (omega, k, p)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


class ParameterError(ValueError):
    """Raised for parameters outside the admissible region."""


@dataclass(frozen=True)
class ModelParams:
    """Phase frequency ``omega``, winding number ``k`` and exponent ``p``.

    ``c_growth`` is the constant bounding ``|F'(s)| <= c s^(p-1)``; it equals
    1 for the canonical power nonlinearity implemented here.
    """

    omega: float = 0.0
    k: int = 1
    p: float = 4.0
    c_growth: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


def F(s, P: ModelParams):
    """``s^p / p`` for ``s >= 0`` and 0 for ``s < 0``."""
    s = np.asarray(s, dtype=float)
    sp = np.maximum(s, 0.0)
    return sp**P.p / P.p


def Fprime(s, P: ModelParams):
    s = np.asarray(s, dtype=float)
    sp = np.maximum(s, 0.0)
    return sp ** (P.p - 1.0)


def W(s, P: ModelParams):
    """``s^2/2 - s^p/p`` for ``s >= 0``, extended by ``s^2/2`` for ``s < 0``."""
    s = np.asarray(s, dtype=float)
    return 0.5 * s**2 - F(s, P)


def Wprime(s, P: ModelParams):
    s = np.asarray(s, dtype=float)
    return s - Fprime(s, P)


def omega_p(p: float) -> float:
    """Upper bound ``min(1, sqrt((p-2)/2))`` on the admissible ``|omega|``."""
    if not 2.0 < p < 6.0:
        raise ParameterError(f"p must lie in (2, 6), got {p}")
    return min(1.0, math.sqrt((p - 2.0) / 2.0))


def validate(P: ModelParams) -> list[str]:
    """Return every violated admissibility condition; an empty list means ok."""
    problems = []
    if not 2.0 < P.p < 6.0:
        problems.append(f"p out of (2,6): p = {P.p}")
    if int(P.k) != P.k:
        problems.append(f"k must be an integer: k = {P.k}")
    if not math.isfinite(P.omega):
        problems.append(f"omega must be finite: omega = {P.omega}")
        return problems
    w2 = P.omega**2
    if w2 >= 1.0:
        problems.append(f"ω² ≥ 1 (ω² = {w2:g}); need ω² < min(1,(p−2)/2)")
    if 2.0 < P.p < 6.0 and w2 >= (P.p - 2.0) / 2.0:
        problems.append(
            f"ω² ≥ (p−2)/2 ({w2:g} ≥ {(P.p - 2.0) / 2.0:g}); need ω² < min(1,(p−2)/2)"
        )
    return problems


def check_params(P: ModelParams) -> ModelParams:
    """Raise :class:`ParameterError` listing all violations, else return ``P``."""
    problems = validate(P)
    if problems:
        raise ParameterError("; ".join(problems))
    return P


def ps_constant(P: ModelParams) -> float:
    """Lower constant ``C_*`` of the pointwise PS-boundedness inequality.

    ``(1/2 - 1/p)(1 - omega^2)`` for ``p >= 4``; for ``p < 4`` the extra
    ``(1/2 - 2/p) omega^2`` is added because the mixed term changes sign.
    """
    c = (0.5 - 1.0 / P.p) * (1.0 - P.omega**2)
    if P.p < 4.0:
        c += (0.5 - 2.0 / P.p) * P.omega**2
    return c


def ps_integrand(u, Phi, P: ModelParams):
    """``W(u) - W'(u)u/p + (phi-omega)^2 u^2/p - omega(omega-phi)u^2/2`` with ``phi = omega Phi``."""
    u = np.asarray(u, dtype=float)
    phi = P.omega * np.asarray(Phi, dtype=float)
    w = P.omega
    return (
        W(u, P)
        - Wprime(u, P) * u / P.p
        + (phi - w) ** 2 * u**2 / P.p
        - 0.5 * w * (w - phi) * u**2
    )
