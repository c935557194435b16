"""Numerical stress tests of the identities the reduction relies on.

Every check returns a :class:`CheckReport` (name, parameters, measurements,
pass flag, seed) that serializes to one JSON document. The checks are
independent of the solver.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.ndimage import gaussian_filter

from .cylgrid import CylGrid, dirichlet_energy, profile_curlcurl
from .functional import VortexState, reduced_I
from .gauss import DEFAULT_LIN_TOL, solve_gauss
from .model import ModelParams, check_params

Profile = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class CheckReport:
    name: str
    parameters: dict
    measurements: dict
    passed: bool
    seed: int | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def smooth_noise(g: CylGrid, rng: np.random.Generator, sigma_cells: float = 3.0,
                 margin: int = 3) -> np.ndarray:
    """Nonnegative smoothed noise, zero within ``margin`` cells of the outer walls, max 1."""
    f = gaussian_filter(rng.standard_normal(g.shape), sigma_cells, mode="nearest") ** 2
    f[-margin:, :] = 0.0
    f[:, :margin] = 0.0
    f[:, -margin:] = 0.0
    m = f.max()
    return f / m if m > 0 else f


def random_state(g: CylGrid, rng: np.random.Generator, amplitude: float = 1.0) -> VortexState:
    """Smooth random ``(u, b)``; ``u`` vanishes linearly at the axis like a winding profile."""
    r_scale = g.R / g.r_max
    u = amplitude * smooth_noise(g, rng) * np.minimum(1.0, 8 * r_scale)
    b = amplitude * (smooth_noise(g, rng) - 0.5 * smooth_noise(g, rng)) * np.minimum(1.0, 8 * r_scale) ** 2
    return VortexState(u, b)


# --- Gauss equation -----------------------------------------------------------------


def check_max_principle(trials: int = 50, g: CylGrid | None = None, seed: int = 0,
                        lin_tol: float = DEFAULT_LIN_TOL, bound: float = 1e-10) -> CheckReport:
    """Random nonnegative ``u`` with amplitudes log-uniform in [1e-2, 1e2]; ``Phi_u`` stays in [0, 1]."""
    g = g or CylGrid(12.0, 12.0, 64, 64)
    rng = np.random.default_rng(seed)
    lows, highs, amps, violations = [], [], [], 0
    for _ in range(int(trials)):
        amp = 10.0 ** rng.uniform(-2.0, 2.0)
        u = amp * smooth_noise(g, rng)
        Phi = solve_gauss(u, g, lin_tol).Phi
        lo, hi = float(Phi.min()), float(Phi.max())
        lows.append(lo)
        highs.append(hi)
        amps.append(amp)
        if lo < -bound or hi > 1.0 + bound:
            violations += 1
    worst = max([0.0] + [-x for x in lows] + [x - 1.0 for x in highs])
    return CheckReport(
        name="max_principle",
        parameters={"trials": trials, "grid": g.to_dict(), "lin_tol": lin_tol, "bound": bound},
        measurements={"min_Phi": min(lows, default=0.0), "max_Phi": max(highs, default=0.0),
                      "worst_excursion": worst, "violations": violations,
                      "max_amplitude": max(amps, default=0.0)},
        passed=violations == 0,
        seed=seed,
    )


def check_gauss_oracle(trials: int = 5, g: CylGrid | None = None, seed: int = 0,
                       lin_tol: float = 1e-12, tol: float = 1e-8) -> CheckReport:
    """Iterative and dense direct Gauss solves agree."""
    g = g or CylGrid(12.0, 12.0, 48, 48)
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(int(trials)):
        u = 10.0 ** rng.uniform(-1.0, 1.0) * smooth_noise(g, rng)
        it = solve_gauss(u, g, lin_tol, method="cg").Phi
        dense = solve_gauss(u, g, method="dense").Phi
        errs.append(float(np.linalg.norm(it - dense) / np.linalg.norm(dense)))
    return CheckReport(
        name="gauss_oracle",
        parameters={"trials": trials, "grid": g.to_dict(), "lin_tol": lin_tol, "tol": tol},
        measurements={"rel_errors": errs, "max_rel_error": max(errs)},
        passed=max(errs) < tol,
        seed=seed,
    )


# --- 3D sampling ----------------------------------------------------------------------


def _axis(n: int, L: float) -> tuple[np.ndarray, float]:
    h = 2.0 * L / n
    return -L + (np.arange(n) + 0.5) * h, h


def _sample_A(prof: Profile, n: int, L: float, Lz: float):
    """``A = b grad(theta) = b/r^2 (x2, -x1, 0)`` on a cell-centered lattice (no point on the axis)."""
    x, h = _axis(n, L)
    zz, hz = _axis(n, Lz)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    r = np.hypot(X1, X2)
    c = prof(r[:, :, None], zz[None, None, :]) / (r**2)[:, :, None]
    A1 = c * X2[:, :, None]
    A2 = -c * X1[:, :, None]
    return (A1, A2), (h, h, hz), (X1, X2, zz)


def _energies_3d(prof: Profile, n: int, L: float, Lz: float) -> dict:
    """``int (div A)^2``, ``int |curl A|^2``, ``int |grad A|^2`` by central differences.

    Partial derivatives are formed one at a time and folded into running sums,
    so peak memory is a handful of ``n^3`` arrays.
    """
    (A1, A2), (h1, h2, h3), _ = _sample_A(prof, n, L, Lz)
    dV = h1 * h2 * h3
    grad_sq = 0.0
    div = np.zeros_like(A1)
    curl3 = np.zeros_like(A1)   # d1 A2 - d2 A1
    curl1 = np.zeros_like(A1)   # -d3 A2   (A3 = 0)
    curl2 = np.zeros_like(A1)   # d3 A1
    for comp, A in ((1, A1), (2, A2)):
        for ax, hh in ((0, h1), (1, h2), (2, h3)):
            d = np.gradient(A, hh, axis=ax, edge_order=2)
            grad_sq += float(np.sum(d * d))
            if ax == comp - 1:
                div += d
            if comp == 1 and ax == 1:
                curl3 -= d
            elif comp == 2 and ax == 0:
                curl3 += d
            elif comp == 2 and ax == 2:
                curl1 -= d
            elif comp == 1 and ax == 2:
                curl2 += d
            del d
    curl_sq = float(np.sum(curl1**2) + np.sum(curl2**2) + np.sum(curl3**2))
    return {"div": float(np.sum(div**2)) * dV, "curl": curl_sq * dV, "grad": grad_sq * dV}


def _gaussian_profile(r, z):
    return r**2 * np.exp(-(r**2) - z**2)


def _profile_on_grid(b, g: CylGrid) -> tuple[np.ndarray, Profile]:
    """Grid values and a callable for ``b`` given either as a callable or as grid data."""
    if callable(b):
        return b(g.R, g.Z), b
    vals = g.check(b)
    spline = RectBivariateSpline(g.r, g.z, vals, kx=3, ky=3)

    def prof(r, z):
        r, z = np.broadcast_arrays(r, z)
        out = spline.ev(r.ravel(), z.ravel()).reshape(r.shape)
        inside = (r <= g.r_max) & (np.abs(z) <= g.z_half)
        return np.where(inside, out, 0.0)

    return vals, prof


def check_palla_3d(b: Profile | np.ndarray | None = None, g: CylGrid | None = None,
                   n3d: tuple[int, ...] | int = (32, 64, 128), box: float = 4.0,
                   div_frac: float = 0.01, min_order: float = 1.5,
                   match_2d: float = 0.02) -> CheckReport:
    """3D Cartesian energies of ``A = b grad(theta)`` against ``2 pi int |grad b|^2 / r``.

    ``b`` is a callable of ``(r, z)`` or a field on ``g`` (then sampled by a
    bicubic spline); the default is ``r^2 exp(-r^2 - z^2)``. The box
    ``[-box, box]^3`` must contain the support up to negligible tails.
    """
    b = _gaussian_profile if b is None else b
    g = g or CylGrid(box, box, 128, 256)
    levels = [n3d] if isinstance(n3d, int) else list(n3d)
    vals, prof = _profile_on_grid(b, g)
    e2d = dirichlet_energy(vals, g, "inv_r")
    rows = [dict(n3d=n, **_energies_3d(prof, n, box, box)) for n in levels]
    gaps = [abs(row["curl"] - row["grad"]) for row in rows]
    for row, gap in zip(rows, gaps):
        row["gap"] = gap
        row["div_frac"] = row["div"] / row["grad"] if row["grad"] > 0 else 0.0
    orders = [math.log2(gaps[i] / gaps[i + 1]) if gaps[i + 1] > 0 and gaps[i] > 0 else math.inf
              for i in range(len(gaps) - 1)]
    fine = rows[-1]
    if fine["grad"] == 0 and e2d == 0:
        return CheckReport("palla_3d", {"n3d": levels, "box": box, "grid": g.to_dict()},
                           {"levels": rows, "energy_2d": 0.0}, True,
                           notes=["vanishing profile: all energies 0"])
    m2d = {k: _rel(fine[k], e2d) for k in ("curl", "grad")}
    passed = (fine["div_frac"] <= div_frac
              and all(o >= min_order for o in orders)
              and max(m2d.values()) <= match_2d)
    return CheckReport(
        name="palla_3d",
        parameters={"n3d": levels, "box": box, "grid": g.to_dict(), "div_frac": div_frac,
                    "min_order": min_order, "match_2d": match_2d},
        measurements={"levels": rows, "gap_orders": orders, "energy_2d": e2d,
                      "rel_diff_2d": m2d},
        passed=passed,
    )


def _curlcurl_3d(prof: Profile, n: int, L: float, Lz: float):
    """Profile ``beta = r^2 (curl curl A) . grad(theta)`` from 3D central differences."""
    (A1, A2), (h1, h2, h3), (X1, X2, zz) = _sample_A(prof, n, L, Lz)
    d = lambda f, ax, hh: np.gradient(f, hh, axis=ax, edge_order=2)  # noqa: E731
    C1 = -d(A2, 2, h3)
    C2 = d(A1, 2, h3)
    C3 = d(A2, 0, h1) - d(A1, 1, h2)
    B1 = d(C3, 1, h2) - d(C2, 2, h3)
    B2 = d(C1, 2, h3) - d(C3, 0, h1)
    beta = B1 * X2[:, :, None] - B2 * X1[:, :, None]
    return beta, np.hypot(X1, X2), zz


def _parabolic_profile(r, z):
    return r**2 * np.exp(-(z**2))


def check_curlcurl_profile(a: Profile | None = None, g: CylGrid | None = None,
                           n3d: int = 32, levels: int = 3, box: float = 2.0,
                           min_order: float = 1.5) -> CheckReport:
    """3D ``curl curl (a grad(theta))`` against the 2D profile operator.

    Each level doubles both the 2D grid and the 3D lattice. The comparison is
    made on the 3D points inside ``r, |z| <= box / 2``, well away from the
    2D grid's outer walls and from the edges of the 3D box; the 2D result is
    carried to those points by a bicubic spline.
    """
    a = _parabolic_profile if a is None else a
    g = g or CylGrid(2.0 * box, 2.0 * box, 32, 64)
    rows = []
    for lev in range(int(levels)):
        gl = g.refine(2**lev) if lev else g
        n = n3d * 2**lev
        op2d = profile_curlcurl(a(gl.R, gl.Z), gl)
        beta, r, zz = _curlcurl_3d(a, n, box, box)
        spline = RectBivariateSpline(gl.r, gl.z, op2d, kx=3, ky=3)
        mask_r = r <= box / 2
        mask_z = np.abs(zz) <= box / 2
        rr = np.broadcast_to(r[:, :, None], beta.shape)[mask_r][:, mask_z]
        zb = np.broadcast_to(zz[None, None, :], beta.shape)[mask_r][:, mask_z]
        ref = spline.ev(rr.ravel(), zb.ravel()).reshape(rr.shape)
        sample = beta[mask_r][:, mask_z]
        nrm = float(np.linalg.norm(ref))
        diff = float(np.linalg.norm(sample - ref))
        rows.append({"nr": gl.nr, "nz": gl.nz, "n3d": n, "diff": diff, "ref_norm": nrm,
                     "ratio": diff / nrm if nrm > 0 else (0.0 if diff == 0 else math.inf)})
    ratios = [row["ratio"] for row in rows]
    if all(row["ref_norm"] == 0 and row["diff"] < 1e-12 for row in rows):
        return CheckReport("curlcurl_profile", {"levels": levels, "n3d": n3d, "box": box},
                           {"levels": rows}, True, notes=["vanishing profile"])
    orders = [math.log2(ratios[i] / ratios[i + 1]) if ratios[i + 1] > 0 else math.inf
              for i in range(len(ratios) - 1)]
    passed = all(o >= min_order for o in orders) and ratios[-1] < ratios[0]
    return CheckReport(
        name="curlcurl_profile",
        parameters={"levels": levels, "n3d": n3d, "box": box, "grid": g.to_dict(),
                    "min_order": min_order},
        measurements={"levels": rows, "orders": orders},
        passed=passed,
    )


# --- gauge classes ------------------------------------------------------------------


def _grad_theta(x1, x2):
    r2 = x1**2 + x2**2
    return x2 / r2, -x1 / r2


def _hessian_sq(r: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """``|grad(grad theta)|^2`` at ``(r, 0, z)`` by central differences of the field."""
    hstep = step * r
    out = np.zeros_like(r)
    for dx1, dx2 in ((1.0, 0.0), (0.0, 1.0)):
        p = _grad_theta(r + dx1 * hstep, dx2 * hstep)
        m = _grad_theta(r - dx1 * hstep, -dx2 * hstep)
        for pc, mc in zip(p, m):
            out += ((pc - mc) / (2 * hstep)) ** 2
    return out


def check_gauge_inequivalence(k1: int = 1, k2: int = 2,
                              eps_list=(0.1, 0.05, 0.025, 0.0125),
                              r_outer: float = 1.0, z_slab: float = 1.0,
                              min_ratio: float = 2.0) -> CheckReport:
    """``int_{eps < r < r_outer, |z| < z_slab} |grad((k2 - k1) grad(theta))|^2`` for shrinking ``eps``.

    The radial integral uses Gauss-Legendre quadrature on geometrically graded
    intervals so that the ``r^-3`` growth near ``eps`` is resolved.
    """
    eps = [float(e) for e in eps_list]
    if int(k1) != k1 or int(k2) != k2:
        raise ValueError("winding numbers must be integers")
    if not all(e > 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_list must be positive and strictly decreasing")
    params = {"k1": k1, "k2": k2, "eps_list": eps, "r_outer": r_outer, "z_slab": z_slab,
              "min_ratio": min_ratio}
    dk2 = float(k2 - k1) ** 2
    if dk2 == 0:
        return CheckReport("gauge_inequivalence", params,
                           {"integrals": [0.0] * len(eps), "diverges": False}, True,
                           notes=["gauge-equivalent difference"])
    xg, wg = np.polynomial.legendre.leggauss(16)
    vals = []
    for e in eps:
        edges = np.geomspace(e, r_outer, 64)
        a, b = edges[:-1, None], edges[1:, None]
        r = 0.5 * (b - a) * xg + 0.5 * (b + a)
        wts = 0.5 * (b - a) * wg
        vals.append(float(np.sum(wts * _hessian_sq(r) * 2 * np.pi * r)) * 2 * z_slab * dk2)
    ratios = [vals[i + 1] / vals[i] for i in range(len(vals) - 1)]
    diverges = all(rt >= min_ratio for rt in ratios)
    return CheckReport(
        name="gauge_inequivalence",
        parameters=params,
        measurements={"integrals": vals, "ratios": ratios, "diverges": diverges},
        passed=diverges,
    )


# --- reduced functional ----------------------------------------------------------------


def check_reduced_forms_agree(S: VortexState, P: ModelParams, g: CylGrid,
                              lin_tol: float = DEFAULT_LIN_TOL) -> CheckReport:
    """The closed, rearranged and restricted-functional values of ``I`` agree.

    The restricted form differs from the other two exactly by the discrete
    Gauss identity ``Phi.S.Phi + sum w u^2 Phi^2 = sum w u^2 Phi``, which is
    also reported.
    """
    check_params(P)
    tol = max(10 * lin_tol, 1e-8)
    Phi = solve_gauss(S.u, g, lin_tol).Phi if P.omega != 0 else None
    vals = {f: reduced_I(S, P, g, form=f, Phi=Phi) for f in ("closed", "rearranged", "manifold")}
    diffs = {
        "closed_vs_rearranged": _rel(vals["closed"], vals["rearranged"]),
        "closed_vs_manifold": _rel(vals["closed"], vals["manifold"]),
        "rearranged_vs_manifold": _rel(vals["rearranged"], vals["manifold"]),
    }
    if Phi is None:
        identity = 0.0
    else:
        w = g.weights
        lhs = dirichlet_energy(Phi, g) + float(np.sum(w * S.u**2 * Phi**2))
        identity = _rel(lhs, float(np.sum(w * S.u**2 * Phi)))
    return CheckReport(
        name="reduced_forms",
        parameters={"params": P.to_dict(), "grid": g.to_dict(), "lin_tol": lin_tol, "tol": tol},
        measurements={"values": vals, "rel_diffs": diffs, "gauss_identity_rel": identity},
        passed=max(diffs.values()) <= tol,
    )


def check_reduced_forms_random(n_states: int = 10, g: CylGrid | None = None,
                               P: ModelParams | None = None, seed: int = 0,
                               lin_tol: float = DEFAULT_LIN_TOL) -> CheckReport:
    """:func:`check_reduced_forms_agree` on ``n_states`` random states."""
    g = g or CylGrid(12.0, 12.0, 48, 48)
    P = P or ModelParams(omega=0.5, k=1, p=4.0)
    rng = np.random.default_rng(seed)
    subs = [check_reduced_forms_agree(random_state(g, rng, 10.0 ** rng.uniform(-1, 0.5)), P, g,
                                      lin_tol) for _ in range(int(n_states))]
    worst = max(max(s.measurements["rel_diffs"].values()) for s in subs)
    return CheckReport(
        name="reduced_forms_random",
        parameters={"n_states": n_states, "params": P.to_dict(), "grid": g.to_dict(),
                    "lin_tol": lin_tol},
        measurements={"worst_rel_diff": worst,
                      "per_state": [s.measurements["rel_diffs"] for s in subs],
                      "gauss_identity_rel": [s.measurements["gauss_identity_rel"] for s in subs]},
        passed=all(s.passed for s in subs),
        seed=seed,
    )


SUITES = {
    "gauss": ("max_principle", "gauss_oracle"),
    "palla": ("palla_3d", "curlcurl_profile"),
    "gauge": ("gauge_inequivalence",),
    "forms": ("reduced_forms_random",),
}
SUITES["all"] = tuple(name for key in ("gauss", "palla", "gauge", "forms") for name in SUITES[key])


def run_check(name: str, seed: int = 0) -> CheckReport:
    """Run one named check with its default configuration."""
    if name == "max_principle":
        return check_max_principle(seed=seed)
    if name == "gauss_oracle":
        return check_gauss_oracle(seed=seed)
    if name == "palla_3d":
        return check_palla_3d()
    if name == "curlcurl_profile":
        return check_curlcurl_profile()
    if name == "gauge_inequivalence":
        return check_gauge_inequivalence()
    if name == "reduced_forms_random":
        return check_reduced_forms_random(seed=seed)
    raise KeyError(name)
