"""Critical points of the reduced functional: ray scan, descent, mountain-pass path.

The vortex is a saddle point of ``I``: the functional is positive on a small
sphere around 0 and tends to minus infinity along every ray ``t u`` with
``u >= 0``. Plain descent therefore cannot stop at it. ``gradient_flow``
mode descends the ray-maximized functional ``I~(u, b) = max_t I(t u, b)``
instead: every iterate is rescaled to the maximum of ``I`` along its ray, so
the recorded values of ``I`` are monotone and the limit is a nontrivial
critical point of ``I`` itself. The descent metric is the linear part of the
Hessian (a Sobolev gradient), factorized once per iteration.

``mountain_pass`` mode keeps a discrete path from ``(0, 0)`` to a point where
``I < 0`` and repeatedly lowers its highest point.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq, minimize_scalar

from .cylgrid import CylGrid, dirichlet_energy, stiffness
from .functional import (
    EnergyBreakdown,
    VortexState,
    euclidean_gradient,
    lp_norm_p,
    reduced_I,
    residuals,
    total_energy,
)
from .gauss import DEFAULT_LIN_TOL, solve_gauss
from .model import ModelParams, check_params, ps_constant, ps_integrand

log = logging.getLogger(__name__)

MODES = ("gradient_flow", "mountain_pass")
ROUNDOFF = 1e-13


class SolverError(RuntimeError):
    pass


class NoSignChangeError(SolverError):
    """``I(t u0, 0)`` stayed positive on the whole scanned ray."""


class NonFiniteError(SolverError):
    """The functional became NaN or infinite during iteration."""


@dataclass
class SolverOptions:
    max_iters: int = 3000
    grad_tol: float = 1e-6
    step0: float = 1.0
    armijo_c: float = 1e-4
    path_points: int = 16
    t_max: float = 100.0
    mode: str = "gradient_flow"
    lin_tol: float = DEFAULT_LIN_TOL
    trivial_tol: float = 1e-4
    ray_samples: int = 64
    guess_amplitude: float = 1.0
    guess_width: float = 2.0
    guess_center_r: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        positive = ("max_iters", "grad_tol", "step0", "armijo_c", "t_max", "lin_tol",
                    "trivial_tol", "ray_samples", "guess_amplitude", "guess_width")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.armijo_c >= 1:
            raise ValueError("armijo_c must be < 1")
        if self.path_points < 8:
            raise ValueError("path_points must be >= 8")
        if self.guess_center_r < 0:
            raise ValueError("guess_center_r must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveReport:
    state: VortexState
    Phi: np.ndarray
    I_value: float
    energy: EnergyBreakdown
    residual_z1: float
    residual_z3: float
    residual_z4: float
    grad_norm: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    lp_norm_p: float = 0.0
    nontrivial: bool = False
    min_u: float = 0.0
    z_asymmetry: float = 0.0
    ps_margin: float = 0.0  # smallest PS-inequality slack over all iterates
    message: str = ""
    omega: float = 0.0

    @property
    def phi(self) -> np.ndarray:
        """Electric potential ``omega Phi``."""
        return self.omega * self.Phi

    def summary(self) -> dict:
        """JSON-ready scalars (fields and history excluded)."""
        return {
            "converged": bool(self.converged),
            "nontrivial": bool(self.nontrivial),
            "iterations": int(self.iterations),
            "I": float(self.I_value),
            "energy": self.energy.to_dict(),
            "residual_z1": float(self.residual_z1),
            "residual_z3": float(self.residual_z3),
            "residual_z4": float(self.residual_z4),
            "grad_norm": float(self.grad_norm),
            "lp_norm_p": float(self.lp_norm_p),
            "min_u": float(self.min_u),
            "z_asymmetry": float(self.z_asymmetry),
            "ps_margin": float(self.ps_margin),
            "message": self.message,
        }


def _taper(x: np.ndarray) -> np.ndarray:
    """1 up to x = 0.75, a cosine ramp to 0 at x = 1."""
    s = np.clip((x - 0.75) / 0.25, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * s))


def initial_guess(
    g: CylGrid,
    P: ModelParams,
    amplitude: float = 1.0,
    width: float = 2.0,
    center_r: float = 0.0,
) -> VortexState:
    """``u = A (r/w)^m exp(-((r - c)^2 + z^2)/w^2)`` with ``m = max(1, |k|)``, ``b = 0``.

    The profile is multiplied by a smooth window that vanishes on the outer walls.
    """
    if not (amplitude > 0 and width > 0):
        raise ValueError("amplitude and width must be positive")
    m = max(1, abs(int(P.k)))
    R, Z = g.R, g.Z
    u = amplitude * (R / width) ** m * np.exp(-((R - center_r) ** 2 + Z**2) / width**2)
    u = u * _taper(R / g.r_max) * _taper(np.abs(Z) / g.z_half)
    return VortexState(u, g.zeros())


class _Problem:
    """Evaluation of ``I`` and its gradient with warm-started Gauss solves."""

    def __init__(self, P: ModelParams, g: CylGrid, lin_tol: float, fix_b: bool):
        self.P, self.g, self.lin_tol, self.fix_b = P, g, lin_tol, fix_b
        self._Phi = None
        self.n_evals = 0
        self.ps_margin = np.inf

    def gauss(self, u):
        if self.P.omega == 0.0:
            return None
        Phi = solve_gauss(u, self.g, self.lin_tol, x0=self._Phi).Phi
        self._Phi = Phi
        return Phi

    def value(self, S: VortexState, Phi=None) -> float:
        self.n_evals += 1
        if Phi is None:
            Phi = self.gauss(S.u)
        val = reduced_I(S, self.P, self.g, Phi=Phi)
        if not np.isfinite(val):
            raise NonFiniteError("I is not finite")
        return val

    def value_grad(self, S: VortexState):
        Phi = self.gauss(S.u)
        val = self.value(S, Phi)
        gu, gb = euclidean_gradient(S, self.P, self.g, Phi)
        if self.fix_b:
            gb = np.zeros_like(gb)
        Phi_ps = self.g.zeros() if Phi is None else Phi
        self.ps_margin = min(self.ps_margin, ps_margin(S.u, Phi_ps, self.P))
        return val, gu, gb, Phi

    def grad_norm(self, gu, gb) -> float:
        w = self.g.weights
        return float(np.sqrt(np.sum(gu**2 / w) + np.sum(gb**2 / w)))

    def ray_slope(self, t: float, S: VortexState) -> float:
        """``d/dt I(t u, b)``; positive below the ray maximum."""
        T = VortexState(t * S.u, S.b)
        Phi = self.gauss(T.u)
        gu, _ = euclidean_gradient(T, self.P, self.g, Phi)
        return float(np.sum(gu * S.u))

    def project(self, S: VortexState) -> VortexState | None:
        """Rescale ``u`` to the maximum of ``I`` on its ray; ``None`` if there is none."""
        u, b, P, g = S.u, S.b, self.P, self.g
        w = g.weights
        pos = np.sum(w * np.maximum(u, 0.0) ** P.p)
        if not pos > 0:
            return None
        quad = dirichlet_energy(u, g) + np.sum(w * ((b - P.k) ** 2 / g.R**2 + 1.0) * u**2)
        t = (quad / pos) ** (1.0 / (P.p - 2.0))
        if P.omega != 0.0:
            t = self._ray_root(S, t)
        if not np.isfinite(t) or t <= 0:
            return None
        return VortexState(t * u, b)

    def _ray_root(self, S: VortexState, t0: float) -> float:
        lo = hi = t0
        f_lo = f_hi = self.ray_slope(t0, S)
        for _ in range(60):
            if f_hi < 0:
                break
            lo, f_lo = hi, f_hi
            hi *= 1.5
            f_hi = self.ray_slope(hi, S)
        for _ in range(60):
            if f_lo > 0:
                break
            hi, f_hi = lo, f_lo
            lo /= 1.5
            f_lo = self.ray_slope(lo, S)
        if not (f_lo > 0 > f_hi):
            return float("nan")
        return brentq(self.ray_slope, lo, hi, args=(S,), xtol=1e-14, rtol=1e-13, maxiter=200)

    def preconditioner(self, S: VortexState, Phi):
        """Factorized linear parts of the Hessian for the u and b blocks."""
        P, g = self.P, self.g
        w = g.weights
        inv_r2 = 1.0 / g.R**2
        mass = (S.b - P.k) ** 2 * inv_r2 + 1.0
        if Phi is not None:
            mass = mass - P.omega**2 * (1.0 - Phi) ** 2
        Pu = stiffness(g, "r") + sp.diags((w * mass).ravel())
        solve_u = spla.factorized(Pu.tocsc())
        if self.fix_b:
            return solve_u, None
        Pb = stiffness(g, "inv_r") + sp.diags((w * S.u**2 * inv_r2).ravel())
        return solve_u, spla.factorized(Pb.tocsc())


def ray_scan(
    u0: np.ndarray,
    P: ModelParams,
    g: CylGrid,
    t_max: float = 100.0,
    n_samples: int = 64,
    lin_tol: float = DEFAULT_LIN_TOL,
) -> tuple[float, float]:
    """Sample ``I(t u0, 0)`` for log-spaced ``t`` in ``[1e-4 t_max, t_max]``.

    Returns:
        ``(t_star, t_neg)``: the smallest sampled maximizer and the smallest
        sampled ``t`` with ``I < 0``.

    Raises:
        ValueError: if ``u0`` vanishes or has negative values.
        NoSignChangeError: if every sample is positive.
    """
    t_star, t_neg, _, _ = _ray_samples(u0, P, g, t_max, n_samples, lin_tol)
    if t_neg is None:
        raise NoSignChangeError(
            f"I(t u0, 0) > 0 for all sampled t <= {t_max}; increase t_max or the amplitude"
        )
    return t_star, t_neg


def _ray_samples(u0, P, g, t_max, n_samples, lin_tol):
    u0 = g.check(u0)
    if not np.any(u0) or np.any(u0 < 0):
        raise ValueError("ray scan needs u0 >= 0, u0 != 0")
    ts = np.geomspace(1e-4 * t_max, t_max, int(n_samples))
    b0 = g.zeros()
    vals = np.array([reduced_I(VortexState(t * u0, b0), P, g, lin_tol) for t in ts])
    t_star = float(ts[int(np.argmax(vals))])
    neg = np.nonzero(vals < 0)[0]
    t_neg = float(ts[neg[0]]) if neg.size else None
    return t_star, t_neg, ts, vals


def _armijo(problem, S, I0, du, db, slope, alpha, opts, projected, refine=None):
    """Backtrack from ``alpha``; returns ``(alpha, state, value)`` or ``None``."""
    # below this size a predicted decrease cannot be resolved in floating point
    noise = ROUNDOFF * max(1.0, abs(I0))
    while alpha > 1e-12:
        trial = VortexState(S.u + alpha * du, S.b + alpha * db)
        if projected:
            trial = problem.project(trial)
        if trial is not None:
            if refine is not None:
                trial, val = refine(trial)
            else:
                val = problem.value(trial)
            if val <= I0 + opts.armijo_c * alpha * slope:
                return alpha, trial, val
            if -alpha * slope < noise and val <= I0 + noise:
                return alpha, trial, val
        alpha *= 0.5
    return None


def _directions(problem, S, gu, gb, Phi):
    solve_u, solve_b = problem.preconditioner(S, Phi)
    du = -solve_u(gu.ravel()).reshape(gu.shape)
    db = np.zeros_like(gb) if solve_b is None else -solve_b(gb.ravel()).reshape(gb.shape)
    return du, db


def _gradient_flow(problem: _Problem, S0: VortexState, opts: SolverOptions):
    g = problem.g
    history = []
    S = S0.copy()
    I, gu, gb, Phi = problem.value_grad(S)
    gn = problem.grad_norm(gu, gb)
    if gn <= opts.grad_tol:
        history.append((0, I, gn))
        return S, Phi, I, gn, 0, True, history, "initial state is critical"
    projected = bool(np.any(S.u > 0))
    if projected:
        T = problem.project(S)
        if T is None:
            raise SolverError("initial state has no ray maximum")
        S = T
        I, gu, gb, Phi = problem.value_grad(S)
        gn = problem.grad_norm(gu, gb)
    alpha = opts.step0
    message = "max_iters reached"
    converged = False
    it = 0
    for it in range(opts.max_iters + 1):
        history.append((it, I, gn))
        if gn <= opts.grad_tol:
            converged, message = True, "gradient tolerance reached"
            break
        if it == opts.max_iters:
            break
        du, db = _directions(problem, S, gu, gb, Phi)
        slope = float(np.sum(gu * du) + np.sum(gb * db))
        if not slope < 0:
            message = "no descent direction"
            break
        step = _armijo(problem, S, I, du, db, slope, min(opts.step0, 2.0 * alpha), opts, projected)
        if step is None:
            message = "line search stalled"
            break
        alpha, S, _ = step
        I, gu, gb, Phi = problem.value_grad(S)
        gn = problem.grad_norm(gu, gb)
        if not S.is_finite():
            raise NonFiniteError("state became non-finite")
    log.debug("gradient_flow: %d iterations, I = %.12g, |grad| = %.3e", it, I, gn)
    return S, Phi, I, gn, it, converged, history, message


def _path_max(problem, end: VortexState, n: int):
    """Highest point of the path ``t -> (t u_end, b_end)``, ``t in [0, 1]``.

    ``n`` equally spaced samples locate the top; a bounded scalar search
    between its neighbours refines it.
    """
    ts = np.linspace(0.0, 1.0, n)
    vals = [problem.value(VortexState(t * end.u, end.b)) for t in ts]
    m = 1 + int(np.argmax(vals[1:-1]))
    res = minimize_scalar(lambda t: -problem.value(VortexState(t * end.u, end.b)),
                          bounds=(ts[m - 1], ts[m + 1]), method="bounded",
                          options={"xatol": 1e-12})
    t = float(res.x) if -res.fun >= vals[m] else float(ts[m])
    return t, vals[-1]


def _refine_on_ray(problem, S: VortexState):
    """Local maximum of ``s -> I(s u, b)`` for ``s`` in ``[1/2, 2]``."""
    res = minimize_scalar(lambda s: -problem.value(VortexState(s * S.u, S.b)),
                          bounds=(0.5, 2.0), method="bounded", options={"xatol": 1e-12})
    return VortexState(float(res.x) * S.u, S.b), -float(res.fun)


def _mountain_pass(problem: _Problem, S_end: VortexState, opts: SolverOptions):
    """Lower the top of a path from the origin to a point where ``I < 0``.

    The path is always the segment through the current top point. Each
    iteration moves the top point downhill orthogonally to the path tangent,
    accepts the move on the value of the new path maximum, and rebuilds the
    path through it.
    """
    n = opts.path_points
    end = S_end
    history = []
    alpha = opts.step0
    converged = False
    message = "max_iters reached"
    it = 0
    for it in range(opts.max_iters + 1):
        t, I_end = _path_max(problem, end, n)
        if I_end >= 0:
            raise SolverError("mountain pass endpoint lost I < 0")
        S = VortexState(t * end.u, end.b)
        I, gu, gb, Phi = problem.value_grad(S)
        gn = problem.grad_norm(gu, gb)
        history.append((it, I, gn))
        if gn <= opts.grad_tol:
            converged, message = True, "gradient tolerance reached"
            break
        if it == opts.max_iters:
            break
        du, db = _directions(problem, S, gu, gb, Phi)
        du, db = _project_out(problem, S, Phi, du, db, S.u, np.zeros_like(S.b))
        slope = float(np.sum(gu * du) + np.sum(gb * db))
        if not slope < 0:
            message = "no descent direction"
            break
        step = _armijo(problem, S, I, du, db, slope, min(opts.step0, 2.0 * alpha), opts,
                       projected=False, refine=lambda T: _refine_on_ray(problem, T))
        if step is None:
            message = "line search stalled"
            break
        alpha, top, _ = step
        end = _extend_to_negative(problem, top, 1.0 / t if t > 0 else 2.0)
    return S, Phi, I, gn, it, converged, history, message


def _project_out(problem, S, Phi, du, db, tu, tb):
    """Remove from ``(du, db)`` its component along ``(tu, tb)`` in the descent metric."""
    P, g = problem.P, problem.g
    w = g.weights
    inv_r2 = 1.0 / g.R**2
    mass = (S.b - P.k) ** 2 * inv_r2 + 1.0
    if Phi is not None:
        mass = mass - P.omega**2 * (1.0 - Phi) ** 2
    Su = stiffness(g, "r")
    Sb = stiffness(g, "inv_r")

    def pu(x):
        return (Su @ x.ravel()).reshape(x.shape) + w * mass * x

    def pb(x):
        if problem.fix_b:
            return np.zeros_like(x)
        return (Sb @ x.ravel()).reshape(x.shape) + w * S.u**2 * inv_r2 * x

    tt = np.sum(tu * pu(tu)) + np.sum(tb * pb(tb))
    if not tt > 0:
        return du, db
    c = (np.sum(du * pu(tu)) + np.sum(db * pb(tb))) / tt
    return du - c * tu, db - c * tb


def descend(
    S0: VortexState,
    P: ModelParams,
    g: CylGrid,
    opts: SolverOptions | None = None,
    fix_b: bool | None = None,
    path_end: VortexState | None = None,
) -> SolveReport:
    """Drive ``S0`` to a critical point of ``I``.

    In ``mountain_pass`` mode ``path_end`` is the far endpoint of the initial
    path (``I < 0`` there); it defaults to ``S0`` scaled along its ray until
    ``I`` turns negative.

    The report's ``converged`` flag is set only when the weighted gradient
    norm has reached ``opts.grad_tol`` and ``min(u) >= -1e-10``.
    """
    opts = opts or SolverOptions()
    check_params(P)
    if fix_b is None:
        fix_b = P.k == 0
    g.check(S0.u), g.check(S0.b)
    if not S0.is_finite():
        raise NonFiniteError("initial state is not finite")
    S0 = VortexState(S0.u, g.zeros() if fix_b else S0.b)
    problem = _Problem(P, g, opts.lin_tol, fix_b)
    if opts.mode == "mountain_pass" and np.any(S0.u):
        if path_end is None:
            path_end = _extend_to_negative(problem, S0, 1.0, opts.t_max)
        out = _mountain_pass(problem, path_end, opts)
    else:
        out = _gradient_flow(problem, S0, opts)
    S, Phi, I, gn, iters, converged, history, message = out
    return _finalize(problem, S, Phi, I, gn, iters, converged, history, message, opts)


def _extend_to_negative(problem, S0, t_first, t_max=1e4):
    """``(t u, b)`` for the first ``t`` in a doubling sequence from ``t_first`` with ``I < 0``."""
    t = t_first
    while t <= t_max:
        T = VortexState(t * S0.u, S0.b)
        if problem.value(T) < 0:
            return T
        t *= 2.0
    raise NoSignChangeError("could not find a path endpoint with I < 0")


def z_asymmetry(u: np.ndarray) -> float:
    """``||u(r, z) - u(r, -z)|| / ||u||`` (Euclidean over nodes)."""
    nrm = np.linalg.norm(u)
    return float(np.linalg.norm(u - u[:, ::-1]) / nrm) if nrm > 0 else 0.0


def ps_margin(u: np.ndarray, Phi: np.ndarray, P: ModelParams) -> float:
    """Smallest pointwise slack of the PS-boundedness inequality, relative to ``max u^2``."""
    lhs = ps_integrand(u, Phi, P)
    slack = lhs - ps_constant(P) * u**2
    scale = max(1.0, float(np.max(u**2)))
    return float(np.min(slack) / scale)


def _finalize(problem, S, Phi, I, gn, iters, converged, history, message, opts):
    P, g = problem.P, problem.g
    Phi = solve_gauss(S.u, g, opts.lin_tol).Phi if Phi is None else Phi
    I = reduced_I(S, P, g, Phi=Phi if P.omega != 0 else None)
    energy = total_energy(S, P, g, Phi=Phi)
    r1, r3, r4 = residuals(S.u, Phi, S.b, P, g)
    lpp = lp_norm_p(S.u, g, P.p)
    min_u = float(S.u.min())
    if converged and min_u < -1e-10:
        converged = False
        message = f"gradient converged but min(u) = {min_u:.3e} < -1e-10"
    return SolveReport(
        state=S,
        Phi=Phi,
        I_value=I,
        energy=energy,
        residual_z1=r1,
        residual_z3=r3,
        residual_z4=r4,
        grad_norm=gn,
        iterations=iters,
        converged=converged,
        history=history,
        lp_norm_p=lpp,
        nontrivial=lpp >= opts.trivial_tol,
        min_u=min_u,
        z_asymmetry=z_asymmetry(S.u),
        ps_margin=min(problem.ps_margin, ps_margin(S.u, Phi, P)),
        message=message,
        omega=P.omega,
    )


def solve_vortex(P: ModelParams, g: CylGrid, opts: SolverOptions | None = None) -> SolveReport:
    """Initial guess, ray scan, descent and the post-checks of the solution type.

    For ``k = 0`` the gauge profile is held at ``b = 0``; for ``omega = 0`` the
    electric potential ``phi = omega Phi`` vanishes identically.
    """
    opts = opts or SolverOptions()
    check_params(P)
    guess = initial_guess(g, P, opts.guess_amplitude, opts.guess_width, opts.guess_center_r)
    t_star, t_neg = ray_scan(guess.u, P, g, opts.t_max, opts.ray_samples, opts.lin_tol)
    S0 = VortexState(t_star * guess.u, g.zeros())
    end = VortexState(t_neg * guess.u, g.zeros())
    report = descend(S0, P, g, opts, fix_b=(P.k == 0), path_end=end)
    phi = report.phi
    notes = []
    if P.omega == 0.0 and np.any(phi != 0.0):
        notes.append("phi not identically zero at omega = 0")
    if P.k == 0 and np.any(report.state.b != 0.0):
        notes.append("b not identically zero at k = 0")
    if report.converged and not report.nontrivial:
        notes.append("converged to the trivial state")
    if notes:
        report.message = "; ".join([report.message] + notes)
    return report
