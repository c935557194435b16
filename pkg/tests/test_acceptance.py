"""Acceptance criteria at their stated tolerances and wall-clock limits.

Each test records one PASS/FAIL line, printed in the terminal summary. The
file can also be run directly: ``python tests/test_acceptance.py``.
"""

import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from kgmvortex.cylgrid import CylGrid
from kgmvortex.functional import VortexState, grad_I, inner, reduced_I
from kgmvortex.model import ModelParams
from kgmvortex.solver import SolverOptions, initial_guess, solve_vortex
from kgmvortex.verify import (
    check_gauge_inequivalence,
    check_gauss_oracle,
    check_max_principle,
    check_palla_3d,
    check_reduced_forms_random,
    random_state,
)

VORTEX_ENERGY = 62.567408157404316  # (4, 0, 1) on 12/12, 64 x 64


def record(num: int, title: str, ok: bool, elapsed: float, limit: float, detail: str) -> None:
    in_time = elapsed < limit
    status = "PASS" if ok and in_time else "FAIL"
    line = f"[{status}] {num:2d} {title}: {detail}; {elapsed:.1f}s (limit {limit:g}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert in_time, line


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_01_maximum_principle():
    with Timer() as t:
        rep = check_max_principle(trials=50, g=CylGrid(12.0, 12.0, 64, 64), seed=1)
    m = rep.measurements
    ok = m["min_Phi"] >= -1e-10 and m["max_Phi"] <= 1 + 1e-10
    record(1, "maximum principle", ok, t.elapsed, 30,
           f"min {m['min_Phi']:.3e}, max-1 {m['max_Phi'] - 1:.3e}")


def test_02_gauss_oracle():
    with Timer() as t:
        rep = check_gauss_oracle(g=CylGrid(12.0, 12.0, 48, 48), seed=2)
    err = rep.measurements["max_rel_error"]
    record(2, "iterative vs dense Gauss", err < 1e-8, t.elapsed, 10, f"rel err {err:.2e}")


def test_03_gradient_consistency():
    g = CylGrid(12.0, 12.0, 48, 48)
    P = ModelParams(0.5, 1, 4.0)
    rng = np.random.default_rng(3)
    worst = 0.0
    with Timer() as t:
        for _ in range(3):
            S = random_state(g, rng, 10.0 ** rng.uniform(-0.5, 0.5))
            gu, gb = grad_I(S, P, g)
            for _ in range(10):
                D = random_state(g, rng)
                eps = 1e-5 * max(1.0, np.abs(S.u).max())
                plus = reduced_I(VortexState(S.u + eps * D.u, S.b + eps * D.b), P, g)
                minus = reduced_I(VortexState(S.u - eps * D.u, S.b - eps * D.b), P, g)
                fd = (plus - minus) / (2 * eps)
                an = inner(gu, D.u, g) + inner(gb, D.b, g)
                worst = max(worst, abs(fd - an) / abs(an))
    record(3, "gradient vs central differences", worst < 1e-5, t.elapsed, 60,
           f"worst rel err {worst:.2e}")


def test_04_divergence_free_identity():
    with Timer() as t:
        rep = check_palla_3d(n3d=(32, 64, 128))
    m = rep.measurements
    fine = m["levels"][-1]
    ok = (fine["div_frac"] <= 0.01 and min(m["gap_orders"]) >= 1.5
          and max(m["rel_diff_2d"].values()) <= 0.02)
    record(4, "curl/gradient energy identity", ok, t.elapsed, 120,
           f"div frac {fine['div_frac']:.1e}, gap orders "
           + ", ".join(f"{o:.2f}" for o in m["gap_orders"])
           + f", 2D mismatch {max(m['rel_diff_2d'].values()):.2e}")


def test_05_mountain_pass_geometry():
    g = CylGrid(12.0, 12.0, 64, 64)
    P = ModelParams(0.0, 1, 4.0)
    u0 = initial_guess(g, P).u
    with Timer() as t:
        ts = np.geomspace(1e-2, 100.0, 48)
        vals = [reduced_I(VortexState(s * u0, g.zeros()), P, g) for s in ts]
    ok = vals[0] > 0 and min(vals) < 0
    t_neg = ts[np.nonzero(np.array(vals) < 0)[0][0]] if min(vals) < 0 else float("nan")
    record(5, "mountain-pass geometry", ok, t.elapsed, 10,
           f"I(t_min) {vals[0]:.3e} > 0, first negative at t = {t_neg:.3g}")


def test_06_vortex_existence():
    g = CylGrid(12.0, 12.0, 64, 64)
    P = ModelParams(0.0, 1, 4.0)
    with Timer() as t:
        rep = solve_vortex(P, g)
    res = (rep.residual_z1, rep.residual_z3, rep.residual_z4)
    ok = (rep.converged and rep.lp_norm_p >= 1e-4 and rep.min_u >= -1e-10
          and max(res) < 1e-4 and not np.any(rep.phi))
    ok = ok and rep.energy.total == pytest.approx(VORTEX_ENERGY, rel=1e-6)
    record(6, "magnetostatic vortex", ok, t.elapsed, 300,
           f"E {rep.energy.total:.10g}, |u|_p^p {rep.lp_norm_p:.3g}, min u {rep.min_u:.1e}, "
           f"residuals " + ", ".join(f"{x:.1e}" for x in res))


def test_07_case_split():
    g = CylGrid(12.0, 12.0, 64, 64)
    with Timer() as t:
        el = solve_vortex(ModelParams(0.5, 0, 4.0), g)
        em = solve_vortex(ModelParams(0.5, 1, 4.0), g)
    nb_el, nphi_el = np.abs(el.state.b).max(), np.abs(el.phi).max()
    nb_em, nphi_em = np.abs(em.state.b).max(), np.abs(em.phi).max()
    ok = (el.converged and em.converged and nb_el == 0.0 and nphi_el > 0
          and nb_em > 0 and nphi_em > 0)
    record(7, "electrostatic / electro-magnetostatic split", ok, t.elapsed, 600,
           f"k=0: max|b| {nb_el:g}, max|phi| {nphi_el:.3g}; "
           f"k=1: max|b| {nb_em:.3g}, max|phi| {nphi_em:.3g}")


def test_08_gauge_inequivalence():
    with Timer() as t:
        rep = check_gauge_inequivalence(1, 2, (0.1, 0.05, 0.025, 0.0125))
    ratios = rep.measurements["ratios"]
    record(8, "gauge inequivalence", min(ratios) >= 2, t.elapsed, 5,
           "growth per halving " + ", ".join(f"{x:.3f}" for x in ratios))


def test_09_translation_invariance():
    g = CylGrid(8.0, 8.0, 32, 64)
    P = ModelParams(0.0, 1, 4.0)
    rng = np.random.default_rng(9)
    with Timer() as t:
        S = random_state(g, rng)
        S.u[:, :8] = S.u[:, -8:] = 0.0
        S.b[:, :8] = S.b[:, -8:] = 0.0
        T = VortexState(np.roll(S.u, 1, axis=1), np.roll(S.b, 1, axis=1))
        a, b = reduced_I(S, P, g), reduced_I(T, P, g)
    rel = abs(a - b) / abs(a)
    record(9, "translation invariance", rel < 1e-12, t.elapsed, 5, f"rel change {rel:.1e}")


def test_10_reduced_forms():
    with Timer() as t:
        rep = check_reduced_forms_random(n_states=10, seed=10)
    worst = rep.measurements["worst_rel_diff"]
    record(10, "reduced-form agreement", worst <= 1e-8, t.elapsed, 60, f"worst rel diff {worst:.1e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
