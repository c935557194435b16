import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgmvortex.model import (
    F,
    Fprime,
    ModelParams,
    ParameterError,
    W,
    Wprime,
    check_params,
    omega_p,
    ps_constant,
    ps_integrand,
    validate,
)

exponents = st.floats(min_value=2.05, max_value=5.95)


def test_W_values():
    P4 = ModelParams(p=4.0)
    assert W(1.0, P4) == 0.25
    assert W(0.0, P4) == 0.0
    assert W(-2.0, P4) == 2.0


def test_Wprime_values():
    assert Wprime(1.0, ModelParams(p=4.0)) == 0.0
    assert Wprime(2.0, ModelParams(p=3.0)) == -2.0
    assert Wprime(-1.0, ModelParams(p=4.0)) == -1.0


def test_F_values():
    P = ModelParams(p=4.0)
    assert F(1.0, P) == 0.25 and Fprime(1.0, P) == 1.0
    assert F(0.0, P) == 0.0 and Fprime(0.0, P) == 0.0
    P3 = ModelParams(p=3.0)
    assert 2.0 * Fprime(2.0, P3) == pytest.approx(3.0 * F(2.0, P3))
    assert F(-3.0, P) == 0.0 and Fprime(-3.0, P) == 0.0


def test_omega_p():
    assert omega_p(4.0) == 1.0
    assert omega_p(3.0) == pytest.approx(0.70710678, abs=1e-8)
    assert omega_p(5.9) == 1.0
    for p in (2.0, 6.0, 1.0):
        with pytest.raises(ParameterError):
            omega_p(p)


def test_validate():
    assert validate(ModelParams(omega=0.5, k=1, p=4.0)) == []
    msgs = validate(ModelParams(omega=0.9, k=1, p=3.0))
    assert any("ω² ≥ (p−2)/2" in m for m in msgs)
    assert any("p out of (2,6)" in m for m in validate(ModelParams(omega=0.0, k=0, p=2.0)))
    assert any("integer" in m for m in validate(ModelParams(k=1.5)))
    with pytest.raises(ParameterError, match="min"):
        check_params(ModelParams(omega=0.9, k=1, p=3.0))


@given(p=exponents, s=st.floats(min_value=-1e3, max_value=1e3))
def test_W_decomposition(p, s):
    P = ModelParams(p=p)
    assert W(s, P) == pytest.approx(0.5 * s * s - F(s, P), rel=1e-12, abs=1e-300)


@given(p=exponents)
def test_growth_and_ar_condition(p):
    P = ModelParams(p=p)
    s = np.geomspace(1e-6, 1e3, 400)
    assert np.all(np.abs(Fprime(s, P)) <= P.c_growth * s ** (p - 1) * (1 + 1e-14))
    lhs, rhs = s * Fprime(s, P), p * F(s, P)
    assert np.all(rhs > 0)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


@settings(max_examples=50)
@given(p=exponents, s=st.floats(min_value=1e-2, max_value=10.0) | st.floats(min_value=-10.0,
                                                                            max_value=-1e-2))
def test_Wprime_is_derivative(p, s):
    P = ModelParams(p=p)
    h = 1e-6 * max(1.0, abs(s))
    fd = (W(s + h, P) - W(s - h, P)) / (2 * h)
    assert float(Wprime(s, P)) == pytest.approx(float(fd), rel=1e-6, abs=1e-8)


def test_Wprime_at_zero_one_sided():
    P = ModelParams(p=3.0)
    h = 1e-7
    assert (W(h, P) - W(0.0, P)) / h == pytest.approx(Wprime(0.0, P), abs=1e-6)
    assert (W(0.0, P) - W(-h, P)) / h == pytest.approx(Wprime(0.0, P), abs=1e-6)


@given(p=exponents, frac=st.floats(min_value=0.0, max_value=0.999),
       u=st.floats(min_value=0.0, max_value=50.0), Phi=st.floats(min_value=0.0, max_value=1.0))
def test_ps_inequality_pointwise(p, frac, u, Phi):
    # omega^2 a fraction of the admissible bound
    w = math.sqrt(frac) * omega_p(p)
    P = ModelParams(omega=w, k=1, p=p)
    lhs = float(ps_integrand(u, Phi, P))
    rhs = ps_constant(P) * u * u
    assert lhs >= rhs - 1e-12 * max(1.0, u**p)


def test_ps_constant_branches():
    assert ps_constant(ModelParams(omega=0.5, p=4.0)) == pytest.approx(0.25 * 0.75)
    c3 = (0.5 - 1 / 3) * (1 - 0.25) + (0.5 - 2 / 3) * 0.25
    assert ps_constant(ModelParams(omega=0.5, p=3.0)) == pytest.approx(c3)
