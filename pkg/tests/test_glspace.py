import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heavysums.charfn import PsiFunction
from heavysums.glspace import (DegenerateWeightWarning, NuFunction, gl_norm, moments_from_tail_check,
                               natural_nu, orlicz_weight_norm, tail_from_nu, tail_from_nu_detailed)
from heavysums.tailmodel import TailModel


@pytest.fixture(scope="module")
def pareto3():
    m = TailModel(3.0, x0=1.0)
    return m, natural_nu(m)


# -- gl_norm --------------------------------------------------------------

def test_gl_norm_of_own_profile_is_one(pareto3):
    m, nu = pareto3
    assert gl_norm(m.moment_norm, nu).value == pytest.approx(1.0, abs=1e-6)


def test_gl_norm_homogeneous(pareto3):
    m, nu = pareto3
    assert gl_norm(lambda p: 2 * m.moment_norm(p), nu).value == pytest.approx(2.0, rel=1e-6)
    twice = nu.scaled(lambda p: 2.0)
    assert gl_norm(m.moment_norm, twice).value == pytest.approx(0.5, rel=1e-6)


def test_gl_norm_infinite_reports_p():
    nu = NuFunction(lambda p: 1.0, 1.0, 3.0)
    res = gl_norm(lambda p: math.inf if p > 2 else 1.0, nu)
    assert res.value == math.inf and res.argmax > 2


@given(st.floats(min_value=0.1, max_value=50.0))
def test_gl_norm_scale_property(c):
    m = TailModel(4.0, x0=1.0)
    nu = natural_nu(m, p_lo=2.0)
    assert gl_norm(lambda p: c * m.moment_norm(p), nu).value == pytest.approx(c, rel=1e-6)


# -- natural_nu -----------------------------------------------------------

def test_natural_nu_pareto(pareto3):
    _, nu = pareto3
    assert nu(2.0) == pytest.approx(math.sqrt(3), rel=1e-6)
    assert nu(3.0) == math.inf and nu.p_hi == 3.0


def test_natural_nu_closed_form_with_cutoff():
    # T = 1 below e, x^-r above: nu(p)^p = e^p + p e^(p-r) / (r - p)
    m = TailModel(3.0)
    nu = natural_nu(m)
    for p in (1.0, 2.0, 2.9, 2.999):
        exact = math.exp(p) + p * math.exp(p - 3) / (3 - p)
        assert nu(p) ** p == pytest.approx(exact, rel=1e-7)


@pytest.mark.parametrize("gamma", [0.0, 1.0, -0.5])
def test_natural_nu_example_shape(gamma):
    m = TailModel(3.0, gamma=gamma)
    nu = natural_nu(m)
    ps = np.linspace(2.5, 2.99, 12)
    ratio = np.array([nu(p) ** p * (3 - p) ** (gamma + 1) / (p * math.gamma(gamma + 1)) for p in ps])
    assert np.all((0.5 <= ratio) & (ratio <= 4.0))


def test_natural_nu_family_sup():
    a, b = TailModel(3.0, x0=1.0), TailModel(3.0, x0=1.0, scale=2.0)
    fam = natural_nu([a, b])
    for p in (1.5, 2.0, 2.5):
        assert fam(p) == pytest.approx(max(a.moment_norm(p), b.moment_norm(p)), rel=1e-12)
    assert fam.kind == "family_sup"


def test_natural_nu_all_infinite_raises():
    with pytest.raises(ValueError):
        natural_nu(TailModel(0.8))
    with pytest.raises(ValueError):
        natural_nu(TailModel(1.0, variant="superheavy", kappa=1.0))


# -- tail_from_nu ---------------------------------------------------------

def test_tail_from_nu_constant_profile():
    nu = NuFunction(lambda p: 1.0, 1.0, 3.0)
    assert tail_from_nu(nu, 10.0) == pytest.approx(1e-3, rel=1e-5)
    assert tail_from_nu_detailed(nu, 10.0).at_endpoint


def test_tail_from_nu_cap(pareto3):
    _, nu = pareto3
    assert tail_from_nu(nu, 0.5 * nu.inf_value) == 1.0


def test_tail_from_nu_dense_scan():
    nu = NuFunction(lambda p: 1.0 / (2.0 - p), 1.0, 2.0)
    p = np.linspace(1.0, 2.0, 100_001)[1:-1]
    brute = np.min((1.0 / ((2.0 - p) * 100.0)) ** p)
    assert tail_from_nu(nu, 100.0) == pytest.approx(brute, rel=1e-6)


def test_tail_from_nu_monotone(pareto3):
    _, nu = pareto3
    x = np.geomspace(0.1, 1e6, 60)
    t = tail_from_nu(nu, x)
    assert t[0] == 1.0
    assert np.all(np.diff(t) <= 1e-15)


# -- orlicz_weight_norm ---------------------------------------------------

def test_orlicz_examples():
    stable = PsiFunction.stable(1.0)
    assert orlicz_weight_norm([1, 1, 1], stable) == pytest.approx(1 / math.log(1.5), rel=1e-10)
    assert orlicz_weight_norm([1.0], PsiFunction.power(1.7)) == pytest.approx(1.0, rel=1e-10)
    assert orlicz_weight_norm([], stable) == 0.0
    assert orlicz_weight_norm([0, 0], stable) == 0.0


def test_orlicz_degenerate_warns():
    with pytest.warns(DegenerateWeightWarning):
        assert orlicz_weight_norm([1.0], lambda u: 0.5 * np.ones_like(u)) == 0.0


@given(st.lists(st.floats(min_value=0.01, max_value=10.0), min_size=1, max_size=8))
def test_orlicz_homogeneous_and_monotone(a):
    psi = PsiFunction.stable(1.3)
    base = orlicz_weight_norm(a, psi)
    for c in (0.5, 2.0, 10.0):
        assert orlicz_weight_norm(np.array(a) * c, psi) == pytest.approx(c * base, rel=1e-8)
    assert orlicz_weight_norm(a + [0.3], psi) >= base * (1 - 1e-12)


# -- moments_from_tail_check ---------------------------------------------

def test_moment_tail_gap_gamma0():
    rep = moments_from_tail_check(TailModel(3.0))
    assert 0.7 <= rep.fitted_log_exponent <= 1.3
    assert rep.dominates


def test_moment_tail_gap_gamma_negative():
    rep = moments_from_tail_check(TailModel(3.0, gamma=-0.5))
    assert abs(rep.fitted_log_exponent - 0.5) < 0.2
    assert rep.dominates


def test_moment_tail_dominance_pareto():
    rep = moments_from_tail_check(TailModel(2.5, x0=1.0))
    assert rep.dominates
