import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heavysums.app import UnreachableDeltaError
from heavysums.bounds import BoundValidityError, heavy_curve
from heavysums.charfn import PsiFunction
from heavysums.fields import (AnalyticCovering, CoveringProfile, Finiteness, GridSpace, covering_numbers,
                              empirical_distance, entropy_integral, greedy_cover_size, natural_distance,
                              rescale_profile, uniform_ci, uniform_tail_bound, uniform_tail_curve)
from heavysums.glspace import natural_nu
from heavysums.norming import solve_b
from heavysums.simulate import SumExperiment, run_sums, verify_bound
from heavysums.tailmodel import TailModel


def brute_force_cover(d, eps):
    n = d.shape[0]
    reach = d <= eps
    for k in range(1, n + 1):
        for centers in itertools.combinations(range(n), k):
            if reach[list(centers)].any(axis=0).all():
                return k


# -- GridSpace ------------------------------------------------------------

def test_gridspace_validation():
    GridSpace(np.zeros((2, 1)), np.array([[0.0, 0.0], [0.0, 0.0]]))  # semi-metric allowed
    with pytest.raises(ValueError):
        GridSpace(np.zeros((2, 1)), np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        GridSpace(np.zeros((3, 1)), np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0.0]]))
    with pytest.raises(ValueError):
        GridSpace(np.zeros((1, 1)), np.array([[1.0]]))


# -- natural distance -----------------------------------------------------

@pytest.fixture(scope="module")
def linear_field():
    m = TailModel(4.0)
    nu = natural_nu(m)
    v = np.linspace(0, 1, 5)
    space = natural_distance(lambda i, j: (lambda p: abs(v[i] - v[j]) * m.moment_norm(p)), nu, v)
    return v, space


def test_linear_field_distance(linear_field):
    v, space = linear_field
    assert np.allclose(space.dist, np.abs(v[:, None] - v[None, :]), atol=1e-8)
    assert np.all(np.diag(space.dist) == 0)
    assert np.array_equal(space.dist, space.dist.T)


def test_natural_distance_infinite_names_pair():
    nu = natural_nu(TailModel(3.0))
    with pytest.raises(ValueError, match="points 0 and 1"):
        natural_distance(lambda i, j: (lambda p: math.inf), nu, [0.0, 1.0])


def test_empirical_distance_identical_columns():
    rng = np.random.default_rng(0)
    xi = rng.standard_normal(4000)
    samples = np.stack([xi, xi, 2 * xi], axis=1)
    nu = natural_nu(TailModel(4.0))
    space = empirical_distance(samples, nu)
    assert space.dist[0, 1] == 0.0
    assert space.dist[0, 2] > 0


def test_rescale_profile():
    f = rescale_profile(lambda p: 2.0, K=8.0, K0=2.0)
    assert f(2.0) == pytest.approx(4.0)
    assert rescale_profile(lambda p: 3.0, K=1.0)(5.0) == 3.0


# -- covering -------------------------------------------------------------

def test_covering_examples():
    space = GridSpace.from_points([0.0, 0.5, 1.0])
    prof = covering_numbers(space, [2.0, 0.5, 0.3])
    assert list(prof.N) == [1, 1, 3]
    assert brute_force_cover(space.dist, 0.3) == 3
    assert greedy_cover_size(space, 5.0) == 1
    assert np.allclose(prof.H, np.log(prof.N))


def test_covering_profile_monotone():
    rng = np.random.default_rng(1)
    space = GridSpace.from_points(rng.random((40, 2)))
    prof = covering_numbers(space, np.geomspace(0.01, 2, 25))
    assert np.all(np.diff(prof.eps) < 0)
    assert np.all(np.diff(prof.N) >= 0)
    assert prof.N[0] >= 1 and prof.greedy


@pytest.mark.parametrize("seed", range(20))
def test_greedy_never_below_exact(seed):
    rng = np.random.default_rng(seed)
    space = GridSpace.from_points(rng.random((10, 2)))
    for q in (0.1, 0.3, 0.5):
        eps = float(np.quantile(space.dist[space.dist > 0], q))
        assert greedy_cover_size(space, eps) >= brute_force_cover(space.dist, eps)


@pytest.mark.parametrize("n", [3, 7, 12])
def test_greedy_exact_on_line_grids(n):
    space = GridSpace.from_points(np.linspace(0, 1, n))
    for eps in np.linspace(0.01, 1.0, 23):
        assert greedy_cover_size(space, eps) == brute_force_cover(space.dist, eps)


# -- entropy integral -----------------------------------------------------

def test_entropy_closed_form():
    res = entropy_integral(AnalyticCovering.power(1.0), 3.0)
    assert res.flag is Finiteness.FINITE
    assert res.value == pytest.approx(1.5, abs=1e-8)


def test_entropy_divergent():
    res = entropy_integral(AnalyticCovering.power(0.5), 1.5)
    assert res.flag is Finiteness.DIVERGENT and res.value == math.inf
    assert res.exponent == pytest.approx(-4 / 3, abs=1e-6)


def test_entropy_singleton():
    prof = CoveringProfile(np.array([1.0, 0.5, 0.1]), np.array([1, 1, 1]))
    res = entropy_integral(prof, 2.0)
    assert res.value == pytest.approx(1.0) and res.flag is Finiteness.FINITE


def test_entropy_callable_matches_analytic():
    a = entropy_integral(lambda e: e ** -1.0, 3.0).value
    assert a == pytest.approx(1.5, abs=1e-6)


def test_entropy_coarse_profile_indeterminate():
    prof = CoveringProfile(np.array([1.0, 0.5]), np.array([1, 2]))
    assert entropy_integral(prof, 2.0).flag is Finiteness.INDETERMINATE


def test_entropy_limit_dominates_continuity():
    eps = np.geomspace(0.3, 1e-3, 20)
    N = np.maximum(3, np.ceil(eps ** -1.0)).astype(int)
    prof = CoveringProfile(eps, N)
    cont = entropy_integral(prof, 3.0)
    lim = entropy_integral(prof, 3.0, variant="limit")
    assert lim.value >= cont.value


@given(st.floats(min_value=0.3, max_value=1.5))
def test_entropy_monotone_in_profile(alpha):
    eps = np.geomspace(0.5, 1e-3, 15)
    small = CoveringProfile(eps, np.ceil(eps ** -alpha).astype(int))
    big = CoveringProfile(eps, 2 * np.ceil(eps ** -alpha).astype(int))
    a, b = entropy_integral(small, 4.0), entropy_integral(big, 4.0)
    assert b.value >= a.value


def test_entropy_flag_boundary_grid():
    for alpha in (0.25, 0.5, 1.0, 2.0, 4.0):
        for r in (0.5, 1.0, 2.0, 3.0, 4.0):
            finite = 1 / (alpha * r) < 1
            flag = entropy_integral(AnalyticCovering.power(alpha), r).flag
            assert (flag is Finiteness.FINITE) == finite, (alpha, r)


# -- uniform tail ---------------------------------------------------------

def test_uniform_tail_exponents():
    x = np.geomspace(10, 1e6, 12)
    single = uniform_tail_bound(1.5, 0.5, None, "single", x, constant=1e-3)
    sums = uniform_tail_bound(1.5, 0.5, None, "sums", x, constant=1e-3)
    assert np.allclose(sums / single, np.log(x), rtol=1e-12)
    with pytest.raises(BoundValidityError):
        uniform_tail_bound(1.5, 0.0, None, "single", math.e)


def test_uniform_tail_calibrated_linear_field():
    # sup_v |sum_k v xi_k| / b(n) over v in [0, 1] is |S(n)|
    m = TailModel(1.5, gamma=0.5)
    x = np.geomspace(10, 1000, 9)
    cal = run_sums(SumExperiment(m, "exact", (1, 10, 100), 20_000, 21, tuple(x)))
    curve = uniform_tail_curve(1.5, 0.5, variant="sums",
                               reference=lambda g: np.interp(g, cal.x, cal.U_hat + 3 * cal.U_se), calibration=x)
    check = run_sums(SumExperiment(m, "exact", (1, 10, 100), 20_000, 22, tuple(x)))
    assert verify_bound(check, curve).passed


# -- uniform_ci -----------------------------------------------------------

def test_uniform_ci_sqrt_n():
    curve = uniform_tail_curve(3.0, 0.0, variant="sums", constant=1.0)
    samples = np.ones((400, 3))
    ci = uniform_ci(samples, curve, 0.01, truth=1.0)
    assert ci.half_width == pytest.approx(ci.X / math.sqrt(400), rel=1e-14)
    assert ci.covered is True
    assert np.allclose(ci.upper - ci.lower, 2 * ci.half_width)


def test_uniform_ci_unreachable_delta():
    # the curve starts at e^-3 < 0.05 on its validity floor x > e
    curve = uniform_tail_curve(3.0, 0.0, variant="sums", constant=1.0)
    with pytest.raises(UnreachableDeltaError):
        uniform_ci(np.ones((10, 2)), curve, 0.05)


def test_uniform_ci_coverage_linear_field():
    m = TailModel(1.5)
    psi = PsiFunction.from_tail(m)
    curve = heavy_curve(m)
    n, trials, delta = 1000, 1000, 0.05
    b = solve_b(psi, n)
    v = np.linspace(0, 1, 6)
    rng = np.random.default_rng(2024)
    hits = 0
    for _ in range(trials):
        xi = m.draw(rng, n)
        hits += uniform_ci(xi[:, None] * v[None, :], curve, delta, b_n=b, truth=0.0).covered
    cov = hits / trials
    assert cov >= 1 - delta - 3 * math.sqrt(delta * (1 - delta) / trials)
