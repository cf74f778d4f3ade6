import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize, stats

from heavysums.tailmodel import (Regime, SlowlyVarying, TailModel, classify, moment_norm,
                                 quantile, sample, tail_eval)

from conftest import MODEL_MATRIX


# -- SlowlyVarying --------------------------------------------------------

def test_log_power_definition_and_extension():
    L = SlowlyVarying.log_power(1.5)
    assert L(math.e ** 2) == pytest.approx(2 ** 1.5, rel=1e-14)
    assert L(1.5) == pytest.approx(L(math.e), rel=1e-14)


@pytest.mark.parametrize("L", [SlowlyVarying.constant(3.0), SlowlyVarying.log_power(2.0),
                               SlowlyVarying.log_power(-1.0)])
def test_slow_variation_ratio(L):
    gaps = [abs(L(2 * x) / L(x) - 1) for x in (1e4, 1e8, 1e30, 1e300)]
    assert all(a >= b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.01
    if L.kind == "log_power":
        assert L(2e8) / L(1e8) == pytest.approx((math.log(2e8) / math.log(1e8)) ** L.delta, rel=1e-12)
    else:
        assert gaps[1] == 0.0
    y = np.geomspace(1, 1e12, 200)
    v = L(y)
    assert np.all(np.isfinite(v)) and np.all(v > 0)


def test_table_kind_positive_and_interpolating():
    L = SlowlyVarying.table([1, 10, 100], [1.0, 2.0, 4.0])
    assert L(10) == pytest.approx(2.0)
    assert np.all(L(np.geomspace(1, 1e6, 50)) > 0)
    with pytest.raises(ValueError):
        SlowlyVarying.table([1, 10], [1.0, -2.0])


# -- tail_eval ------------------------------------------------------------

def test_tail_examples():
    assert tail_eval(TailModel(1.5), math.e) == pytest.approx(math.exp(-1.5), rel=1e-14)
    for m in MODEL_MATRIX:
        assert tail_eval(m, 0.5) == 1.0
    sh = TailModel(1.0, variant="superheavy", kappa=1.0)
    assert tail_eval(sh, math.e ** 4) == pytest.approx(0.25, rel=1e-14)


def test_plain_formula_above_cutoff():
    L = SlowlyVarying.log_power(0.5)
    m = TailModel(1.7, gamma=0.8, L=L, scale=2.0)
    for x in (5.0, 30.0, 1e5):
        lx = math.log(x)
        assert m(x) == pytest.approx(2.0 * x ** -1.7 * lx ** 0.8 * L(lx), rel=1e-12)


def test_tail_monotone_and_in_unit_interval(any_model):
    x = np.geomspace(1e-3, 1e30, 1000)
    t = any_model(x)
    assert np.all(t > 0) and np.all(t <= 1)
    assert np.all(np.diff(t) <= 0)


def test_tail_eval_rejects_nonpositive():
    with pytest.raises(ValueError):
        tail_eval(TailModel(1.5), 0.0)


# -- quantile -------------------------------------------------------------

def test_quantile_examples():
    assert quantile(TailModel(2.0, x0=1.0), 0.01) == pytest.approx(10.0, rel=1e-10)
    assert quantile(TailModel(1.0, variant="superheavy", kappa=2.0), 0.04) == pytest.approx(math.e ** 5, rel=1e-10)


def test_quantile_matches_independent_bisection():
    m = TailModel(1.5, gamma=2.0)
    oracle = optimize.brentq(lambda lx: math.log(m(math.exp(lx))) - math.log(1e-4), 1.0, 60.0, xtol=1e-14)
    assert quantile(m, 1e-4) == pytest.approx(math.exp(oracle), rel=1e-10)


def test_quantile_flat_region_returns_cutoff():
    m = TailModel(1.5, x0=5.0)
    assert quantile(m, 0.99) == pytest.approx(m.x0, rel=1e-12)
    assert m(quantile(m, 0.99)) <= 0.99
    assert m(0.999 * m.x0) == 1.0


@pytest.mark.parametrize("idx", range(len(MODEL_MATRIX)))
def test_quantile_round_trip(idx):
    m = MODEL_MATRIX[idx]
    for k in range(1, 9):
        q = 10.0 ** -k
        if q >= m.tail_at_cutoff:
            continue
        if m.variant == "superheavy":
            got = math.exp(m.log_tail_scalar(m.log_quantile(q)))
        else:
            got = m(quantile(m, q))
        assert abs(got - q) / q <= 1e-8


@given(st.floats(min_value=-18.0, max_value=-0.5))
def test_quantile_round_trip_property(lq):
    m = TailModel(1.3, gamma=-0.7)
    q = 10.0 ** lq
    if q < m.tail_at_cutoff:
        assert m(quantile(m, q)) == pytest.approx(q, rel=1e-8)


# -- sample ---------------------------------------------------------------

def test_sample_binomial_and_symmetry():
    m = TailModel(1.5)
    b = sample(m, 100_000, 42)
    p = tail_eval(m, 10.0)
    se = math.sqrt(p * (1 - p) / 1e5)
    assert abs(np.mean(np.abs(b.values) > 10) - p) <= 3 * se
    assert abs(np.mean(np.sign(b.values))) <= 3 / math.sqrt(1e5)


def test_sample_deterministic():
    m = TailModel(1.5, gamma=1.0)
    a, b = sample(m, 5000, 7), sample(m, 5000, 7)
    assert a.values.tobytes() == b.values.tobytes()
    assert sample(m, 5000, 8).values.tobytes() != a.values.tobytes()


@pytest.mark.parametrize("m", [TailModel(1.5), TailModel(3.0, gamma=0.5), TailModel(1.5, variant="loglog", kappa=1.0)])
def test_sample_ks(m):
    # |xi| has an atom at x0, so the distance is computed with left limits
    n = 100_000
    u, counts = np.unique(np.abs(sample(m, n, 3).values), return_counts=True)
    upper = np.cumsum(counts) / n
    lower = upper - counts / n
    cdf = 1.0 - m(u)
    cdf_left = np.where(u <= m.x0 * (1 + 1e-12), 0.0, cdf)
    d = max(np.max(np.abs(upper - cdf)), np.max(np.abs(lower - cdf_left)))
    assert d < stats.kstwo.ppf(0.99, n)


def test_sample_superheavy_keeps_logs():
    m = TailModel(1.0, variant="superheavy", kappa=1.0)
    b = sample(m, 20000, 1)
    assert b.log_abs is not None
    p = m(math.e ** 6)
    assert abs(np.mean(b.log_abs > 6) - p) <= 3 * math.sqrt(p * (1 - p) / 20000)


def test_sample_rejects_empty():
    with pytest.raises(ValueError):
        sample(TailModel(1.5), 0, 1)


# -- moment_norm ----------------------------------------------------------

def test_moment_examples():
    assert moment_norm(TailModel(3.0, x0=1.0), 2.0) == pytest.approx(math.sqrt(3), rel=1e-6)
    assert moment_norm(TailModel(2.0, x0=1.0), 1.0) == pytest.approx(2.0, rel=1e-6)
    assert moment_norm(TailModel(1.5), 1.5) == math.inf


@pytest.mark.parametrize("r", [1.5, 3.0, 5.0])
def test_moment_pareto_closed_form(r):
    m = TailModel(r, x0=1.0)
    for p in (0.5, 1.0, r / 2):
        assert moment_norm(m, p) ** p == pytest.approx(r / (r - p), rel=1e-6)


def test_moment_matches_direct_quadrature():
    m = TailModel(3.0, gamma=1.0)
    p = 2.2
    f = lambda u: p * u ** (p - 1) * m(u)
    brk = [1.0, m.x0, 10.0, 100.0, 1e4]
    direct = sum(integrate.quad(f, a, b, limit=200)[0] for a, b in zip([0.0] + brk, brk + [np.inf]))
    assert moment_norm(m, p) ** p == pytest.approx(direct, rel=1e-6)


def test_moment_superheavy_infinite():
    assert moment_norm(TailModel(1.0, variant="superheavy", kappa=3.0), 0.1) == math.inf


# -- classify / serialization --------------------------------------------

def test_classify():
    assert classify(TailModel(1.5)) is Regime.HEAVY
    assert classify(TailModel(2.0)) is Regime.INTERMEDIATE
    assert classify(TailModel(3.0)) is Regime.MODERATE
    assert classify(TailModel(1.0, variant="superheavy", kappa=1.0)) is Regime.SUPERHEAVY


def test_json_round_trip(any_model):
    again = TailModel.from_json(any_model.to_json())
    x = np.geomspace(1, 1e12, 50)
    assert np.array_equal(again(x), any_model(x))
