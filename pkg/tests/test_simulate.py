import math

import numpy as np
import pytest
from scipy import stats

from heavysums.bounds import BoundCurve, heavy_curve, rosenthal
from heavysums.simulate import (StableLaw, SumExperiment, empirical_pnorm, make_gap_fixture,
                                martingale_differences, martingale_sums, raw_sums, run_sums,
                                superheavy_sandwich, substream, verify_bound, wlln_superheavy)
from heavysums.tailmodel import TailModel, sample


def cauchy_tail(x):
    return 1 - 2 / math.pi * np.arctan(x)


# -- samplers -------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5])
def test_stable_sampler_matches_closed_form_psi(alpha):
    law = StableLaw(alpha)
    x = law.draw(np.random.default_rng(3), 200_000)
    for t in (0.3, 1.0, 2.0):
        c = np.cos(t * x)
        assert abs(1 - c.mean() - law.psi()(t)) <= 3 * c.std() / math.sqrt(x.size)


def test_substreams_independent_of_order():
    a = substream(5, 10, 0).random(4)
    substream(5, 10, 1).random(4)
    assert np.array_equal(a, substream(5, 10, 0).random(4))
    assert not np.array_equal(a, substream(5, 10, 1).random(4))


# -- run_sums -------------------------------------------------------------

def test_cauchy_self_similarity():
    x = np.array([3.0, 10.0, 100.0])
    exp = SumExperiment(StableLaw(1.0), lambda n: float(n), (1, 10, 100), 100_000, 7, tuple(x))
    emp = run_sums(exp)
    truth = cauchy_tail(x)
    assert np.all(np.abs(emp.tails - truth) <= 3 * emp.se)
    assert abs(emp.U_hat[1] - truth[1]) <= 3 * emp.U_se[1]
    assert emp.U_hat[2] * 100 == pytest.approx(2 / math.pi, abs=3 * emp.U_se[2] * 100)


def test_single_summand_is_the_law():
    m = TailModel(1.5, gamma=1.0)
    x = np.geomspace(3, 1000, 9)
    emp = run_sums(SumExperiment(m, "sqrt_n", (1,), 100_000, 3, tuple(x)))
    assert np.all(np.abs(emp.tails[0] - m(x)) <= 3 * emp.se[0])


def test_run_sums_deterministic():
    m = TailModel(1.5)
    exp = SumExperiment(m, "exact", (1, 10, 100), 2000, 11, (3.0, 30.0))
    a, b = run_sums(exp), run_sums(exp)
    assert a.tails.tobytes() == b.tails.tobytes()
    assert all(a.sums[n].tobytes() == b.sums[n].tobytes() for n in a.sums)


def test_results_independent_of_n_order():
    m = TailModel(1.5)
    fwd = run_sums(SumExperiment(m, "exact", (1, 10, 100), 1000, 9, (5.0,)))
    rev = run_sums(SumExperiment(m, "exact", (100, 10, 1), 1000, 9, (5.0,)))
    assert all(fwd.sums[n].tobytes() == rev.sums[n].tobytes() for n in (1, 10, 100))
    assert np.array_equal(raw_sums(m, 10, 1000, 9), raw_sums(m, 10, 1000, 9))


def test_empirical_tail_invariants():
    m = TailModel(1.5, gamma=-1.0)
    emp = run_sums(SumExperiment(m, "exact", (1, 10, 100), 5000, 2, tuple(np.geomspace(1, 1e3, 20))))
    assert np.all((emp.tails >= 0) & (emp.tails <= 1))
    assert np.array_equal(emp.U_hat, emp.tails.max(axis=0))
    assert np.all(np.diff(emp.U_hat) <= 0)


def test_experiment_validation():
    with pytest.raises(ValueError):
        SumExperiment(TailModel(1.5), R=50)
    with pytest.raises(ValueError):
        SumExperiment(TailModel(1.5), n_set=(0, 1))


def test_centering_true_uses_mean():
    g = make_gap_fixture(3.0, 1.0)
    exp = SumExperiment(g, lambda n: math.sqrt(n), (1, 100), 2000, 1, (1.0,), centering="true")
    emp = run_sums(exp)
    assert abs(emp.sums[100].mean()) < 5 * emp.sums[100].std() / math.sqrt(2000)


@pytest.mark.parametrize("model", [TailModel(1.5), TailModel(1.5, gamma=-1.0)])
def test_heavy_regime_slope(model):
    x = np.geomspace(10, 1000, 9)
    emp = run_sums(SumExperiment(model, "exact", (1, 10, 100), 100_000, 4, tuple(x)))
    ok = emp.U_hat * emp.R >= 25
    slope = np.polyfit(np.log(x[ok]), np.log(emp.U_hat[ok]), 1)[0]
    assert ok.sum() >= 4
    assert abs(slope + model.r) <= 0.3


def test_moderate_tail_slope_single_slot():
    # for sums the Gaussian body covers every x that 1e5 replications resolve,
    # so the moderate tail rate is checked on the single-summand slot
    m = TailModel(3.0)
    x = np.geomspace(5, 50, 7)
    emp = run_sums(SumExperiment(m, "sqrt_n", (1,), 1_000_000, 4, tuple(x)))
    ok = emp.U_hat * emp.R >= 25
    slope = np.polyfit(np.log(x[ok]), np.log(emp.U_hat[ok]), 1)[0]
    assert abs(slope + 3.0) <= 0.3


def test_lower_sandwich_single_slot():
    for m in (TailModel(1.5, gamma=1.0), TailModel(2.0), TailModel(3.0)):
        x = np.geomspace(3, 300, 8)
        emp = run_sums(SumExperiment(m, "sqrt_n", (1, 10), 20_000, 8, tuple(x)))
        t = m(x)
        assert np.all(emp.U_hat >= t - 3 * np.sqrt(t * (1 - t) / emp.R))


# -- verify_bound ---------------------------------------------------------

@pytest.fixture(scope="module")
def example_a_run():
    m = TailModel(1.5, gamma=1.0)
    x = np.geomspace(10, 1000, 9)
    emp = run_sums(SumExperiment(m, "exact", (1, 10, 100), 10_000, 13, tuple(x)))
    return m, emp, heavy_curve(m)


def test_verify_pass(example_a_run):
    m, emp, curve = example_a_run
    rep = verify_bound(emp, curve)
    assert rep.passed and not rep.violations
    assert np.all(rep.margin > 0)


def test_verify_forced_failure(example_a_run):
    m, emp, curve = example_a_run
    tenth = BoundCurve(lambda x: curve(x) / 10, "tenth", x_min=curve.x_min, strict=False)
    rep = verify_bound(emp, tenth)
    assert not rep.passed and rep.violations


def test_verify_empty_grid(example_a_run):
    _, emp, curve = example_a_run
    empty = type(emp)(np.zeros(0), emp.ns, np.zeros((emp.ns.size, 0)), emp.R)
    rep = verify_bound(empty, curve)
    assert rep.passed and rep.x.size == 0 and rep.violations == []


def test_verify_skips_invalid_range(example_a_run):
    m, emp, curve = example_a_run
    floor = BoundCurve(lambda x: np.ones_like(x), "floor", x_min=100.0)
    rep = verify_bound(emp, floor)
    assert not rep.checked[0] and rep.checked[-1] and rep.passed


# -- martingale differences -----------------------------------------------

def test_martingale_zero_dependence_is_iid():
    m = TailModel(3.0)
    x = martingale_differences(m, 1000, 4, 0.0, rows=50).ravel()
    y = sample(m, 50_000, 99).values
    assert stats.ks_2samp(x, y).pvalue > 0.01


def test_martingale_conditional_mean():
    m = TailModel(4.0)
    x = martingale_differences(m, 1000, 5, 0.5, rows=200)
    z = (x[:, 1:] * np.sign(x[:, :-1])).ravel()
    assert abs(z.mean()) <= 3 * z.std() / math.sqrt(z.size)


def test_martingale_uniform_moment():
    m = TailModel(4.0)
    x = martingale_differences(m, 1000, 6, 0.5, rows=200)
    p = 2.0
    est, se = empirical_pnorm(x.ravel(), p, n_boot=100)
    assert est <= 1.5 * m.moment_norm(p) + 3 * se


def test_martingale_rejects_bad_dependence():
    with pytest.raises(ValueError):
        martingale_differences(TailModel(3.0), 10, 1, 1.5)


@pytest.mark.parametrize("p", [2.5, 3.0])
@pytest.mark.parametrize("dependence", [0.0, 0.5])
def test_rosenthal_empirical(p, dependence):
    m = TailModel(4.0)
    mode = "general" if dependence == 0 else "martingale"
    for n in (1, 10, 100):
        s = martingale_sums(m, n, 10_000, 3, dependence) / math.sqrt(n)
        est, se = empirical_pnorm(s, p, n_boot=100)
        assert est <= rosenthal(p, mode) * m.moment_norm(p) * (1 + 3 * se / est)


# -- gap fixture ----------------------------------------------------------

@pytest.fixture(scope="module")
def gap():
    return make_gap_fixture(3.0, 1.0)


def test_gap_normalized(gap):
    assert gap.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert gap.truncation < 1e-15
    assert np.array_equal(gap.log_atoms, np.exp(gap.k))


def test_gap_direct_sum_oracle(gap):
    # moments from an independent direct sum over the stored atoms
    p = 2.0
    direct = np.sum(gap.probs * np.exp(p * gap.log_atoms)) ** (1 / p)
    assert gap.moment_norm(p) == pytest.approx(direct, rel=1e-10)


def test_gap_moment_band(gap):
    ps = np.linspace(2.0, 2.99, 40)
    ratio = np.array([gap.moment_norm(p) * (3 - p) ** gap.beta for p in ps])
    assert np.all(ratio > 0) and ratio.max() / ratio.min() < 10


def test_gap_c6(gap):
    c = gap.c6_ratios()
    assert np.all(c > 0)
    assert c.min() == c[0]


def test_gap_rejects_bad_parameters():
    with pytest.raises(ValueError):
        make_gap_fixture(2.0, 1.0)
    with pytest.raises(ValueError):
        make_gap_fixture(3.0, 1.0, k_max=1)


def test_gap_sampler_frequencies(gap):
    d = gap.draw(np.random.default_rng(0), 200_000)
    freq = np.array([np.mean(np.isclose(d, math.exp(a))) for a in gap.log_atoms[:3]])
    se = np.sqrt(gap.probs[:3] * (1 - gap.probs[:3]) / d.size)
    assert np.all(np.abs(freq - gap.probs[:3]) <= 3 * se + 1e-12)


def test_gap_centered_and_compound(gap):
    rng = np.random.default_rng(1)
    c = gap.centered().draw(rng, 100_000)
    assert abs(c.mean()) <= 5 * c.std() / math.sqrt(c.size)
    th = gap.compound().draw(rng, (300, 4))
    assert th.shape == (300, 4)
    assert np.mean(th == 0) == pytest.approx(math.exp(-1), abs=0.05)


# -- superheavy -----------------------------------------------------------

def test_wlln_single_summand():
    m = TailModel(1.0, variant="superheavy", kappa=1.0)
    w = lambda n: 1 + math.log(n)
    eps = 100.0
    rep = wlln_superheavy(m, w, (1,), eps, 20_000, 3)
    # B_1 = e, so P(|xi| > e * eps)
    truth = m(math.e * eps)
    assert rep.log_b[0] == pytest.approx(1.0)
    assert abs(rep.probs[0] - truth) <= 3 * math.sqrt(truth * (1 - truth) / 20_000)


def test_superheavy_sums_in_log_space():
    m = TailModel(1.0, variant="superheavy", kappa=1.0)
    w = lambda n: 1 + math.log(n)
    x = np.exp(np.array([5.0, 10.0, 20.0]))
    emp = run_sums(SumExperiment(m, "superheavy", (1, 10, 100), 2000, 3, tuple(x), weight=w))
    assert all(np.all(np.isfinite(v)) for v in emp.sums.values())
    rep = superheavy_sandwich(emp, m)
    assert rep.c_fit >= 1 and np.isfinite(rep.c_fit)
