"""Seeded Monte-Carlo engine for normed sums.

Replications for a given ``n`` are generated in fixed-size blocks; block
``j`` of size ``n`` always draws from ``SeedSequence(seed, spawn_key=(n, j))``
so any replication's value depends only on ``(seed, n, replication index)``
and results do not depend on the order blocks are run in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from ._numerics import compensated_sum
from .charfn import PsiFunction
from .norming import b_asymptotic, log_b_superheavy, solve_b
from .tailmodel import TailModel

__all__ = [
    "StableLaw",
    "SumExperiment",
    "EmpiricalTail",
    "VerifyReport",
    "GapFixture",
    "WllnReport",
    "DEFAULT_N_SET",
    "run_sums",
    "simulate_normed_sums",
    "verify_bound",
    "martingale_differences",
    "make_gap_fixture",
    "wlln_superheavy",
    "superheavy_sandwich",
    "empirical_pnorm",
    "martingale_sums",
    "raw_sums",
    "substream",
]

DEFAULT_N_SET = (1, 3, 10, 31, 100, 316, 1000, 3162, 10000)
BLOCK_ELEMENTS = 1 << 20


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class StableLaw:
    """Symmetric stable law with ``psi(t) = 1 - exp(-|t|^alpha)``.

    Drawn with the Chambers-Mallows-Stuck transform; kept as an independent
    oracle for the closed-form addition.
    """

    alpha: float

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        a = self.alpha
        v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size)
        w = rng.standard_exponential(size)
        if a == 1:
            return np.tan(v)
        return np.sin(a * v) / np.cos(v) ** (1 / a) * (np.cos((1 - a) * v) / w) ** ((1 - a) / a)

    def psi(self) -> PsiFunction:
        return PsiFunction.stable(self.alpha)

    def tail(self, x):
        """Tail of ``|xi|``; closed form only for the Cauchy case."""
        if self.alpha != 1:
            raise NotImplementedError("closed-form tail only for alpha = 1")
        return 1.0 - 2.0 / math.pi * np.arctan(np.asarray(x, dtype=float))

    def to_dict(self):
        return {"stable": self.alpha}


@dataclass(frozen=True)
class SumExperiment:
    """Configuration of a normed-sum simulation.

    ``norming``: ``"exact"`` (root of the psi equation), ``"asymptotic"``,
    ``"sqrt_n"``, ``"superheavy"`` (needs ``weight``) or a callable
    ``n -> b(n)``.  ``centering``: ``"none"``, ``"true"`` (subtract the law's
    ``mean``) or ``"empirical"`` (subtract the pooled sample mean per ``n``).
    """

    law: object
    norming: str | Callable[[int], float] = "exact"
    n_set: Sequence[int] = DEFAULT_N_SET
    R: int = 10000
    seed: int = 0
    x_grid: Sequence[float] = tuple(np.geomspace(1.0, 1e4, 41))
    centering: str = "none"
    weight: Callable[[int], float] | None = None
    psi: PsiFunction | None = None

    def __post_init__(self):
        if self.R < 100:
            raise ValueError("need R >= 100 replications")
        if any(int(n) < 1 for n in self.n_set):
            raise ValueError("n-set entries must be >= 1")
        if self.centering not in ("none", "true", "empirical"):
            raise ValueError("centering must be none, true or empirical")

    @property
    def superheavy(self) -> bool:
        return isinstance(self.law, TailModel) and self.law.variant == "superheavy"

    def log_norming(self) -> dict[int, float]:
        ns = [int(n) for n in self.n_set]
        if callable(self.norming):
            return {n: math.log(float(self.norming(n))) for n in ns}
        if self.norming == "sqrt_n":
            return {n: 0.5 * math.log(n) for n in ns}
        if self.norming == "superheavy":
            if not self.superheavy or self.weight is None:
                raise ValueError("superheavy norming needs a superheavy model and a weight")
            m = self.law
            return {n: log_b_superheavy(m.scale, m.kappa, m.L, self.weight, n) for n in ns}
        if self.norming == "asymptotic":
            return {n: 0.0 if n == 1 else math.log(b_asymptotic(self.law, n)[0]) for n in ns}
        if self.norming == "exact":
            psi = self.psi
            if psi is None:
                psi = self.law.psi() if hasattr(self.law, "psi") else PsiFunction.from_tail(self.law)
            return {n: math.log(solve_b(psi, n)) for n in ns}
        raise ValueError(f"unknown norming {self.norming!r}")


def _block_rows(n: int) -> int:
    return max(1, BLOCK_ELEMENTS // n)


def _signed_logsumexp(sign: np.ndarray, logs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise ``log|sum sign e^logs|`` and its sign."""
    m = logs.max(axis=1, keepdims=True)
    terms = sign * np.exp(logs - m)
    s = compensated_sum(terms)
    with np.errstate(divide="ignore"):
        return m[:, 0] + np.log(np.abs(s)), np.sign(s)


def raw_sums(law, n: int, R: int, seed: int, log_space: bool = False):
    """Unnormed sums of ``n`` draws, ``R`` replications.

    Returns an array, or ``(log|S|, sign)`` when ``log_space``.
    """
    rows = _block_rows(n)
    out = np.empty(R)
    sgn = np.empty(R) if log_space else None
    for j, start in enumerate(range(0, R, rows)):
        k = min(rows, R - start)
        rng = substream(seed, n, j)
        if log_space:
            sign, logs = law.draw_log(rng, (k, n))
            out[start:start + k], sgn[start:start + k] = _signed_logsumexp(sign, logs)
        else:
            out[start:start + k] = compensated_sum(law.draw(rng, (k, n)))
    return (out, sgn) if log_space else out


def simulate_normed_sums(exp: SumExperiment) -> dict[int, np.ndarray]:
    """Per-``n`` normed sums ``S(n)`` (``log|S(n)|`` for superheavy laws)."""
    logb = exp.log_norming()
    out = {}
    for n in exp.n_set:
        n = int(n)
        if exp.superheavy:
            logs, _ = raw_sums(exp.law, n, exp.R, exp.seed, log_space=True)
            out[n] = logs - logb[n]
            continue
        s = raw_sums(exp.law, n, exp.R, exp.seed)
        if exp.centering == "true":
            s = s - n * float(getattr(exp.law, "mean", 0.0))
        elif exp.centering == "empirical":
            s = s - s.mean()
        out[n] = s / math.exp(logb[n])
    return out


@dataclass(frozen=True)
class EmpiricalTail:
    """Per-``n`` tail frequencies of ``|S(n)|`` and their max over ``n``."""

    x: np.ndarray
    ns: np.ndarray
    tails: np.ndarray
    R: int
    sums: dict = field(default_factory=dict, repr=False)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(self.tails * (1.0 - self.tails) / self.R)

    @property
    def argmax_n(self) -> np.ndarray:
        return self.ns[np.argmax(self.tails, axis=0)]

    @property
    def U_hat(self) -> np.ndarray:
        return self.tails.max(axis=0)

    @property
    def U_se(self) -> np.ndarray:
        u = self.U_hat
        return np.sqrt(u * (1.0 - u) / self.R)


def tail_frequencies(abs_values: np.ndarray, x: np.ndarray) -> np.ndarray:
    srt = np.sort(abs_values)
    return (srt.size - np.searchsorted(srt, x, side="right")) / srt.size


def run_sums(exp: SumExperiment, keep_sums: bool = True) -> EmpiricalTail:
    x = np.asarray(exp.x_grid, dtype=float)
    sums = simulate_normed_sums(exp)
    ns = np.array(sorted(sums))
    rows = []
    for n in ns:
        if exp.superheavy:
            rows.append(tail_frequencies(sums[n], np.log(x)))
        else:
            rows.append(tail_frequencies(np.abs(sums[n]), x))
    return EmpiricalTail(x, ns, np.array(rows), exp.R, sums if keep_sums else {})


@dataclass(frozen=True)
class VerifyReport:
    x: np.ndarray
    margin: np.ndarray
    violations: list
    checked: np.ndarray
    passed: bool

    def as_rows(self):
        return [(float(x), float(m), bool(c)) for x, m, c in zip(self.x, self.margin, self.checked)]


def verify_bound(emp: EmpiricalTail, curve, slack: float = 3.0) -> VerifyReport:
    """Margin ``curve(x) - (U_hat(x) - slack * SE)`` on the curve's validity range."""
    x = np.asarray(emp.x, dtype=float)
    if x.size == 0:
        return VerifyReport(x, np.zeros(0), [], np.zeros(0, bool), True)
    ok = np.asarray(curve.valid(x))
    margin = np.full(x.shape, np.nan)
    if ok.any():
        margin[ok] = np.asarray(curve(x[ok])) - (emp.U_hat[ok] - slack * emp.U_se[ok])
    bad = [(float(x[i]), float(margin[i])) for i in np.flatnonzero(ok & (margin < 0))]
    return VerifyReport(x, margin, bad, ok, not bad)


def martingale_differences(law, n: int, seed: int, dependence: float, rows: int | None = None,
                           block: int = 0) -> np.ndarray:
    """``xi_k = eps_k * g_{k-1}`` with ``g_{k-1} = 1 + dependence * 1{eps_{k-1} > 0}``.

    ``eps`` are i.i.d. symmetric draws from ``law``; ``g_0 = 1``.  The sign
    symmetry of ``eps_k`` makes the conditional mean zero; ``dependence=0``
    returns the innovations themselves.  ``rows`` independent sequences
    come from substream ``(seed, n, block)``.
    """
    if not 0 <= dependence <= 1:
        raise ValueError("dependence must lie in [0, 1]")
    rng = substream(seed, n, block)
    shape = (n,) if rows is None else (rows, n)
    eps = law.draw(rng, shape)
    if dependence == 0:
        return eps
    g = np.ones(shape)
    g[..., 1:] += dependence * (eps[..., :-1] > 0)
    return eps * g


def martingale_sums(law, n: int, R: int, seed: int, dependence: float) -> np.ndarray:
    rows = _block_rows(n)
    out = np.empty(R)
    for j, start in enumerate(range(0, R, rows)):
        k = min(rows, R - start)
        out[start:start + k] = compensated_sum(martingale_differences(law, n, seed, dependence, k, block=j))
    return out


def empirical_pnorm(values: np.ndarray, p: float, n_boot: int = 200, seed: int = 0) -> tuple[float, float]:
    """``(mean |v|^p)^(1/p)`` and a bootstrap standard error."""
    a = np.abs(np.asarray(values, dtype=float)) ** p
    est = a.mean() ** (1 / p)
    rng = np.random.default_rng(seed)
    boots = np.empty(n_boot)
    for b in range(n_boot):
        boots[b] = a[rng.integers(0, a.size, a.size)].mean() ** (1 / p)
    return float(est), float(boots.std(ddof=1))


# ---------------------------------------------------------------------------
# discrete gap fixture

@dataclass(frozen=True)
class GapFixture:
    """``P(zeta = exp(e^k)) = C5 exp(beta r k - r e^k)``, ``k = 1..k_max``.

    Atoms are stored through ``log_atoms = e^k``; probabilities beyond
    ``k_max`` are below the stated truncation level.
    """

    r: float
    beta: float
    k: np.ndarray
    log_atoms: np.ndarray
    log_probs: np.ndarray
    c5: float
    truncation: float

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def mean(self) -> float:
        return float(np.exp(logsumexp(self.log_probs + self.log_atoms)))

    def log_moment(self, p: float, k_extra: int = 200) -> float:
        """``log E zeta^p`` summed far past ``k_max`` (terms decay like exp(-(r-p) e^k))."""
        ks = np.arange(1, max(self.k.size, 1) + k_extra + 1, dtype=float)
        with np.errstate(over="ignore"):
            ek = np.exp(ks)
        terms = math.log(self.c5) + self.beta * self.r * ks + (p - self.r) * ek
        return float(logsumexp(terms[np.isfinite(terms)]))

    def moment_norm(self, p: float) -> float:
        if p >= self.r:
            return math.inf
        return math.exp(self.log_moment(p) / p)

    def tail_at_atom(self, k: int) -> float:
        """``P(zeta >= x_k)``: the atom at ``x_k`` included."""
        return float(np.exp(logsumexp(self.log_probs[k - 1:])))

    def c6_ratios(self, k_max: int | None = None) -> np.ndarray:
        """``P(zeta >= x_k) x_k^r / (log x_k)^beta`` for ``k = 1..k_max``."""
        k_max = self.k.size if k_max is None else k_max
        out = []
        for k in range(1, k_max + 1):
            lt = math.log(self.tail_at_atom(k))
            out.append(math.exp(lt + self.r * self.log_atoms[k - 1] - self.beta * math.log(self.log_atoms[k - 1])))
        return np.array(out)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        cdf = np.cumsum(self.probs)
        idx = np.minimum(np.searchsorted(cdf / cdf[-1], rng.random(size), side="right"), cdf.size - 1)
        with np.errstate(over="ignore"):
            return np.exp(self.log_atoms[idx])

    def centered(self) -> "CenteredGap":
        return CenteredGap(self)

    def compound(self) -> "CompoundPoissonGap":
        return CompoundPoissonGap(self)


@dataclass(frozen=True)
class CenteredGap:
    base: GapFixture
    mean: float = 0.0

    def draw(self, rng, size):
        return self.base.draw(rng, size) - self.base.mean


@dataclass(frozen=True)
class CompoundPoissonGap:
    """``theta = sum_{m <= tau} (zeta_m - E zeta)`` with ``tau ~ Poisson(1)``."""

    base: GapFixture
    mean: float = 0.0

    def draw(self, rng, size):
        tau = rng.poisson(1.0, size)
        total = int(tau.sum())
        pieces = self.base.draw(rng, total) - self.base.mean
        owners = np.repeat(np.arange(tau.size), tau.ravel())
        out = np.bincount(owners, weights=pieces, minlength=tau.size)
        return out.reshape(np.shape(tau))


def make_gap_fixture(r: float, beta: float, k_max: int | None = None, tol: float = 1e-15) -> GapFixture:
    """Normalized atom table.

    The default ``k_max`` keeps every atom whose probability is above
    ``exp(-700)``; an explicit ``k_max`` must leave a dropped mass below ``tol``.
    """
    if not r > 2 or not beta > 0:
        raise ValueError("gap fixture needs r > 2 and beta > 0")
    ks = np.arange(1, 64, dtype=float)
    log_w = beta * r * ks - r * np.exp(ks)
    log_norm = logsumexp(log_w)
    rel = log_w - log_norm
    if k_max is None:
        k_max = int(np.flatnonzero(rel > -700.0)[-1]) + 1
    dropped = float(np.exp(logsumexp(rel[k_max:]))) if k_max < ks.size else 0.0
    if dropped >= tol:
        raise ValueError(f"k_max={k_max} drops probability mass {dropped:.3g} >= {tol:g}")
    kk = ks[:k_max]
    log_p = log_w[:k_max]
    log_c5 = -logsumexp(log_p)
    return GapFixture(r, beta, kk, np.exp(kk), log_p + log_c5, math.exp(log_c5), dropped)


# ---------------------------------------------------------------------------
# superheavy laws

@dataclass(frozen=True)
class WllnReport:
    ns: np.ndarray
    probs: np.ndarray
    se: np.ndarray
    log_b: np.ndarray
    decreasing: bool
    trend: float


def wlln_superheavy(model: TailModel, w: Callable[[int], float], n_set: Sequence[int],
                    eps: float, R: int, seed: int) -> WllnReport:
    """``P(|S(n)| > eps)`` under exponential norming, with a trend check.

    ``decreasing`` holds when every successive estimate is at most the
    previous one plus 3 combined standard errors; ``trend`` is the
    least-squares slope of the estimates against ``log n``.
    """
    exp = SumExperiment(model, "superheavy", tuple(n_set), R, seed, (eps,), weight=w)
    emp = run_sums(exp, keep_sums=False)
    p = emp.tails[:, 0]
    se = np.sqrt(p * (1 - p) / R)
    ok = all(p[i + 1] <= p[i] + 3 * math.hypot(se[i], se[i + 1]) for i in range(p.size - 1))
    logb = exp.log_norming()
    trend = float(np.polyfit(np.log(emp.ns), p, 1)[0]) if p.size > 1 else 0.0
    return WllnReport(emp.ns, p, se, np.array([logb[int(n)] for n in emp.ns]), ok, trend)


@dataclass(frozen=True)
class SandwichReport:
    x: np.ndarray
    lower: np.ndarray
    U_hat: np.ndarray
    se: np.ndarray
    c_fit: float
    c_fit_per_x: np.ndarray
    lower_ok: np.ndarray


def superheavy_sandwich(emp: EmpiricalTail, model: TailModel) -> SandwichReport:
    """Compare ``U_hat`` with ``T(x)`` and fit the smallest ``C`` with
    ``T(x / C) >= U_hat(x) - 3 SE`` on the grid."""
    x = emp.x
    u, se = emp.U_hat, emp.U_se
    t = np.asarray(model(x))
    c = np.ones_like(x)
    for i, (xi, ui) in enumerate(zip(x, u - 3 * se)):
        if ui <= 0 or ui <= t[i]:
            continue
        if ui >= model.tail_at_cutoff:
            c[i] = xi / model.x0
        else:
            c[i] = xi / model.quantile(ui)
    return SandwichReport(x, t, u, se, float(c.max()), c, u + 3 * se >= t)
