"""Grand Lebesgue norms, moment profiles and the moment-to-tail transform.

A moment profile ``nu(p)`` on ``[p_lo, r)`` defines the norm
``||xi|| = sup_p |xi|_p / nu(p)`` and the tail majorant
``T_nu(x) = inf_p (nu(p) / x)^p``.  Profiles blow up at ``r``, so every
grid here is geometric in the distance to ``r`` and stops ``1e-6`` short of
both ends.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from ._numerics import bisect_boundary, golden_max, loglog_slope
from .charfn import PsiFunction
from .tailmodel import TailModel

__all__ = [
    "NuFunction",
    "GLNormResult",
    "TailFromNu",
    "DegenerateWeightWarning",
    "gl_norm",
    "natural_nu",
    "tail_from_nu",
    "tail_from_nu_detailed",
    "orlicz_weight_norm",
    "moments_from_tail_check",
    "p_grid",
]

EDGE = 1e-6


def p_grid(p_lo: float, p_hi: float, num: int = 256) -> np.ndarray:
    """Increasing grid on ``(p_lo, p_hi)``, geometric in ``p_hi - p``."""
    if math.isinf(p_hi):
        return np.linspace(p_lo + EDGE, p_lo + 50.0, num)
    d = np.geomspace(p_hi - p_lo - EDGE, EDGE, num)
    return p_hi - d


class NuFunction:
    """Positive moment profile on ``[p_lo, p_hi)``; ``+inf`` from ``p_hi`` on.

    ``log_table`` caches ``log nu`` on :func:`p_grid`; refinement between
    grid points uses a cubic spline in ``-log(p_hi - p)`` unless the
    evaluator is declared cheap.
    """

    def __init__(self, evaluator: Callable[[float], float], p_lo: float, p_hi: float,
                 kind: str = "explicit", models: Sequence[TailModel] = (), *,
                 cheap: bool | None = None, num: int = 256):
        if not p_hi > p_lo:
            raise ValueError("support must be a non-empty interval")
        self.p_lo = float(p_lo)
        self.p_hi = float(p_hi)
        self.kind = kind
        self.models = tuple(models)
        self.cheap = kind == "explicit" if cheap is None else cheap
        self._fn = lru_cache(maxsize=4096)(lambda p: float(evaluator(p)))
        self.grid = p_grid(self.p_lo, self.p_hi, num)
        vals = np.array([self._fn(float(p)) for p in self.grid])
        if np.any(~(vals > 0)):
            bad = self.grid[~(vals > 0)][0]
            raise ValueError(f"nu must be positive on its support (p={bad:g})")
        self.log_table = np.log(vals)
        self._finite = np.isfinite(self.log_table)
        self._spline = None
        if self._finite.sum() >= 4:
            self._spline = CubicSpline(self._coord(self.grid[self._finite]), self.log_table[self._finite])

    def _coord(self, p):
        p = np.asarray(p, dtype=float)
        if math.isinf(self.p_hi):
            return p
        return -np.log(self.p_hi - p)

    def __call__(self, p):
        p_arr = np.asarray(p, dtype=float)
        out = np.array([self._fn(float(v)) if self.p_lo <= v < self.p_hi else math.inf
                        for v in p_arr.ravel()]).reshape(p_arr.shape)
        return out if out.ndim else float(out)

    def log_nu(self, p):
        """``log nu(p)``; spline-refined for expensive evaluators."""
        p = np.asarray(p, dtype=float)
        if self.cheap or self._spline is None:
            with np.errstate(divide="ignore"):
                return np.log(self(p))
        inside = (p >= self.grid[0]) & (p <= self.grid[-1])
        out = np.where(inside, self._spline(self._coord(np.clip(p, self.grid[0], self.grid[-1]))), np.inf)
        return out

    @property
    def inf_value(self) -> float:
        return float(np.exp(self.log_table.min()))

    def scaled(self, factor: Callable[[float], float], p_lo: float | None = None) -> "NuFunction":
        """Profile ``p -> factor(p) * nu(p)`` (optionally on a narrower support)."""
        lo = self.p_lo if p_lo is None else max(p_lo, self.p_lo)
        return NuFunction(lambda p: factor(p) * self._fn(p), lo, self.p_hi,
                          kind=self.kind, models=self.models, cheap=self.cheap, num=self.grid.size)

    def __repr__(self):
        return f"NuFunction(kind={self.kind!r}, support=[{self.p_lo:g}, {self.p_hi:g}))"


@dataclass(frozen=True)
class GLNormResult:
    value: float
    argmax: float
    grid: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)
    refined: bool = False


def gl_norm(moment_fn: Callable[[float], float], nu: NuFunction) -> GLNormResult:
    """``sup_p moment_fn(p) / nu(p)`` over the support of ``nu``."""
    grid = nu.grid
    moments = np.array([float(moment_fn(float(p))) for p in grid])
    if np.any(np.isinf(moments)):
        k = int(np.flatnonzero(np.isinf(moments))[0])
        return GLNormResult(math.inf, float(grid[k]), grid, moments)
    ratios = moments / np.exp(nu.log_table)
    i = int(np.argmax(ratios))
    best, arg = float(ratios[i]), float(grid[i])
    refined = False
    if 0 < i < grid.size - 1:
        f = np.vectorize(lambda p: float(moment_fn(float(p))) / math.exp(float(nu.log_nu(p))))
        x, v = golden_max(f, np.array([grid[i - 1]]), np.array([grid[i + 1]]), iters=40)
        if v[0] > best:
            best, arg, refined = float(v[0]), float(x[0]), True
    return GLNormResult(best, arg, grid, ratios, refined)


def natural_nu(source: TailModel | Sequence[TailModel], p_lo: float = 1.0) -> NuFunction:
    """``nu(p) = |xi|_p``, or the pointwise sup over a family of models."""
    models = [source] if isinstance(source, TailModel) else list(source)
    if not models:
        raise ValueError("empty family")
    if any(m.variant == "superheavy" for m in models):
        raise ValueError("all moments infinite for superheavy models")
    r = min(m.r for m in models)
    if not r > p_lo:
        raise ValueError(f"all moments on [{p_lo}, r) infinite: r = {r} <= p_lo")
    kind = "natural" if len(models) == 1 else "family_sup"
    return NuFunction(lambda p: max(m.moment_norm(p) for m in models), p_lo, r, kind, models)


@dataclass(frozen=True)
class TailFromNu:
    value: float
    argmin: float
    at_endpoint: bool


def tail_from_nu_detailed(nu: NuFunction, x: float) -> TailFromNu:
    if not x > 0:
        raise ValueError("x must be positive")
    lx = math.log(x)
    if nu.log_table.min() >= lx:
        return TailFromNu(1.0, math.nan, False)
    grid = nu.grid
    obj = grid * (nu.log_table - lx)
    i = int(np.nanargmin(obj))
    best, arg = float(obj[i]), float(grid[i])
    at_end = i == grid.size - 1 or i == 0
    if 0 < i < grid.size - 1:
        f = lambda p: -(p * (nu.log_nu(p) - lx))
        xs, v = golden_max(f, np.array([grid[i - 1]]), np.array([grid[i + 1]]), iters=50)
        if -v[0] < best:
            best, arg = float(-v[0]), float(xs[0])
    return TailFromNu(min(1.0, math.exp(best)), arg, at_end)


def tail_from_nu(nu: NuFunction, x):
    """``min(1, inf_p (nu(p) / x)^p)``; vectorized over ``x``."""
    if np.ndim(x) == 0:
        return tail_from_nu_detailed(nu, float(x)).value
    return np.array([tail_from_nu_detailed(nu, float(v)).value for v in np.ravel(x)]).reshape(np.shape(x))


class DegenerateWeightWarning(UserWarning):
    pass


def orlicz_weight_norm(a, psi: PsiFunction | Callable, rtol: float = 1e-13) -> float:
    """``inf{t > 0 : sum_k psi(|a_k| / t) <= 1}`` by bisection in ``log t``."""
    a = np.abs(np.asarray(a, dtype=float).ravel())
    a = a[a > 0]
    if a.size == 0:
        return 0.0

    def load(t):
        with np.errstate(over="ignore", divide="ignore"):
            return float(np.sum(psi(a / t)))

    hi = float(a.max())
    while load(hi) > 1.0:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("weight sum never drops to 1")
    lo = hi
    for _ in range(2000):
        lo *= 0.5
        if load(lo) > 1.0:
            break
    else:
        warnings.warn("sum of psi(|a_k|/t) stays <= 1 for all t > 0; returning 0",
                      DegenerateWeightWarning, stacklevel=2)
        return 0.0
    s = bisect_boundary(lambda v: load(math.exp(v)) <= 1.0, math.log(lo), math.log(hi),
                        rtol=0.0, atol=rtol)
    return math.exp(s)


@dataclass(frozen=True)
class MomentTailReport:
    x: np.ndarray
    tail_nu: np.ndarray
    tail_model: np.ndarray
    fitted_log_exponent: float
    model_log_exponent: float
    dominates: bool


def moments_from_tail_check(model: TailModel, x_grid=None, p_lo: float = 1.0) -> MomentTailReport:
    """Tail recovered from the natural profile versus the model tail.

    Fits the exponent ``e`` in ``T_nu(x) x^r ~ (log x)^e``; for regular
    tails one expects ``gamma + 1`` against the model's ``gamma``.
    """
    x = np.geomspace(1e2, 1e6, 25) if x_grid is None else np.asarray(x_grid, dtype=float)
    nu = natural_nu(model, p_lo=p_lo)
    tn = tail_from_nu(nu, x)
    tm = np.asarray(model(x))
    exponent = loglog_slope(np.log(x), tn * x ** model.r)
    gamma = model.kappa if model.variant == "loglog" else model.gamma
    return MomentTailReport(x, tn, tm, exponent, gamma, bool(np.all(tn >= tm * (1 - 1e-9))))
