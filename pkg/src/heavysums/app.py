"""Bound inversion and non-asymptotic confidence intervals for means."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._numerics import bisect_boundary
from .bounds import BoundCurve, heavy_curve, intermediate_curve, moderate_curve
from .charfn import PsiBar, PsiFunction
from .glspace import natural_nu
from .norming import solve_b
from .tailmodel import Regime, TailModel

__all__ = ["CiReport", "UnreachableDeltaError", "solve_X", "regime_curve", "ci_mean", "location_estimate"]


class UnreachableDeltaError(ValueError):
    pass


def _floor_point(curve: BoundCurve) -> float:
    lo = curve.x_min
    if lo <= 0:
        return 0.0
    return lo * (1 + 1e-15) if curve.strict else lo


def solve_X(curve: BoundCurve, delta: float, x_max: float = 1e300) -> float:
    """Smallest ``X`` with ``curve(X) <= delta`` (bisection in ``log x``).

    The bracket is grown from ``max(1, floor)`` outward, so curves are never
    evaluated far below the crossing.  Results are memoized per curve.
    """
    return _solve_X(curve, float(delta), float(x_max))


@lru_cache(maxsize=256)
def _solve_X(curve: BoundCurve, delta: float, x_max: float) -> float:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    floor = _floor_point(curve)
    hi = max(floor, 1.0)
    lo = None
    if float(curve(hi)) <= delta:
        x = hi
        while True:
            nxt = x / 16.0
            if nxt <= floor or nxt < 1e-300:
                if floor > 0 and float(curve(floor)) > delta:
                    lo = floor
                    break
                raise UnreachableDeltaError(
                    f"delta={delta:g} is not below the curve at its floor x={max(floor, nxt):g}")
            if float(curve(nxt)) > delta:
                lo = nxt
                break
            hi = x = nxt
    else:
        lo = hi
        while float(curve(hi)) > delta:
            lo = hi
            hi *= 16.0
            if hi > x_max:
                raise UnreachableDeltaError(
                    f"curve stays above delta={delta:g} up to x={x_max:g}; extend the x-range")
    s = bisect_boundary(lambda v: float(curve(math.exp(v))) <= delta, math.log(lo), math.log(hi),
                        rtol=0.0, atol=1e-15)
    return math.exp(s)


@dataclass(frozen=True)
class CiReport:
    estimate: float
    half_width: float
    delta: float
    n: int
    b_n: float
    tag: str
    X: float
    truth: float | None = None
    hit: bool | None = None

    @property
    def interval(self) -> tuple[float, float]:
        return self.estimate - self.half_width, self.estimate + self.half_width


def regime_curve(model: TailModel, regime: Regime | str | None = None, *,
                 martingale: bool = False, psi: PsiFunction | None = None) -> tuple[BoundCurve, PsiFunction | None]:
    """Bound curve for the normed sums of ``model`` and the ``psi`` used for
    norming (``None`` when ``b(n) = sqrt(n)``).  ``regime`` defaults to the
    model's classification."""
    regime = model.classify() if regime is None else Regime(regime)
    if regime is Regime.MODERATE:
        if model.variant == "superheavy" or model.r <= 2:
            raise ValueError("moderate bounds need r > 2")
        return moderate_curve(natural_nu(model, p_lo=2.0),
                              "martingale" if martingale else "general"), None
    if martingale:
        raise ValueError("martingale bounds are only wired for the moderate regime")
    psi = PsiFunction.from_tail(model) if psi is None else psi
    pb = PsiBar(psi)
    if regime is Regime.HEAVY:
        return heavy_curve(model, pb), psi
    if regime is Regime.INTERMEDIATE:
        return intermediate_curve(model, pb), psi
    raise ValueError(f"no mean-estimation bound for regime {regime.value}")


def _norming(psi: PsiFunction | None, n: int) -> float:
    return math.sqrt(n) if psi is None else solve_b(psi, n)


def ci_mean(samples, model: TailModel, delta: float, regime: Regime | str | None = None, *,
            martingale: bool = False, truth: float | None = None,
            curve: BoundCurve | None = None, psi: PsiFunction | None = None) -> CiReport:
    """Interval ``mean +- X(delta) b(n) / n`` for the mean of ``samples``.

    ``model`` describes the tail of the centered summands.  A prebuilt
    ``curve`` (with its ``psi``; ``None`` meaning ``sqrt(n)`` norming) skips
    the bound construction, which matters inside coverage loops.
    """
    if model.variant == "superheavy" or model.r <= 1:
        raise ValueError("mean estimation needs r > 1")
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    if curve is None:
        curve, psi = regime_curve(model, regime, martingale=martingale, psi=psi)
    X = solve_X(curve, delta)
    b = _norming(psi, n)
    est = float(np.mean(x))
    half = X * b / n
    hit = None if truth is None else bool(abs(est - truth) <= half)
    return CiReport(est, half, delta, n, b, curve.tag, X, truth, hit)


def location_estimate(observations, model: TailModel, delta: float, *, truth: float | None = None,
                      curve: BoundCurve | None = None, psi: PsiFunction | None = None,
                      regime: Regime | str | None = None) -> CiReport:
    """``theta + noise`` observations: the mean with the same interval as
    :func:`ci_mean`, ``model`` describing the noise."""
    return ci_mean(observations, model, delta, regime, truth=truth, curve=curve, psi=psi)
