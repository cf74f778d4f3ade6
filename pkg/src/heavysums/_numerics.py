"""Small numerical helpers shared across modules.

Root finding here is deliberately bracketing bisection: every target in the
package is monotone (tails, ψ near zero, bound curves), so robustness matters
more than speed.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np

BISECT_RTOL = 1e-10
BISECT_MAXITER = 200

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def bisect_boundary(
    pred: Callable[[float], bool],
    lo: float,
    hi: float,
    *,
    rtol: float = BISECT_RTOL,
    atol: float = 0.0,
    maxiter: int = BISECT_MAXITER,
) -> float:
    """Smallest point of ``[lo, hi]`` where a monotone predicate turns true.

    ``pred`` must be False..False True..True on the bracket and ``pred(hi)``
    must hold. Returns the upper end of the final bracket, so the returned
    point always satisfies the predicate (plateaus resolve to their left
    edge up to tolerance).
    """
    if pred(lo):
        return lo
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= max(atol, rtol * max(abs(lo), abs(hi))):
            break
    return hi


def bisect_boundary_log(
    pred: Callable[[float], bool],
    lo: float,
    hi: float,
    *,
    rtol: float = BISECT_RTOL,
    maxiter: int = BISECT_MAXITER,
) -> float:
    """:func:`bisect_boundary` on a positive bracket, bisecting in log space.

    ``rtol`` is the relative tolerance on the returned point itself.
    """
    if lo <= 0 or hi <= 0:
        raise ValueError("log-space bisection needs a positive bracket")
    y = bisect_boundary(
        lambda s: pred(math.exp(s)),
        math.log(lo),
        math.log(hi),
        rtol=0.0,
        atol=math.log1p(rtol),
        maxiter=maxiter,
    )
    return math.exp(y)


def expand_until(pred: Callable[[float], bool], start: float, factor: float = 2.0,
                 limit: float = 1e300) -> float:
    """Grow ``start`` geometrically until ``pred`` holds; raise past ``limit``."""
    x = start
    while not pred(x):
        x *= factor
        if x > limit:
            raise ValueError("no bracket found below %g" % limit)
    return x


def golden_max(f: Callable[[np.ndarray], np.ndarray], a: np.ndarray, b: np.ndarray,
               iters: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized golden-section maximization of ``f`` on ``[a, b]`` elementwise.

    Returns (argmax, max) arrays. ``f`` is assumed unimodal on each bracket;
    when it is not, the result is still a point of the bracket, so the value
    never exceeds the true maximum.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    for _ in range(iters):
        c = b - _INV_PHI * (b - a)
        d = a + _INV_PHI * (b - a)
        left = f(c) >= f(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    x = 0.5 * (a + b)
    return x, f(x)


def golden_min_scalar(f: Callable[[float], float], a: float, b: float,
                      iters: int = 80) -> tuple[float, float]:
    """Scalar golden-section minimization; returns (argmin, min)."""
    x, v = golden_max(lambda z: -np.vectorize(f)(z), np.array([a]), np.array([b]), iters)
    return float(x[0]), -float(v[0])


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def composite_gl(a: float, b: float, panels: int, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    x, w = gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


def compensated_sum(x: np.ndarray) -> np.ndarray:
    """Row sums of a 2-D array with error-free pairwise TwoSum accumulation.

    Each pairwise addition's rounding error is captured exactly (Knuth's
    TwoSum) and the error terms are added back at the end. Heavy-tailed rows
    mix magnitudes across many orders, which plain summation handles poorly.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a 2-D array")
    if x.shape[1] == 0:
        return np.zeros(x.shape[0])
    err = np.zeros(x.shape[0])
    while x.shape[1] > 1:
        if x.shape[1] % 2:
            x = np.concatenate([x, np.zeros((x.shape[0], 1))], axis=1)
        a = x[:, 0::2]
        b = x[:, 1::2]
        s = a + b
        bb = s - a
        e = (a - (s - bb)) + (b - bb)
        err += e.sum(axis=1)
        x = s
    return x[:, 0] + err


def log_grid(lo: float, hi: float, num: int) -> np.ndarray:
    return np.geomspace(lo, hi, num)


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log y against log x (positive entries only)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two positive points for a slope")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])
