"""Random fields on finite index sets: natural distances, covering numbers,
entropy integrals and uniform tail shapes for field suprema."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .bounds import BoundCurve, BoundValidityError
from .glspace import NuFunction, gl_norm
from .tailmodel import SlowlyVarying

__all__ = [
    "GridSpace",
    "CoveringProfile",
    "Finiteness",
    "EntropyIntegral",
    "AnalyticCovering",
    "natural_distance",
    "empirical_distance",
    "rescale_profile",
    "covering_numbers",
    "greedy_cover_size",
    "entropy_integral",
    "uniform_tail_shape",
    "uniform_tail_curve",
    "uniform_tail_bound",
    "UniformCi",
    "uniform_ci",
]

TRIANGLE_TOL = 1e-9


@dataclass(frozen=True)
class GridSpace:
    """Finite semi-metric space: point coordinates and a distance matrix."""

    coords: np.ndarray
    dist: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        if d.shape[0] == 0:
            raise ValueError("empty point set")
        if np.any(d < 0) or not np.array_equal(d, d.T) or np.any(np.diag(d) != 0):
            raise ValueError("distance must be nonnegative, symmetric, zero on the diagonal")
        if d.shape[0] <= 500:
            tol = TRIANGLE_TOL * max(1.0, d.max())
            for k in range(d.shape[0]):
                if np.any(d > d[:, k:k + 1] + d[k:k + 1, :] + tol):
                    raise ValueError(f"triangle inequality violated through point {k}")
        object.__setattr__(self, "dist", d)

    @classmethod
    def from_points(cls, coords, metric: Callable | None = None) -> "GridSpace":
        c = np.asarray(coords, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if metric is None:
            d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
        else:
            d = np.array([[metric(a, b) for b in c] for a in c], dtype=float)
        return cls(c, d)

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.dist.max())


def rescale_profile(moment_fn: Callable[[float], float], K: float, K0: float = 1.0) -> Callable[[float], float]:
    """``p -> (K / K0)^(1/p) moment_fn(p)``: per-point tail constants folded
    into the moment profile, normalized so the reference point has ``K0``."""
    ratio = K / K0
    return lambda p: ratio ** (1.0 / p) * moment_fn(p)


def natural_distance(diff_moments: Callable[[int, int], Callable[[float], float]], theta: NuFunction,
                     coords) -> GridSpace:
    """``d(i, j) = ||eta(i) - eta(j)||`` in the norm defined by ``theta``.

    ``diff_moments(i, j)`` returns ``p -> |eta(i) - eta(j)|_p``.
    """
    c = np.asarray(coords, dtype=float)
    n = c.shape[0]
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            res = gl_norm(diff_moments(i, j), theta)
            if not math.isfinite(res.value):
                raise ValueError(f"infinite distance between points {i} and {j} (moment blows up at p={res.argmax:g})")
            d[i, j] = d[j, i] = res.value
    return GridSpace(c, _metric_closure(d))


def _metric_closure(d: np.ndarray) -> np.ndarray:
    # sup of ratios is a norm, so d is a semi-metric up to the grid/refinement
    # error of the sup; shortest paths remove that residue
    d = d.copy()
    for k in range(d.shape[0]):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def empirical_distance(samples: np.ndarray, theta: NuFunction, coords=None) -> GridSpace:
    """Natural distance from field samples (replicates x points) via
    empirical moments of the differences."""
    s = np.asarray(samples, dtype=float)
    coords = np.arange(s.shape[1], dtype=float) if coords is None else coords

    def diff(i, j):
        a = np.abs(s[:, i] - s[:, j])
        return lambda p: float(np.mean(a ** p) ** (1.0 / p))

    return natural_distance(diff, theta, coords)


@dataclass(frozen=True)
class CoveringProfile:
    """Greedy covering counts on a decreasing ``eps`` grid (upper bounds on
    the minimal covering numbers)."""

    eps: np.ndarray
    N: np.ndarray
    greedy: bool = True

    @property
    def H(self) -> np.ndarray:
        return np.log(self.N)


def _farthest_point(d: np.ndarray, eps: float, start: int) -> int:
    dmin = d[start].copy()
    k = 1
    while dmin.max() > eps:
        j = int(dmin.argmax())
        dmin = np.minimum(dmin, d[j])
        k += 1
    return k


def _set_cover(d: np.ndarray, eps: float) -> int:
    ball = d <= eps
    uncovered = np.ones(d.shape[0], dtype=bool)
    k = 0
    while uncovered.any():
        j = int((ball & uncovered).sum(axis=1).argmax())
        uncovered &= ~ball[j]
        k += 1
    return k


def greedy_cover_size(space: GridSpace, eps: float, max_starts: int = 64) -> int:
    """Smallest of the farthest-point traversals (from up to ``max_starts``
    starting points) and the largest-ball-first greedy set cover."""
    d = space.dist
    if eps >= space.diameter:
        return 1
    starts = range(min(d.shape[0], max_starts))
    return min(min(_farthest_point(d, eps, s) for s in starts), _set_cover(d, eps))


def covering_numbers(space: GridSpace, eps_grid) -> CoveringProfile:
    eps = np.sort(np.asarray(eps_grid, dtype=float))[::-1]
    counts = np.array([greedy_cover_size(space, float(e)) for e in eps])
    # a cover at a smaller radius also covers at a larger one
    counts = np.minimum.accumulate(counts[::-1])[::-1]
    return CoveringProfile(eps, counts.astype(np.int64))


class Finiteness(str, enum.Enum):
    FINITE = "finite"
    DIVERGENT = "divergent"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class EntropyIntegral:
    value: float
    flag: Finiteness
    exponent: float
    extrapolated: bool
    log_exponent: float = 0.0


@dataclass(frozen=True)
class AnalyticCovering:
    """Covering function given through ``u -> log N(e^-u)``, ``u = -log eps``."""

    log_n: Callable[[float], float]
    # far points for the exponent test; plain callables cannot go past eps ~ 1e-300
    probe: tuple = (1e4, 1e5, 1e6)

    @classmethod
    def power(cls, alpha: float, c: float = 1.0) -> "AnalyticCovering":
        """``N(eps) = max(1, c eps^(-1/alpha))``."""
        return cls(lambda u: max(0.0, math.log(c) + u / alpha))

    @classmethod
    def from_callable(cls, N: Callable[[float], float]) -> "AnalyticCovering":
        return cls(lambda u: math.log(N(math.exp(-u))), probe=(100.0, 300.0, 690.0))


def _log_integrand(log_n: float, r: float, e: float, L: SlowlyVarying) -> float:
    # log of N^(1/r) H^e L(H)^(1/r) with 0^0 = 1
    h = log_n
    if h <= 0.0:
        return L.log_scalar(0.0) / r if e == 0 else -math.inf
    return log_n / r + e * math.log(h) + L.log_scalar(h) / r


def _exponent_test(log_f: Callable[[float], float], us=(1e4, 1e5, 1e6)):
    """Classify ``int^inf exp(log_f(u) - u) du`` from the growth of ``log_f``.

    Solves ``log_f(u) = a + slope u + log_power log u`` at three far points.
    Returns ``(a, slope, log_power, flag)``.
    """
    A = np.array([[1.0, u, math.log(u)] for u in us])
    vals = np.array([log_f(u) for u in us])
    if np.any(np.isneginf(vals)):
        return -math.inf, 0.0, 0.0, Finiteness.FINITE
    a, slope, lp = np.linalg.solve(A, vals)
    if slope < 1 - 1e-9:
        flag = Finiteness.FINITE
    elif slope > 1 + 1e-9:
        flag = Finiteness.DIVERGENT
    else:
        flag = Finiteness.FINITE if lp < -1 else Finiteness.DIVERGENT
    return float(a), float(slope), float(lp), flag


def _integrate_log(log_f: Callable[[float], float], u0: float, probe) -> float:
    """``int_u0^inf exp(log_f(u) - u) du`` with the fitted far form past ``probe[-1]``."""
    a, slope, lp, _ = _exponent_test(log_f, probe)
    u_max = max(probe[-1], u0)
    g = lambda u: math.exp(log_f(u) - u)
    edges = np.unique(np.concatenate([[u0], u0 + np.geomspace(1.0, max(u_max - u0, 1.0), 16)]))
    body = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        body += integrate.quad(g, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    if math.isinf(a):
        return body
    tail, _ = integrate.quad(lambda u: math.exp(a + (slope - 1.0) * u + lp * math.log(u)), u_max, math.inf,
                             epsabs=0.0, epsrel=1e-10, limit=200)
    return body + tail


def entropy_integral(covering: CoveringProfile | AnalyticCovering | Callable, r: float, gamma: float = 0.0,
                     L: SlowlyVarying | None = None, variant: str = "continuity",
                     extrapolate: bool = True) -> EntropyIntegral:
    """``int_0^1 N^(1/r) H^e L(H)^(1/r) d eps``, ``e = gamma/r`` (continuity)
    or ``(gamma + 1)/r`` (limit).

    Profiles are integrated as step functions (``N`` on ``(eps_(i+1), eps_i]``
    taken at ``eps_(i+1)``, ``N(eps_max)`` above the grid) and extended below
    the smallest resolved ``eps`` by a power fit on the three smallest scales.
    The finiteness flag comes from the ``eps -> 0`` exponent.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    if variant not in ("continuity", "limit"):
        raise ValueError("variant must be continuity or limit")
    L = SlowlyVarying.constant() if L is None else L
    e = (gamma if variant == "continuity" else gamma + 1.0) / r
    if isinstance(covering, CoveringProfile):
        return _profile_integral(covering, r, e, L, extrapolate)
    an = covering if isinstance(covering, AnalyticCovering) else AnalyticCovering.from_callable(covering)
    log_f = lambda u: _log_integrand(an.log_n(u), r, e, L)
    _, slope, lp, flag = _exponent_test(log_f, an.probe)
    if flag is Finiteness.DIVERGENT:
        return EntropyIntegral(math.inf, flag, -slope, False, lp)
    return EntropyIntegral(_integrate_log(log_f, 0.0, an.probe), flag, -slope, False, lp)


def _profile_integral(prof: CoveringProfile, r: float, e: float, L: SlowlyVarying,
                      extrapolate: bool) -> EntropyIntegral:
    eps = np.asarray(prof.eps, dtype=float)
    logn = np.log(np.asarray(prof.N, dtype=float))
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps grid must be strictly decreasing")
    f = np.exp([_log_integrand(v, r, e, L) for v in logn])
    total = 0.0
    top = min(1.0, eps[0])
    if eps[0] < 1.0:
        total += f[0] * (1.0 - eps[0])
    # (eps_(i+1), eps_i] carries the larger count at eps_(i+1)
    hi = np.minimum(eps[:-1], 1.0)
    lo = np.minimum(eps[1:], 1.0)
    total += float(np.sum(f[1:] * np.clip(hi - lo, 0.0, None)))
    low = min(eps[-1], top)
    if not extrapolate:
        return EntropyIntegral(total, Finiteness.FINITE, 0.0, False)
    if eps.size < 3 or np.unique(eps[-3:]).size < 3:
        return EntropyIntegral(math.nan, Finiteness.INDETERMINATE, math.nan, True)
    u = -np.log(eps[-3:])
    c, a = np.polyfit(u, logn[-3:], 1)
    c = max(c, 0.0)
    a = logn[-1] - c * u[-1] if c == 0 else a
    log_f = lambda v: _log_integrand(max(a + c * v, logn[-1]), r, e, L)
    _, slope, lp, flag = _exponent_test(log_f)
    if flag is Finiteness.DIVERGENT:
        return EntropyIntegral(math.inf, flag, -slope, True, lp)
    val = _integrate_log(log_f, -math.log(low), (1e4, 1e5, 1e6))
    return EntropyIntegral(total + val, flag, -slope, True, lp)


def uniform_tail_shape(r: float, gamma: float, L: SlowlyVarying | None, variant: str, x):
    """``x^-r (log x)^g L(log x)`` with ``g = gamma`` (single field) or
    ``gamma + 1`` (normed sums); defined for ``x > e``."""
    if variant not in ("single", "sums"):
        raise ValueError("variant must be single or sums")
    L = SlowlyVarying.constant() if L is None else L
    x = np.asarray(x, dtype=float)
    if np.any(x <= math.e):
        raise BoundValidityError(f"uniform field bound needs x > e (got {x.min():g})")
    g = gamma if variant == "single" else gamma + 1.0
    lx = np.log(x)
    return x ** (-r) * lx ** g * np.asarray(L(lx))


def uniform_tail_curve(r: float, gamma: float = 0.0, L: SlowlyVarying | None = None, variant: str = "sums",
                       constant: float | None = None, reference: Callable | None = None,
                       calibration=None) -> BoundCurve:
    """Shape times a constant: user supplied, or the smallest constant that
    puts the curve above ``reference`` on ``calibration``."""
    shape = lambda x: uniform_tail_shape(r, gamma, L, variant, x)
    if constant is None:
        if reference is None or calibration is None:
            raise ValueError("need a constant or a reference with a calibration grid")
        grid = np.asarray(calibration, dtype=float)
        constant = float(np.max(np.asarray(reference(grid)) / shape(grid)))
        prov = "computed"
    else:
        prov = "user"
    c = constant
    g = gamma if variant == "single" else gamma + 1.0
    return BoundCurve(lambda x: np.minimum(1.0, c * shape(x)), f"field-{variant}", x_min=math.e,
                      strict=True, constant=c, provenance=prov, shape=f"x^-r (log x)^{g:g} L(log x)")


def uniform_tail_bound(r: float, gamma: float, L: SlowlyVarying | None, variant: str, x, constant: float = 1.0):
    return uniform_tail_curve(r, gamma, L, variant, constant=constant)(x)


@dataclass(frozen=True)
class UniformCi:
    center: np.ndarray
    half_width: float
    X: float
    b_n: float
    n: int
    delta: float
    truth: np.ndarray | None = None
    covered: bool | None = None
    lower: np.ndarray = field(init=False, repr=False)
    upper: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "lower", self.center - self.half_width)
        object.__setattr__(self, "upper", self.center + self.half_width)


def uniform_ci(field_samples, curve: BoundCurve, delta: float, b_n: float | None = None,
               truth=None) -> UniformCi:
    """Simultaneous band ``mean(v) +- X(delta) b(n) / n`` over all points.

    ``field_samples`` has one row per summand and one column per point;
    ``b_n`` defaults to ``sqrt(n)``.
    """
    from .app import solve_X

    s = np.asarray(field_samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    n = s.shape[0]
    b = math.sqrt(n) if b_n is None else float(b_n)
    X = solve_X(curve, delta)
    half = X * b / n
    center = s.mean(axis=0)
    covered = None
    if truth is not None:
        truth = np.broadcast_to(np.asarray(truth, dtype=float), center.shape)
        covered = bool(np.all(np.abs(center - truth) <= half))
    return UniformCi(center, half, X, b, n, delta, truth, covered)
