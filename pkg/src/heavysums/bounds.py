"""Uniform tail bounds for normed sums, one :class:`BoundCurve` per result.

Everything that needs the envelope ``psibar`` goes through two integrals:

* the truncation bound ``x * int_0^{2/x} psibar(t) dt``;
* the moment route ``inf_p K(p) x^-p int_0^inf min(psibar, 2) t^(-p-1) dt``.

Both are done in ``log t`` with composite Gauss-Legendre rules and a
power-law remainder near zero.  Regime bounds whose constants are only
known to exist get them constructively: the sup, over a calibration grid,
of the envelope bound divided by the target shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from ._numerics import composite_gl, golden_max
from .charfn import MonotonicityClass, PsiBar, PsiFunction, classify_mi_md
from .glspace import NuFunction, orlicz_weight_norm, p_grid, tail_from_nu
from .tailmodel import Regime, TailModel

__all__ = [
    "BoundCurve",
    "BoundValidityError",
    "K_fn",
    "psi_moment",
    "bound_thm21",
    "thm21_curve",
    "bound_thm22",
    "thm22_curve",
    "bound_cor21",
    "cor21_curve",
    "bound_heavy",
    "heavy_curve",
    "bound_intermediate",
    "intermediate_curve",
    "rosenthal",
    "bound_moderate",
    "moderate_curve",
    "bound_interpolation",
    "interpolation_curve",
    "bound_superheavy",
    "superheavy_curve",
    "tail_from_moments",
    "bound_weighted",
    "weighted_curve",
    "ROSENTHAL_GENERAL",
    "ROSENTHAL_SYMMETRIC",
]

ROSENTHAL_GENERAL = 1.77638
ROSENTHAL_SYMMETRIC = 1.53573

DEFAULT_CALIBRATION = np.geomspace(10.0, 1e6, 41)


class BoundValidityError(ValueError):
    """Evaluation requested below a curve's validity floor."""


@dataclass(frozen=True)
class BoundCurve:
    """``x -> bound(x)`` clamped to ``[0, 1]``, valid on ``[x_min, inf)``.

    ``strict`` excludes the floor itself.  ``constant`` is the multiplicative
    constant in front of ``shape`` when there is one, with ``provenance``
    saying where it came from (``explicit``, ``computed`` or ``user``).
    """

    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    tag: str
    x_min: float = 0.0
    strict: bool = True
    constant: float | None = None
    provenance: str = "explicit"
    shape: str = ""

    def valid(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x > self.x_min if self.strict else x >= self.x_min

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        if not np.all(self.valid(arr)):
            bad = arr[~self.valid(arr)].ravel()[0]
            raise BoundValidityError(
                f"{self.tag}: x={bad:g} outside validity range x {'>' if self.strict else '>='} {self.x_min:g}")
        out = np.clip(np.asarray(self.evaluator(np.atleast_1d(arr)), dtype=float), 0.0, 1.0)
        return float(out.ravel()[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def K_fn(p):
    """``(2/pi) Gamma(1 + p) sin(pi p / 2)`` on ``0 < p < 2``."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr <= 0) | (arr >= 2)):
        raise ValueError("K(p) needs 0 < p < 2")
    out = 2.0 / math.pi * gamma_fn(1.0 + arr) * np.sin(0.5 * math.pi * arr)
    return float(out) if out.ndim == 0 else out


def psi_moment(psi: Callable, p: float) -> float:
    """``E|xi|^p = K(p) int_0^inf psi(t) t^(-p-1) dt`` for ``0 < p < 2``."""
    k = K_fn(p)

    def f(s):
        v = float(psi(math.exp(min(s, 700.0))))
        return math.exp(math.log(v) - p * s) if v > 0 else 0.0

    lo, _ = integrate.quad(f, -np.inf, 0.0, epsabs=0, epsrel=1e-12, limit=400)
    hi, _ = integrate.quad(f, 0.0, np.inf, epsabs=0, epsrel=1e-12, limit=400)
    return k * (lo + hi)


# ---------------------------------------------------------------------------
# truncation bound

_U_MIN = 1e-10
_TRUNC_NODES = composite_gl(math.log(_U_MIN), 0.0, 24, 16)


def _thm21_values(pb: PsiBar, x: np.ndarray, chunk: int = 8) -> np.ndarray:
    s, w = _TRUNC_NODES
    u = np.exp(s)
    a = pb.index if pb.index is not None else 0.0
    out = np.empty(x.size)
    for start in range(0, x.size, chunk):
        xs = x[start:start + chunk]
        t = 2.0 * u[None, :] / xs[:, None]
        vals = np.asarray(pb(t.ravel())).reshape(t.shape)
        body = (vals * u[None, :]) @ w
        rem = np.asarray(pb(2.0 * _U_MIN / xs)) * _U_MIN / (a + 1.0)
        out[start:start + chunk] = 2.0 * (body + rem)
    return out


def thm21_curve(pb: PsiBar, *, tag: str = "envelope", x_min: float = 0.0) -> BoundCurve:
    """``min(1, x int_0^{2/x} psibar(t) dt)``."""
    return BoundCurve(lambda x: np.minimum(1.0, _thm21_values(pb, np.asarray(x, dtype=float))),
                      tag, x_min=x_min, shape="x int_0^{2/x} psibar")


def bound_thm21(pb: PsiBar, x):
    if np.any(np.asarray(x) <= 0):
        raise ValueError("x must be positive")
    return thm21_curve(pb)(x)


# ---------------------------------------------------------------------------
# moment route

class _MomentIntegral:
    """``I(p) = int_0^inf min(psibar, 2) t^(-p-1) dt`` with cached nodes."""

    T_MIN = 1e-8

    def __init__(self, pb: PsiBar):
        if pb.ceiling is None:
            raise ValueError("the moment-route integral diverges for an unclamped envelope; "
                             "use PsiBar(..., ceiling=2)")
        self.pb = pb
        t_sat = self._saturation()
        self.t_sat = t_sat
        self.s, self.w = composite_gl(math.log(self.T_MIN), math.log(t_sat), 48, 16)
        self.vals = np.asarray(pb(np.exp(self.s)))
        lo = np.asarray(pb.raw(np.array([self.T_MIN / 10.0, self.T_MIN])))
        self.low_value = float(lo[1])
        self.low_slope = float(math.log(lo[1] / lo[0]) / math.log(10.0))

    def _saturation(self) -> float:
        ceiling = self.pb.ceiling
        if self.pb.index:
            return ceiling ** (1.0 / self.pb.index)
        ts = np.geomspace(1.0, 1e6, 241)
        hit = np.flatnonzero(np.asarray(self.pb(ts)) >= ceiling)
        if hit.size == 0:
            raise ValueError("envelope never reaches its ceiling; I(p) would diverge")
        return float(ts[hit[0]])

    @property
    def p_max(self) -> float:
        return self.low_slope

    def __call__(self, p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        body = (self.vals[None, :] * np.exp(-np.outer(p, self.s))) @ self.w
        with np.errstate(divide="ignore"):
            low = np.where(self.low_slope > p,
                           self.low_value * self.T_MIN ** (-p) / (self.low_slope - p), np.inf)
        high = self.pb.ceiling * self.t_sat ** (-p) / p
        return body + low + high


def thm22_curve(pb: PsiBar, r: float, p: float | None = None, *, tag: str = "moment-order") -> BoundCurve:
    """``min(1, inf_{0<p<r} K(p) x^-p I(p))`` or its value at a fixed ``p``."""
    if not 0 < r <= 2:
        raise ValueError("the moment-order bound needs 0 < r <= 2")
    integ = _MomentIntegral(pb)
    r_eff = min(r, integ.p_max, 2.0)
    if p is not None:
        if not 0 < p < r_eff:
            raise ValueError(f"fixed p must lie in (0, {r_eff:g})")
        logc = math.log(K_fn(p)) + math.log(float(integ(p)[0]))
        return BoundCurve(lambda x: np.minimum(1.0, np.exp(logc - p * np.log(x))), tag,
                          shape=f"K(p) I(p) x^-p at p={p:g}")
    grid = p_grid(0.0, r_eff, 96)
    log_c = np.log(K_fn(grid)) + np.log(integ(grid))

    def log_obj(pp, lx):
        return np.log(K_fn(pp)) + np.log(integ(pp)) - pp * lx

    def ev(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.size)
        lx = np.log(x)
        obj = log_c[None, :] - np.outer(lx, grid)
        idx = np.argmin(obj, axis=1)
        for k in range(x.size):
            i = idx[k]
            best = obj[k, i]
            if 0 < i < grid.size - 1:
                f = lambda q: -np.array([log_obj(v, lx[k])[0] for v in np.atleast_1d(q)])
                _, v = golden_max(f, np.array([grid[i - 1]]), np.array([grid[i + 1]]), iters=40)
                best = min(best, -float(v[0]))
            out[k] = math.exp(min(0.0, best))
        return out

    return BoundCurve(ev, tag, shape="inf_p K(p) I(p) x^-p")


def bound_thm22(pb: PsiBar, r: float, x, p: float | None = None):
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("x must be positive")
    return thm22_curve(pb, r, p)(x)


# ---------------------------------------------------------------------------
# explicit power-log envelope

def cor21_curve(beta: float, r: float) -> BoundCurve:
    if beta < 0 or not 0 < r < 2:
        raise ValueError("need beta >= 0 and 0 < r < 2")
    b1 = beta + 1.0
    floor = math.exp(2.0 * b1 / r)
    lead = math.exp(b1) * b1 ** (-b1)

    def ev(x):
        lx = np.log(x)
        return np.minimum(1.0, lead * K_fn(r - b1 / lx) * x ** (-r) * lx ** b1)

    return BoundCurve(ev, "power-envelope", x_min=floor, strict=True, constant=lead,
                      shape="K(r - (beta+1)/log x) x^-r (log x)^(beta+1)")


def bound_cor21(beta: float, r: float, x):
    """Bound for envelopes ``psibar(t) <= |t|^r |log t|^beta``."""
    return cor21_curve(beta, r)(x)


# ---------------------------------------------------------------------------
# regime curves with computed constants

def _calibrated(reference: Callable, shape: Callable, grid) -> float:
    grid = np.asarray(grid, dtype=float)
    return float(np.max(np.asarray(reference(grid)) / np.asarray(shape(grid))))


def heavy_curve(model: TailModel, pb: PsiBar | None = None, calibration=DEFAULT_CALIBRATION,
                mi_md: MonotonicityClass | None = None) -> BoundCurve:
    """Regime bound for ``r < 2``: ``C T(x)`` (MD), ``C1 x^-r`` (MI), else the
    truncation bound pointwise.  Constants are computed on ``calibration``."""
    if model.classify() is not Regime.HEAVY:
        raise ValueError("heavy bound needs r < 2")
    if pb is None:
        pb = PsiBar(PsiFunction.from_tail(model))
    label = mi_md or classify_mi_md(model, pb.base).label
    ref = thm21_curve(pb)
    x_min = float(np.min(calibration))
    if label is MonotonicityClass.MD:
        shape = lambda x: np.asarray(model(x))
        c = _calibrated(ref, shape, calibration)
        return BoundCurve(lambda x: np.minimum(1.0, c * shape(x)), "heavy-MD", x_min=x_min, strict=False,
                          constant=c, provenance="computed", shape="T(x)")
    if label is MonotonicityClass.MI:
        r = model.r
        shape = lambda x: np.asarray(x, dtype=float) ** (-r)
        c = _calibrated(ref, shape, calibration)
        return BoundCurve(lambda x: np.minimum(1.0, c * shape(x)), "heavy-MI", x_min=x_min, strict=False,
                          constant=c, provenance="computed", shape="x^-r")
    return BoundCurve(ref.evaluator, "heavy-envelope", x_min=0.0, shape=ref.shape)


def bound_heavy(model: TailModel, pb: PsiBar | None, x):
    return heavy_curve(model, pb)(x)


def intermediate_curve(model: TailModel, pb: PsiBar | None = None,
                       calibration=DEFAULT_CALIBRATION) -> BoundCurve:
    """``r = 2``: ``C x^-2 (log x)^(gamma+1) L(log x)`` for ``gamma >= -1``, else ``C x^-2``."""
    if model.classify() is not Regime.INTERMEDIATE:
        raise ValueError("intermediate bound needs r = 2")
    if pb is None:
        pb = PsiBar(PsiFunction.from_tail(model))
    g = model.gamma
    if g >= -1:
        def shape(x):
            lx = np.log(np.asarray(x, dtype=float))
            return x ** -2.0 * lx ** (g + 1) * np.asarray(model.L(lx))
        desc = "x^-2 (log x)^(gamma+1) L(log x)"
    else:
        shape = lambda x: np.asarray(x, dtype=float) ** -2.0
        desc = "x^-2"
    c = _calibrated(thm21_curve(pb), shape, calibration)
    return BoundCurve(lambda x: np.minimum(1.0, c * shape(x)), "intermediate",
                      x_min=max(float(np.min(calibration)), math.e), strict=False,
                      constant=c, provenance="computed", shape=desc)


def bound_intermediate(model: TailModel, x, pb: PsiBar | None = None):
    return intermediate_curve(model, pb)(x)


def rosenthal(p: float, mode: str = "general") -> float:
    """Rosenthal function: ``C p / (e log p)`` or ``p sqrt(2)`` (martingale)."""
    if mode == "martingale":
        if p < 1:
            raise ValueError("martingale Rosenthal factor needs p >= 1")
        return p * math.sqrt(2.0)
    const = {"general": ROSENTHAL_GENERAL, "symmetric": ROSENTHAL_SYMMETRIC}.get(mode)
    if const is None:
        raise ValueError(f"unknown mode {mode!r}")
    if p < 2:
        raise ValueError("Rosenthal function defined for p >= 2")
    return const * p / (math.e * math.log(p))


def moderate_curve(nu: NuFunction, mode: str = "general") -> BoundCurve:
    """``T_{R nu}(x)``: moment-to-tail transform of ``p -> R(p) nu(p)`` on ``[2, r)``."""
    rnu = nu.scaled(lambda p: rosenthal(p, mode), p_lo=2.0)
    return BoundCurve(lambda x: np.asarray(tail_from_nu(rnu, np.asarray(x, dtype=float))),
                      f"moderate-{mode}", x_min=0.0, provenance="explicit",
                      shape="inf_p (R(p) nu(p) / x)^p")


def bound_moderate(nu: NuFunction, x, mode: str = "general"):
    return moderate_curve(nu, mode)(x)


def interpolation_curve(model: TailModel, constant: float = 1.0, *,
                        reference: BoundCurve | None = None, calibration=None) -> BoundCurve:
    """``C x^-r (log x)^(gamma+1) (log log x) L(log x)`` on ``x > e^e``.

    With ``reference`` the constant is calibrated as the sup of
    ``reference / shape`` over ``calibration``.
    """
    r, g = model.r, model.gamma

    def shape(x):
        lx = np.log(np.asarray(x, dtype=float))
        return x ** (-r) * lx ** (g + 1) * np.log(lx) * np.asarray(model.L(lx))

    prov = "user"
    if reference is not None:
        grid = np.geomspace(20.0, 1e6, 41) if calibration is None else calibration
        constant = _calibrated(reference, shape, grid)
        prov = "computed"
    return BoundCurve(lambda x: np.minimum(1.0, constant * shape(x)), "interpolation",
                      x_min=math.e ** math.e, strict=True, constant=constant, provenance=prov,
                      shape="x^-r (log x)^(gamma+1) log log x L(log x)")


def bound_interpolation(model: TailModel, x, constant: float = 1.0):
    return interpolation_curve(model, constant)(x)


def bound_superheavy(model: TailModel, C: float, x: float) -> tuple[float, float]:
    """Sandwich ``(T(x), T(x / C))``."""
    if model.variant != "superheavy":
        raise ValueError("superheavy bound needs a superheavy model")
    if not C > 0:
        raise ValueError("C must be positive")
    if not x / C > model.x0:
        raise BoundValidityError(f"need x / C > x0 = {model.x0:g}")
    return float(model(x)), float(model(x / C))


def superheavy_curve(model: TailModel, C: float) -> BoundCurve:
    return BoundCurve(lambda x: np.asarray(model(np.asarray(x, dtype=float) / C)), "superheavy",
                      x_min=C * model.x0, strict=True, constant=C, provenance="computed",
                      shape="T(x / C)")


@dataclass(frozen=True)
class MomentTail:
    value: float
    argmin: float
    shifted_value: float | None = None


def tail_from_moments(moment_fn: Callable[[float], float], r: float, x: float,
                      C: float | None = None, p_lo: float = 1.0) -> MomentTail:
    """``min(1, inf_{p_lo<=p<r} x^-p moment_fn(p)^p)`` with ``moment_fn(p) = |eta|_p``.

    With ``C`` also returns ``e^C x^-r E|eta|^(r - C/log x)``.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    shifted = None
    if C is not None:
        if not x > 1:
            raise ValueError("shifted value needs x > 1")
        q = r - C / math.log(x)
        if not 0 < q < r:
            raise ValueError("r - C/log x must lie in (0, r)")
        shifted = math.exp(C) * x ** (-r) * float(moment_fn(q)) ** q
    if x <= 1:
        return MomentTail(1.0, p_lo, shifted)
    lx = math.log(x)
    grid = p_grid(p_lo, r, 256)
    obj = np.array([p * (math.log(float(moment_fn(p))) - lx) for p in grid])
    i = int(np.argmin(obj))
    best, arg = float(obj[i]), float(grid[i])
    if 0 < i < grid.size - 1:
        f = lambda q: -np.array([v * (math.log(float(moment_fn(v))) - lx) for v in np.atleast_1d(q)])
        xs, v = golden_max(f, np.array([grid[i - 1]]), np.array([grid[i + 1]]), iters=60)
        if -v[0] < best:
            best, arg = float(-v[0]), float(xs[0])
    return MomentTail(min(1.0, math.exp(best)), arg, shifted)


class WeightPreconditionError(ValueError):
    pass


def weighted_curve(pb: PsiBar, weights=None) -> BoundCurve:
    """Truncation bound reused for weighted sums with ``||a||_psi <= 1``; ``x > e``."""
    if weights is not None:
        norm = orlicz_weight_norm(weights, pb.base)
        if norm > 1.0 + 1e-12:
            raise WeightPreconditionError(f"weight vector has Orlicz norm {norm:.6g} > 1")
    return BoundCurve(lambda x: np.minimum(1.0, _thm21_values(pb, np.asarray(x, dtype=float))),
                      "weighted", x_min=math.e, strict=True, shape="x int_0^{2/x} psibar")


def bound_weighted(pb: PsiBar, x, weights=None):
    return weighted_curve(pb, weights)(x)
