"""Characteristic-function additions ``psi(t) = 1 - Re phi(t)`` and envelopes.

For a law given by its tail ``T`` the addition is evaluated through the
sine transform

    psi(t) = t * int_0^inf sin(t x) T(x) dx = int_0^inf sin(u) T(u / t) du,

split into the clamped part (closed form), a non-oscillatory stretch
integrated in ``log u`` and an oscillatory remainder handed to QUADPACK's
Fourier integrator (cycle-by-cycle summation with epsilon-algorithm
acceleration).  The constant in front is checked once per model against
``E(1 - cos(t xi))`` integrated against the tail measure directly.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import gamma as gamma_fn

from ._numerics import golden_max
from .tailmodel import Regime, TailModel

__all__ = [
    "PsiFunction",
    "PsiBar",
    "PsiQuadratureError",
    "psi_eval",
    "psi_bar_eval",
    "psi_direct",
    "psi_asymptotic",
    "c3",
    "classify_mi_md",
    "MonotonicityClass",
    "MiMdResult",
    "rt_probe",
]

_TWO_PI = 2.0 * math.pi
_CALIBRATION_T = (0.01, 0.1, 1.0)


class PsiQuadratureError(RuntimeError):
    """A sine/cosine transform failed to converge; ``diagnostics`` says where."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


def _checked_quad(f, a, b, what, t, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, full_output=1, **kw)
    val, err = out[0], out[1]
    tol = kw.get("epsabs", 0.0) * 100 + 1e-8 * abs(val)
    if len(out) > 3 and not err <= max(tol, 1e-15):
        raise PsiQuadratureError("quadrature did not converge",
                                 {"piece": what, "t": t, "value": val, "abserr": err,
                                  "message": out[3] if len(out) > 3 else ""})
    return val


def _sine_route(model: TailModel, t: float) -> float:
    """``int_0^inf sin(u) T(u/t) du`` for ``t > 0``."""
    x0 = model.x0
    xd = model.density_start
    t0 = model.tail_at_cutoff
    out = 2.0 * math.sin(0.5 * t * x0) ** 2 + t0 * (math.cos(t * x0) - math.cos(t * xd))
    a = t * xd
    log_t = math.log(t)
    lt = model.log_tail_scalar
    if a < _TWO_PI:
        def body(s):
            u = math.exp(s)
            return math.sin(u) * math.exp(s + lt(s - log_t))

        out += _checked_quad(body, math.log(a), math.log(_TWO_PI), "body", t,
                             epsabs=0.0, epsrel=1e-12, limit=200)
        lo = _TWO_PI
    else:
        lo = a
    log_scale = lt(math.log(lo) - log_t)

    def tail(u):
        return math.exp(lt(math.log(u) - log_t) - log_scale)

    osc = _checked_quad(tail, lo, np.inf, "oscillatory tail", t,
                        weight="sin", wvar=1.0, epsabs=1e-10, limlst=100)
    return out + osc * math.exp(log_scale)


def psi_direct(model: TailModel, t: float) -> float:
    """``E(1 - cos(t xi))`` integrated against the law of ``|xi|`` directly.

    Independent of the sine transform: atom at ``x0`` plus the density
    above :attr:`TailModel.density_start`.  Used to calibrate and test.
    """
    t = abs(float(t))
    if t == 0:
        return 0.0
    x0 = model.x0
    xd = model.density_start
    out = (1.0 - model.tail_at_cutoff) * 2.0 * math.sin(0.5 * t * x0) ** 2
    big_x = max(xd, 20.0 * math.pi / t)

    def body(y):
        x = math.exp(y)
        return 2.0 * math.sin(0.5 * t * x) ** 2 * float(model.density(x)) * x

    out += _checked_quad(body, math.log(xd), math.log(big_x), "direct body", t,
                         epsabs=0.0, epsrel=1e-12, limit=1000)
    tail_x = float(model(big_x))

    def dens(x):
        return float(model.density(x)) * big_x / tail_x

    cos_part = _checked_quad(dens, big_x, np.inf, "direct cosine tail", t,
                             weight="cos", wvar=t, epsabs=1e-10, limlst=100)
    return out + tail_x - cos_part * tail_x / big_x


def c3(r: float) -> float:
    """Small-``t`` constant ``Gamma(1 - r) cos(pi r / 2)`` for pure power tails."""
    if r == 1:
        raise ValueError("C3 undefined at r=1; use psi_eval")
    if not 0 < r < 2:
        raise ValueError("C3 needs 0 < r < 2")
    return float(gamma_fn(1.0 - r) * math.cos(0.5 * math.pi * r))


def _stable_psi(t, r):
    with np.errstate(over="ignore"):
        return -np.expm1(-np.abs(t) ** r)


def _power_psi(t, r):
    with np.errstate(over="ignore"):
        return np.minimum(np.abs(t) ** r, 2.0)


class PsiFunction:
    """Addition ``psi(t)`` of a symmetric law; callable on scalars and arrays.

    Build with :meth:`stable`, :meth:`power`, :meth:`from_tail`,
    :meth:`table` or :meth:`discrete`.  ``from_tail`` fills its cache (a
    cubic spline of ``log psi`` against ``log t`` near zero and of ``psi``
    against ``t`` where the atom at ``x0`` starts to oscillate) at
    construction; arguments outside the cached range fall back to power-law
    extrapolation below and to the exact transform above.
    """

    def __init__(self, kind: str, *, r: float | None = None, model: TailModel | None = None,
                 evaluator: Callable | None = None, index: float | None = None,
                 descriptor: dict | None = None):
        self.kind = kind
        self.r = r
        self.model = model
        self._eval = evaluator
        self.index = index
        self.descriptor = descriptor or {"kind": kind}
        self.factor = 1.0
        self.convention = None

    # ---- constructors -------------------------------------------------
    @classmethod
    def stable(cls, r: float) -> "PsiFunction":
        if not 0 < r <= 2:
            raise ValueError("stable index must lie in (0, 2]")
        return cls("stable", r=r, index=r, descriptor={"kind": "stable", "r": r},
                   evaluator=lambda t: _stable_psi(t, r))

    @classmethod
    def power(cls, r: float) -> "PsiFunction":
        if not r > 0:
            raise ValueError("power index must be positive")
        return cls("power", r=r, index=r, descriptor={"kind": "power", "r": r},
                   evaluator=lambda t: _power_psi(t, r))

    @classmethod
    def discrete(cls, atoms, probs) -> "PsiFunction":
        """Symmetric law with ``P(|xi| = atoms[k]) = probs[k]``."""
        atoms = np.asarray(atoms, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if atoms.shape != probs.shape or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
            raise ValueError("probs must be a probability vector matching atoms")

        def ev(t):
            t = np.asarray(t, dtype=float)
            s = np.sin(0.5 * t[..., None] * atoms) ** 2
            return 2.0 * (s * probs).sum(axis=-1)

        return cls("discrete", index=2.0, evaluator=ev,
                   descriptor={"kind": "discrete", "atoms": atoms.tolist(), "probs": probs.tolist()})

    @classmethod
    def table(cls, t_grid, values) -> "PsiFunction":
        """Tabulated ``psi`` on positive ``t``; linear in ``t``, held past the ends."""
        tg = np.asarray(t_grid, dtype=float)
        vg = np.asarray(values, dtype=float)
        if tg.ndim != 1 or tg.shape != vg.shape or np.any(np.diff(tg) <= 0) or tg[0] <= 0:
            raise ValueError("table needs an increasing positive t grid with matching values")
        if np.any(vg < 0) or np.any(vg > 2):
            raise ValueError("tabulated psi must lie in [0, 2]")
        tg = np.concatenate([[0.0], tg])
        vg = np.concatenate([[0.0], vg])
        return cls("table", index=None, evaluator=lambda t: np.interp(np.abs(t), tg, vg),
                   descriptor={"kind": "table", "t": tg[1:].tolist(), "values": vg[1:].tolist()})

    @classmethod
    def from_tail(cls, model: TailModel, *, t_lo: float = 1e-14, t_hi: float | None = None,
                  per_decade: int = 48) -> "PsiFunction":
        if model.variant == "superheavy":
            index = 0.0
        else:
            index = min(model.r, 2.0)
        self = cls("from_tail", r=model.r, model=model, index=index,
                   descriptor={"kind": "from_tail", "model": model.to_dict()})
        self._calibrate()
        if t_hi is None:
            t_hi = max(4.0, 2.0 * 2.0 ** (1.0 / index)) if index > 0.25 else 4.0
        self._build_cache(t_lo, t_hi, per_decade)
        return self

    # ---- from_tail machinery -----------------------------------------
    def _calibrate(self):
        ratios = []
        for t in _CALIBRATION_T:
            sine = _sine_route(self.model, t)
            direct = psi_direct(self.model, t)
            ratios.append(direct / sine)
        ratios = np.array(ratios)
        for factor, name in ((1.0, "t*int sin(tx)T(x)dx"), (2.0, "2t*int sin(tx)T(x)dx")):
            if np.all(np.abs(ratios / factor - 1.0) < 1e-6):
                self.factor = factor
                self.convention = name
                self.calibration_ratios = ratios
                return
        raise PsiQuadratureError("sine transform matches neither convention",
                                 {"t": _CALIBRATION_T, "ratios": ratios.tolist()})

    def exact(self, t: float) -> float:
        """Uncached evaluation at a scalar ``t``."""
        t = abs(float(t))
        if t == 0:
            return 0.0
        if self.kind == "from_tail":
            return min(2.0, max(0.0, self.factor * _sine_route(self.model, t)))
        return float(self._eval(np.asarray(t)))

    def _build_cache(self, t_lo, t_hi, per_decade):
        # the two splines overlap by a factor 2 on each side of the switch
        # point so neither is evaluated near its own end conditions
        t_sw = min(0.5 / self.model.density_start, t_hi / 4)
        n_log = max(8, int(math.ceil(per_decade * math.log10(2 * t_sw / t_lo))) + 1)
        tl = np.geomspace(t_lo, 2 * t_sw, n_log)
        vl = np.array([self.exact(t) for t in tl])
        step = min(0.02, 0.05 / self.model.density_start)
        n_lin = max(8, int(math.ceil((t_hi - 0.5 * t_sw) / step)) + 1)
        tn = np.linspace(0.5 * t_sw, t_hi, n_lin)
        vn = np.array([self.exact(t) for t in tn])
        if np.any(vl <= 0):
            raise PsiQuadratureError("non-positive psi on the cache grid",
                                     {"t": tl[vl <= 0].tolist()})
        self._log_spline = CubicSpline(np.log(tl), np.log(vl))
        self._lin_spline = CubicSpline(tn, vn)
        self._t_lo, self._t_sw, self._t_hi = t_lo, t_sw, t_hi
        self._lo_slope = float(self._log_spline(math.log(t_lo), 1))
        self._lo_log = float(np.log(vl[0]))

    def _cached(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        with np.errstate(divide="ignore"):
            lt = np.log(t)
        low = t < self._t_lo
        mid = (~low) & (t <= self._t_sw)
        lin = (t > self._t_sw) & (t <= self._t_hi)
        high = t > self._t_hi
        out[low] = np.exp(self._lo_log + self._lo_slope * (lt[low] - math.log(self._t_lo)))
        out[mid] = np.exp(self._log_spline(lt[mid]))
        out[lin] = self._lin_spline(t[lin])
        if high.any():
            out[high] = [self.exact(v) for v in t[high]]
        out[t == 0] = 0.0
        return np.clip(out, 0.0, 2.0)

    # ---- evaluation ---------------------------------------------------
    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        out = self._cached(arr) if self.kind == "from_tail" else np.asarray(self._eval(arr), dtype=float)
        return out if out.ndim else float(out)

    def distance(self, t, s):
        """Derived distance ``sqrt(psi(t - s))``."""
        return np.sqrt(self(np.asarray(t, dtype=float) - np.asarray(s, dtype=float)))

    def __repr__(self):
        return f"PsiFunction({self.descriptor})"


def psi_eval(psi: PsiFunction, t):
    return psi(t)


@dataclass
class PsiBar:
    """Envelope ``sup_{0<lambda<1} psi(lambda t) / psi(lambda)``, clamped.

    The supremum is taken over a geometric grid in ``lambda`` plus both
    endpoint limits (``lambda = 1`` and, when the base has a power index,
    the ``lambda -> 0`` limit ``t**index``), then refined by golden-section
    search around the grid maximizer.  ``ceiling=None`` disables the clamp.
    """

    base: PsiFunction
    n_lambda: int = 512
    ceiling: float | None = 2.0
    _lam: np.ndarray = field(init=False, repr=False)
    _den: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._lam = np.geomspace(1e-8, 1.0 - 1e-8, self.n_lambda)
        self._den = np.asarray(self.base(self._lam), dtype=float)
        self._psi_one = float(self.base(1.0))
        if np.any(self._den <= 0) or self._psi_one <= 0:
            raise ValueError("psi must be positive on (0, 1] for the envelope")

    @property
    def index(self):
        return self.base.index

    def raw(self, t):
        """Unclamped supremum."""
        t = np.atleast_1d(np.abs(np.asarray(t, dtype=float)))
        flat = t.ravel()
        ratios = np.asarray(self.base(flat[:, None] * self._lam[None, :])) / self._den[None, :]
        i = np.argmax(ratios, axis=1)
        best = ratios[np.arange(flat.size), i]
        lo = self._lam[np.maximum(i - 1, 0)]
        hi = self._lam[np.minimum(i + 1, self._lam.size - 1)]
        tt = flat

        def f(lam):
            return np.asarray(self.base(tt * lam)) / np.asarray(self.base(lam))

        _, refined = golden_max(f, lo, hi, iters=50)
        best = np.maximum(best, refined)
        best = np.maximum(best, np.asarray(self.base(flat)) / self._psi_one)
        if self.index is not None:
            with np.errstate(over="ignore"):
                best = np.maximum(best, flat ** self.index)
        best = np.where(flat == 0, 0.0, best)
        return best.reshape(t.shape)

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        out = self.raw(t)
        if self.ceiling is not None:
            out = np.minimum(out, self.ceiling)
        return float(out[0]) if scalar else out


def psi_bar_eval(pb: PsiBar, t):
    return pb(t)


# ---------------------------------------------------------------------------
# small-t asymptotics

def _truncated_second_moment(model: TailModel, x: float) -> float:
    """``H(x) = int_0^x u^2 dF(u)`` for ``|xi|`` (atom included)."""
    if x < model.x0:
        return 0.0
    t0 = model.tail_at_cutoff
    xd = model.density_start
    h = model.x0 ** 2 * (1.0 - t0)
    if x > xd:
        lt = model.log_tail_scalar
        ref = 2.0 * math.log(x) + lt(math.log(x))

        def f(y):
            return math.exp(2.0 * y + lt(y) - ref) * -float(model.dlog_formula(y))

        val, _ = integrate.quad(f, math.log(xd), math.log(x), epsabs=0, epsrel=1e-11, limit=400)
        h += val * math.exp(ref)
    return h


def psi_asymptotic(model: TailModel, t: float) -> float:
    """Leading small-``t`` behaviour of ``psi`` implied by the tail."""
    t = abs(float(t))
    if not 0 < t < 1 / math.e:
        raise ValueError("asymptotic form needs 0 < t < 1/e")
    lt = -math.log(t)
    regime = model.classify()
    if regime is Regime.SUPERHEAVY:
        return model.scale * lt ** -model.kappa * float(model.L(lt))
    if regime is Regime.HEAVY:
        if model.r == 1:
            raise ValueError("C3 undefined at r=1; use psi_eval")
        base = c3(model.r) * model.scale * t ** model.r
        if model.variant == "loglog":
            ll = math.log(lt)
            return base * ll ** model.kappa * float(model.L(ll))
        return base * lt ** model.gamma * float(model.L(lt))
    if regime is Regime.INTERMEDIATE:
        return 0.5 * t * t * _truncated_second_moment(model, 1.0 / t)
    return 0.5 * t * t * model.abs_moment(2.0)


# ---------------------------------------------------------------------------
# MI / MD classification

class MonotonicityClass(str, enum.Enum):
    MD = "MD"
    MI = "MI"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class MiMdResult:
    label: MonotonicityClass
    rule: str
    probe: dict | None = None


def _monotonicity_probe(psi: PsiFunction, t_values=(0.1, 0.3, 0.7), n: int = 200) -> dict:
    """Direction of ``lambda -> psi(lambda t)/psi(lambda)`` near zero.

    Reports, per ``t``, the largest grid ``Delta`` such that the ratio is
    monotone on ``(0, Delta)`` and the direction there.  "increasing"
    pushes the envelope supremum to ``lambda -> 1`` (``psibar ~ psi``),
    "decreasing" pushes it to ``lambda -> 0`` (``psibar ~ t^r``).
    """
    lam = np.geomspace(1e-7, 1.0, n)
    report = {}
    for t in t_values:
        ratio = np.asarray(psi(t * lam)) / np.asarray(psi(lam))
        d = np.diff(ratio)
        tol = 1e-12 * np.abs(ratio[:-1])
        sign0 = np.sign(d[0]) if abs(d[0]) > tol[0] else 0.0
        k = 0
        while k < d.size and (abs(d[k]) <= tol[k] or np.sign(d[k]) == sign0):
            k += 1
        direction = {1.0: "increasing", -1.0: "decreasing"}.get(float(sign0), "flat")
        report[t] = {"direction": direction, "delta": float(lam[k])}
    return report


def classify_mi_md(model: TailModel, psi: PsiFunction | None = None) -> MiMdResult:
    if model.classify() is not Regime.HEAVY:
        raise ValueError("MI/MD classification is defined for heavy models (r < 2)")
    if model.gamma > 0:
        return MiMdResult(MonotonicityClass.MD, "gamma > 0")
    if model.gamma < 0:
        return MiMdResult(MonotonicityClass.MI, "gamma < 0")
    if model.variant == "loglog" and model.kappa > 0:
        return MiMdResult(MonotonicityClass.MD, "gamma = 0, loglog kappa > 0")
    if model.variant == "loglog" and model.kappa < 0:
        return MiMdResult(MonotonicityClass.MI, "gamma = 0, loglog kappa < 0")
    if psi is None:
        psi = PsiFunction.from_tail(model)
    return MiMdResult(MonotonicityClass.INDETERMINATE, "no sign rule applies",
                      _monotonicity_probe(psi))


# ---------------------------------------------------------------------------
# regular-tail probe

@dataclass(frozen=True)
class RtProbe:
    a: np.ndarray
    ratios: np.ndarray
    c1: float


def rt_probe(model: TailModel, psi: PsiFunction, a_grid=None) -> RtProbe:
    """Fit ``C1 = min_a T(2/a) / (a^-1 int_{-a}^{a} psi)`` over ``a_grid``.

    A clearly positive ``C1`` says the truncation inequality reverses up to
    a constant on the grid; for laws with a moment beyond 2 the fitted value
    collapses toward 0.
    """
    a_grid = np.geomspace(1e-6, 1e-2, 9) if a_grid is None else np.asarray(a_grid, dtype=float)
    ratios = []
    for a in a_grid:
        val, _ = integrate.quad(lambda s: float(psi(math.exp(s))) * math.exp(s),
                                math.log(a) - 40.0, math.log(a), epsabs=0, epsrel=1e-10, limit=200)
        avg = 2.0 * val / a
        ratios.append(float(model(2.0 / a)) / avg)
    ratios = np.array(ratios)
    return RtProbe(a=a_grid, ratios=ratios, c1=float(ratios.min()))
