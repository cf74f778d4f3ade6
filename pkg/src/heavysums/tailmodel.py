"""Parametric heavy and superheavy tail models.

A :class:`TailModel` describes the law of a symmetric variable through the
tail of its absolute value, ``T(x) = P(|xi| > x)``.  Three families are
supported, all written in terms of ``y = log x``:

* ``plain``       ``T(x) = K x^-r (log x)^gamma L(log x)``
* ``loglog``      ``T(x) = K x^-r (log log x)^kappa L(log log x)``
* ``superheavy``  ``T(x) = K (log x)^-kappa L(log x)``

Below the cutoff ``x0`` the tail is clamped to 1, so ``|xi|`` carries an atom
at ``x0`` of mass ``1 - T(x0)``.  If the formula is still increasing just
above ``x0`` (large positive log exponents) it is held at its peak value
until it starts to decrease, which keeps ``T`` a valid tail function without
touching its behaviour at infinity.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any

import mpmath
import numpy as np
from scipy import integrate

from ._numerics import bisect_boundary

__all__ = [
    "SlowlyVarying",
    "TailModel",
    "Regime",
    "SampleBatch",
    "tail_eval",
    "quantile",
    "sample",
    "moment_norm",
    "classify",
]

_E = math.e
_MOMENT_CROSSOVER = math.log(1e6)
_QTABLE_SMAX = 40.0  # -log(q) for q >= 2**-53, the smallest 1 - uniform draw
_QTABLE_SIZE = 16384


@dataclass(frozen=True)
class SlowlyVarying:
    """Slowly varying factor ``L``.

    ``constant``: ``L = c``.  ``log_power``: ``L(y) = (log y)^delta`` for
    ``y >= e`` and ``L(e) = 1`` below.  ``table``: positive samples on a
    log-spaced grid, interpolated linearly in log-log coordinates and held
    constant outside the grid.
    """

    kind: str = "constant"
    c: float = 1.0
    delta: float = 0.0
    grid: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "constant":
            if not (self.c > 0 and math.isfinite(self.c)):
                raise ValueError("constant L needs c > 0")
        elif self.kind == "log_power":
            if not math.isfinite(self.delta):
                raise ValueError("log_power L needs a finite delta")
        elif self.kind == "table":
            g = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if g.size < 2 or g.shape != v.shape:
                raise ValueError("table L needs matching grid/values of length >= 2")
            if np.any(g <= 0) or np.any(np.diff(g) <= 0) or np.any(v <= 0):
                raise ValueError("table L needs an increasing positive grid and positive values")
        else:
            raise ValueError(f"unknown slowly varying kind {self.kind!r}")

    @classmethod
    def constant(cls, c: float = 1.0) -> "SlowlyVarying":
        return cls("constant", c=float(c))

    @classmethod
    def log_power(cls, delta: float) -> "SlowlyVarying":
        return cls("log_power", delta=float(delta))

    @classmethod
    def table(cls, grid, values) -> "SlowlyVarying":
        return cls("table", grid=tuple(map(float, grid)), values=tuple(map(float, values)))

    @property
    def is_regular(self) -> bool:
        """True for the kinds whose tail integrals have a closed/asymptotic form."""
        return self.kind in ("constant", "log_power")

    def log(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "constant":
            return np.full_like(y, math.log(self.c))
        if self.kind == "log_power":
            if self.delta == 0:
                return np.zeros_like(y)
            return self.delta * np.log(np.log(np.maximum(y, _E)))
        lg = np.log(self.grid)
        lv = np.log(self.values)
        return np.interp(np.log(np.maximum(y, 1e-300)), lg, lv)

    def log_scalar(self, y: float) -> float:
        """Scalar :meth:`log` without array overhead (quadrature callbacks)."""
        if self.kind == "constant":
            return math.log(self.c)
        if self.kind == "log_power":
            return self.delta * math.log(math.log(max(y, _E))) if self.delta else 0.0
        return float(self.log(y))

    def __call__(self, y):
        return np.exp(self.log(y))

    def dlog(self, y):
        """Derivative of ``log L`` with respect to its argument."""
        y = np.asarray(y, dtype=float)
        if self.kind == "constant" or (self.kind == "log_power" and self.delta == 0):
            return np.zeros_like(y)
        if self.kind == "log_power":
            ys = np.maximum(y, _E)
            return np.where(y > _E, self.delta / (ys * np.log(ys)), 0.0)
        lg = np.log(self.grid)
        lv = np.log(self.values)
        slopes = np.diff(lv) / np.diff(lg)
        ly = np.log(np.maximum(y, 1e-300))
        idx = np.clip(np.searchsorted(lg, ly) - 1, 0, slopes.size - 1)
        inside = (ly > lg[0]) & (ly < lg[-1])
        return np.where(inside, slopes[idx] / np.maximum(y, 1e-300), 0.0)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "constant":
            return {"kind": "constant", "c": self.c}
        if self.kind == "log_power":
            return {"kind": "log_power", "delta": self.delta}
        return {"kind": "table", "grid": list(self.grid), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict[str, Any] | None) -> "SlowlyVarying":
        if d is None:
            return cls()
        kind = d.get("kind", "constant")
        if kind == "constant":
            return cls.constant(d.get("c", 1.0))
        if kind == "log_power":
            return cls.log_power(d["delta"])
        if kind == "table":
            return cls.table(d["grid"], d["values"])
        raise ValueError(f"unknown slowly varying kind {kind!r}")


class Regime(str, enum.Enum):
    HEAVY = "Heavy"
    INTERMEDIATE = "Intermediate"
    MODERATE = "Moderate"
    SUPERHEAVY = "Superheavy"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for member in cls:
                if member.value.lower() == value.strip().lower():
                    return member
        return None


_VARIANTS = ("plain", "loglog", "superheavy")


@dataclass(frozen=True)
class TailModel:
    """Tail of ``|xi|`` for a symmetric variable ``xi``.

    ``r`` is ignored by the superheavy variant; ``gamma`` only enters the
    plain variant.  ``x0`` defaults to ``e`` (``e**3`` for ``loglog``).
    """

    r: float
    gamma: float = 0.0
    L: SlowlyVarying = field(default_factory=SlowlyVarying)
    scale: float = 1.0
    variant: str = "plain"
    kappa: float = 0.0
    x0: float | None = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}")
        if self.variant != "superheavy" and not self.r > 0:
            raise ValueError("tail rate r must be positive")
        if not self.scale > 0:
            raise ValueError("scale K must be positive")
        if self.variant == "superheavy" and not self.kappa > 0:
            raise ValueError("superheavy variant needs kappa > 0")
        if self.variant == "loglog" and self.gamma != 0:
            raise ValueError("the loglog variant replaces the log exponent; use gamma = 0")
        x0 = self.x0
        if x0 is None:
            x0 = _E ** 3 if self.variant == "loglog" else _E
        x0 = float(x0)
        if not x0 >= 1:
            raise ValueError("cutoff x0 must be >= 1")
        if self.variant == "loglog" and not x0 > _E:
            raise ValueError("loglog variant needs x0 > e")
        if self.variant == "superheavy" and not x0 > 1:
            raise ValueError("superheavy variant needs x0 > 1")
        if self.variant == "plain" and self.gamma != 0 and not x0 > 1:
            raise ValueError("a log exponent needs x0 > 1")
        object.__setattr__(self, "x0", x0)
        y0 = math.log(x0)
        y_peak = self._find_peak(y0)
        g_peak = float(self.log_formula(y_peak))
        if g_peak > 0:
            hi = y_peak + 1.0
            while self.log_formula(hi) > 0:
                hi = y_peak + 2.0 * (hi - y_peak)
            y_d = bisect_boundary(lambda y: self.log_formula(y) <= 0, y_peak, hi, rtol=1e-15, atol=1e-14)
            log_t0 = 0.0
        else:
            y_d = y_peak
            log_t0 = g_peak
        # derived constants, fixed at construction
        object.__setattr__(self, "_y0", y0)
        object.__setattr__(self, "_y_d", float(y_d))
        object.__setattr__(self, "_log_t0", float(log_t0))
        object.__setattr__(self, "_qtable", None)

    # ------------------------------------------------------------------
    # formula in log coordinates
    def log_formula(self, y):
        """log of the unclamped tail formula at ``y = log x``."""
        y = np.asarray(y, dtype=float)
        if self.variant == "superheavy":
            return self._log_slow_part(y)
        return self._log_slow_part(y) - self.r * y

    def _log_slow_part(self, y):
        # everything except the -r*y power term; kept apart so moment
        # integrands can combine (p - r)*y without cancellation
        lk = math.log(self.scale)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.variant == "plain":
                out = lk + self.L.log(y)
                if self.gamma != 0:
                    out = out + self.gamma * np.log(y)
            elif self.variant == "loglog":
                ll = np.log(y)
                out = lk + self.kappa * np.log(ll) + self.L.log(ll)
            else:
                out = lk - self.kappa * np.log(y) + self.L.log(y)
        return out

    def log_formula_scalar(self, y: float) -> float:
        lk = math.log(self.scale)
        if self.variant == "plain":
            out = lk - self.r * y + self.L.log_scalar(y)
            return out + self.gamma * math.log(y) if self.gamma != 0 else out
        if self.variant == "loglog":
            ll = math.log(y)
            return lk - self.r * y + self.kappa * math.log(ll) + self.L.log_scalar(ll)
        return lk - self.kappa * math.log(y) + self.L.log_scalar(y)

    def dlog_formula(self, y):
        """Derivative of :meth:`log_formula` in ``y``."""
        y = np.asarray(y, dtype=float)
        if self.variant == "plain":
            return -self.r + self.gamma / y + self.L.dlog(y)
        if self.variant == "loglog":
            ll = np.log(y)
            return -self.r + self.kappa / (y * ll) + self.L.dlog(ll) / y
        return -self.kappa / y + self.L.dlog(y)

    def _find_peak(self, y0: float) -> float:
        ys = y0 + np.concatenate([[0.0], np.geomspace(1e-8, 1e4 * max(1.0, y0), 4000)])
        g = self.log_formula(ys)
        i = int(np.nanargmax(g))
        if i == 0:
            return y0
        lo, hi = ys[i - 1], ys[min(i + 1, ys.size - 1)]
        for _ in range(100):
            m1 = lo + (hi - lo) / 3
            m2 = hi - (hi - lo) / 3
            if self.log_formula(m1) < self.log_formula(m2):
                lo = m1
            else:
                hi = m2
        return 0.5 * (lo + hi)

    @property
    def y0(self) -> float:
        return self._y0

    @property
    def density_start(self) -> float:
        """Point above which ``T`` is strictly decreasing (``>= x0``)."""
        return math.exp(self._y_d)

    @property
    def tail_at_cutoff(self) -> float:
        """``T(x0) = P(|xi| > x0)``; the atom at ``x0`` has mass ``1 - T(x0)``."""
        return math.exp(self._log_t0)

    # ------------------------------------------------------------------
    def log_tail(self, y):
        """``log T(e^y)``, vectorized."""
        y = np.asarray(y, dtype=float)
        g = self.log_formula(np.maximum(y, self._y_d))
        out = np.where(y < self._y0, 0.0, np.where(y <= self._y_d, self._log_t0, g))
        return np.minimum(out, 0.0)

    def log_tail_scalar(self, y: float) -> float:
        if y < self._y0:
            return 0.0
        if y <= self._y_d:
            return self._log_t0
        return min(0.0, self.log_formula_scalar(y))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            y = np.log(np.where(x > 0, x, 1.0))
        out = np.exp(self.log_tail(y))
        out = np.where(x > 0, out, 1.0)
        return out if out.ndim else float(out)

    def density(self, x):
        """Density of ``|xi|`` above :attr:`density_start` (the atom excluded)."""
        x = np.asarray(x, dtype=float)
        y = np.log(x)
        dens = -np.exp(self.log_tail(y)) * self.dlog_formula(y) / x
        return np.where(y > self._y_d, dens, 0.0)

    # ------------------------------------------------------------------
    def log_quantile(self, q: float) -> float:
        """``log`` of the smallest ``x`` with ``T(x) <= q``."""
        if not 0 < q < 1:
            raise ValueError("q must lie in (0, 1)")
        lq = math.log(q)
        if lq >= self._log_t0:
            return self._y0
        hi = self._y_d + 1.0
        while self.log_formula(hi) > lq:
            hi = self._y_d + 2.0 * (hi - self._y_d)
        return bisect_boundary(lambda y: self.log_formula(y) <= lq, self._y_d, hi,
                               rtol=1e-15, atol=1e-11)

    def quantile(self, q: float) -> float:
        return math.exp(self.log_quantile(q))

    def _quantile_table(self):
        if self._qtable is None:
            s_lo = -self._log_t0
            s = np.linspace(s_lo, max(_QTABLE_SMAX, s_lo + 1.0), _QTABLE_SIZE)
            # vectorized bracketing bisection of log_formula(y) = -s on [y_d, hi]
            lo = np.full_like(s, self._y_d)
            hi = lo + 1.0
            for _ in range(2000):
                up = self.log_formula(hi) > -s
                if not up.any():
                    break
                hi = np.where(up, self._y_d + 2.0 * (hi - self._y_d), hi)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                ok = self.log_formula(mid) <= -s
                hi = np.where(ok, mid, hi)
                lo = np.where(ok, lo, mid)
            ys = np.where(s > s_lo, hi, self._y_d)
            use_log = self.variant == "superheavy"
            tab = np.log(ys) if use_log else ys
            object.__setattr__(self, "_qtable", (s, tab, use_log))
            object.__setattr__(self, "_qslopes", np.diff(tab))
        return self._qtable

    def log_quantile_vec(self, s):
        """Vectorized ``log`` quantile at ``q = exp(-s)``.

        Table interpolation followed by one Newton step on the log-tail
        equation; the table is fine enough for this to reach ~1e-12.
        """
        s = np.asarray(s, dtype=float)
        grid, tab, use_log = self._quantile_table()
        slopes = self._qslopes
        s_lo = grid[0]
        # uniform grid: direct index instead of a binary search
        pos = (np.clip(s, s_lo, grid[-1]) - s_lo) * ((grid.size - 1) / (grid[-1] - s_lo))
        i = np.minimum(pos.astype(np.intp), grid.size - 2)
        init = np.take(tab, i) + (pos - i) * np.take(slopes, i)
        y = np.exp(init) if use_log else init
        far = s > grid[-1]
        if far.any():
            y = y.copy()
            y[far] = [self.log_quantile(math.exp(-v)) for v in s[far]]
        body = (s > s_lo) & ~far
        with np.errstate(all="ignore"):
            step = (self.log_formula(y) + s) / self.dlog_formula(y)
            ok = body & np.isfinite(step)
            y = np.where(ok, np.maximum(y - step, self._y_d), y)
        return np.where(s <= s_lo, self._y0, y)

    def draw_log(self, rng: np.random.Generator, size) -> tuple[np.ndarray, np.ndarray]:
        """Signs and ``log|xi|`` of symmetric draws by inverse-tail transform."""
        u = rng.random(size)
        s = -np.log1p(-u)
        y = self.log_quantile_vec(s)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return sign, y

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        sign, y = self.draw_log(rng, size)
        with np.errstate(over="ignore"):
            return sign * np.exp(y)

    # ------------------------------------------------------------------
    def abs_moment(self, p: float) -> float:
        """``E|xi|^p``; ``math.inf`` when the integral diverges."""
        if not p > 0:
            raise ValueError("moment order must be positive")
        if not self._moment_finite(p):
            return math.inf
        x0 = self.x0
        y_d = self._y_d
        total = x0 ** p + self.tail_at_cutoff * (math.exp(p * y_d) - x0 ** p)

        def h(y):
            return (p - self.r) * y + float(self._log_slow_part(y))

        y_c = max(y_d, _MOMENT_CROSSOVER)
        if y_c > y_d:
            ref = max(h(y_d), h(y_c))
            body, _ = integrate.quad(lambda y: math.exp(h(y) - ref), y_d, y_c,
                                     epsabs=0, epsrel=1e-12, limit=200)
            total += p * body * math.exp(ref)
        total += p * self._moment_tail(p, y_c)
        return total

    def _moment_finite(self, p: float) -> bool:
        if self.variant == "superheavy":
            return False
        if p < self.r:
            return True
        if p > self.r or self.variant == "loglog":
            return False
        if self.L.kind == "log_power":
            return self.gamma < -1 or (self.gamma == -1 and self.L.delta < -1)
        return self.gamma < -1

    def _moment_tail(self, p: float, y_c: float) -> float:
        """``int_{y_c}^inf exp(p y) T(e^y) dy`` for a convergent case."""
        a = self.r - p
        if self.variant == "plain" and self.L.kind == "constant":
            coef = self.scale * self.L.c
            if a == 0:
                return coef * y_c ** (self.gamma + 1) / (-self.gamma - 1)
            val = mpmath.gammainc(self.gamma + 1, a * y_c) * mpmath.power(a, -self.gamma - 1)
            return coef * float(val)

        def h(y):
            return (p - self.r) * y + float(self._log_slow_part(y))

        ref = h(y_c)
        def f(v):
            if v > 700.0:
                return 0.0
            return math.exp(h(y_c * math.exp(v)) - ref + v)

        val, _ = integrate.quad(f, 0.0, np.inf, epsabs=0, epsrel=1e-11, limit=400)
        return y_c * val * math.exp(ref)

    def moment_norm(self, p: float) -> float:
        m = self.abs_moment(p)
        return math.inf if math.isinf(m) else m ** (1.0 / p)

    def classify(self) -> Regime:
        if self.variant == "superheavy":
            return Regime.SUPERHEAVY
        if self.r < 2:
            return Regime.HEAVY
        if self.r == 2:
            return Regime.INTERMEDIATE
        return Regime.MODERATE

    # ------------------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        if self.variant == "plain":
            variant: Any = "plain"
        else:
            variant = {self.variant: self.kappa}
        return {
            "r": self.r,
            "gamma": self.gamma,
            "scale": self.scale,
            "x0": self.x0,
            "L": self.L.to_dict(),
            "variant": variant,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TailModel":
        variant = d.get("variant", "plain")
        kappa = 0.0
        if isinstance(variant, dict):
            if "kind" in variant:
                name, kappa = variant["kind"], variant.get("kappa", 0.0)
            elif len(variant) == 1:
                (name, kappa), = variant.items()
            else:
                raise ValueError(f"cannot parse variant {variant!r}")
        elif isinstance(variant, str) and ":" in variant:
            name, k = variant.split(":", 1)
            kappa = float(k)
        else:
            name = variant
        return cls(
            r=float(d.get("r", 0.0 if name == "superheavy" else math.nan)),
            gamma=float(d.get("gamma", 0.0)),
            L=SlowlyVarying.from_dict(d.get("L")),
            scale=float(d.get("scale", 1.0)),
            variant=name,
            kappa=float(kappa),
            x0=d.get("x0"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TailModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SampleBatch:
    """Seeded symmetric draws.  ``log_abs`` is kept for superheavy models,
    whose magnitudes overflow double precision."""

    values: np.ndarray
    seed: int
    model: str
    log_abs: np.ndarray | None = None


def tail_eval(model: TailModel, x: float) -> float:
    if not x > 0:
        raise ValueError("x must be positive")
    return float(model(x))


def quantile(model: TailModel, q: float) -> float:
    """Smallest ``x`` with ``T(x) <= q``; returns ``x0`` on the flat region."""
    return model.quantile(q)


def sample(model: TailModel, n: int, seed: int) -> SampleBatch:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    sign, y = model.draw_log(rng, n)
    with np.errstate(over="ignore"):
        values = sign * np.exp(y)
    log_abs = y if model.variant == "superheavy" else None
    return SampleBatch(values=values, seed=seed, model=model.to_json(), log_abs=log_abs)


def moment_norm(model: TailModel, p: float) -> float:
    return model.moment_norm(p)


def classify(model: TailModel) -> Regime:
    return model.classify()
