"""Norming sequences ``b(n)`` for normed sums ``b(n)^-1 (xi_1 + ... + xi_n)``.

The exact sequence solves ``psi(1 / b(n)) = 1 / n``.  Closed-form
alternatives: the regular-variation asymptote, ``sqrt(n)`` for finite
variance, and the exponential norming ``B_n`` used under superheavy tails
(kept as ``log B_n`` because it leaves double range quickly).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._numerics import bisect_boundary
from .charfn import PsiFunction
from .tailmodel import Regime, SlowlyVarying, TailModel

__all__ = [
    "Provenance",
    "NormingSequence",
    "NormingError",
    "solve_b",
    "solve_b_detailed",
    "b_asymptotic",
    "b_moderate",
    "b_superheavy",
    "log_b_superheavy",
    "exact_sequence",
]


class Provenance(str, enum.Enum):
    EXACT_ROOT = "exact_root"
    ASYMPTOTIC = "asymptotic"
    SQRT_N = "sqrt_n"
    SUPERHEAVY = "superheavy"


class NormingError(ValueError):
    pass


@dataclass(frozen=True)
class NormingSequence:
    """Norming values at ``ns`` with their provenance.

    ``log_values`` is authoritative; ``values`` overflows to ``inf`` for
    superheavy sequences at large ``n``.  ``below_threshold`` marks ``n``
    where the root equation had no solution with ``b >= 1``.
    """

    ns: np.ndarray
    log_values: np.ndarray
    provenance: Provenance
    descriptor: dict = field(default_factory=dict)
    below_threshold: np.ndarray | None = None
    weights: np.ndarray | None = None

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_values)

    def __call__(self, n: int) -> float:
        idx = np.flatnonzero(self.ns == n)
        if idx.size == 0:
            raise KeyError(n)
        return float(self.values[idx[0]])


@dataclass(frozen=True)
class RootResult:
    value: float
    root: float
    below_threshold: bool


def _probe_monotone(psi: PsiFunction, t_star: float, points: int = 64) -> None:
    ts = np.geomspace(t_star * 1e-6, t_star, points)
    vals = np.asarray(psi(ts))
    bad = np.flatnonzero(np.diff(vals) < -1e-12 * vals[1:])
    if bad.size:
        raise NormingError(
            f"psi not increasing near 0: psi({ts[bad[0]]:.3g})={vals[bad[0]]:.6g} > "
            f"psi({ts[bad[0] + 1]:.3g})={vals[bad[0] + 1]:.6g}")


def solve_b_detailed(psi: PsiFunction, n: int, rtol: float = 1e-10) -> RootResult:
    """Root of ``psi(1/b) = 1/n`` by bisection on ``log t``, ``t = 1/b``.

    Returns the leftmost ``t`` with ``psi(t) >= 1/n`` (so the smallest-``t``
    crossing when ``psi`` wiggles further out).  ``value = max(1, b)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return RootResult(1.0, 1.0, False)
    target = 1.0 / n
    hi = 1.0
    while float(psi(hi)) < target:
        hi *= 2.0
        if hi > 1e6:
            raise NormingError(f"psi never reaches 1/n = {target:g}")
    lo = hi * 1e-3
    while float(psi(lo)) >= target:
        lo *= 1e-3
        if lo < 1e-300:
            raise NormingError("psi does not vanish at 0")
    s = bisect_boundary(lambda v: float(psi(math.exp(v))) >= target, math.log(lo), math.log(hi),
                        rtol=0.0, atol=math.log1p(rtol))
    t_star = math.exp(s)
    _probe_monotone(psi, t_star)
    b = 1.0 / t_star
    return RootResult(max(1.0, b), b, b < 1.0)


def solve_b(psi: PsiFunction, n: int) -> float:
    """Natural norming ``b(n)``; ``b(1) = 1``."""
    return solve_b_detailed(psi, n).value


def exact_sequence(psi: PsiFunction, ns: Sequence[int]) -> NormingSequence:
    res = [solve_b_detailed(psi, int(n)) for n in ns]
    return NormingSequence(
        ns=np.asarray(ns, dtype=np.int64),
        log_values=np.log([r.value for r in res]),
        provenance=Provenance.EXACT_ROOT,
        descriptor=dict(psi.descriptor),
        below_threshold=np.array([r.below_threshold for r in res]),
    )


def b_asymptotic(model: TailModel, n: int) -> tuple[float, bool]:
    """``n^(1/r) (log n)^(gamma/r) L(log n)^(1/r)`` and the consistency flag.

    The flag is True for constant and log-power ``L``, the cases where the
    slowly varying correction is known to be asymptotically negligible in
    the norming equation.  The scale ``K`` does not enter.
    """
    if model.classify() is not Regime.HEAVY:
        raise ValueError("asymptotic norming is for heavy models")
    r = model.r
    ln = math.log(n)
    if model.variant == "loglog":
        val = n ** (1 / r) * (math.log(ln) ** model.kappa * float(model.L(math.log(ln)))) ** (1 / r)
    else:
        val = n ** (1 / r) * ln ** (model.gamma / r) * float(model.L(ln)) ** (1 / r)
    return val, model.L.is_regular


def b_moderate(n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.sqrt(n)


def _check_weights(w: Callable[[int], float], n_check: int) -> None:
    if abs(w(1) - 1.0) > 1e-12:
        raise ValueError("weight sequence must satisfy w(1) = 1")
    ns = np.unique(np.round(np.geomspace(1, max(n_check, 2), 32)).astype(int))
    ws = np.array([w(int(k)) for k in ns])
    if np.any(np.diff(ws) <= 0):
        k = int(np.flatnonzero(np.diff(ws) <= 0)[0])
        raise ValueError(f"weight sequence not increasing: w({ns[k]})={ws[k]} >= w({ns[k + 1]})={ws[k + 1]}")


def log_b_superheavy(K: float, kappa: float, L: SlowlyVarying, w: Callable[[int], float],
                     n: int, *, check: bool = True) -> float:
    """``log B_n = (K n)^(1/kappa) L((K n)^(1/kappa))^(1/kappa) w(n)``."""
    if check:
        _check_weights(w, max(n, 1000))
    base = (K * n) ** (1.0 / kappa)
    return base * float(L(base)) ** (1.0 / kappa) * w(n)


def b_superheavy(K: float, kappa: float, L: SlowlyVarying, w: Callable[[int], float], n: int) -> float:
    """``B_n``; ``inf`` once it leaves double range (use :func:`log_b_superheavy`)."""
    lb = log_b_superheavy(K, kappa, L, w, n)
    return math.exp(lb) if lb < 709.0 else math.inf


def superheavy_sequence(model: TailModel, w: Callable[[int], float], ns: Sequence[int]) -> NormingSequence:
    if model.variant != "superheavy":
        raise ValueError("superheavy norming needs a superheavy model")
    _check_weights(w, max(max(ns), 1000))
    logs = [log_b_superheavy(model.scale, model.kappa, model.L, w, int(n), check=False) for n in ns]
    return NormingSequence(
        ns=np.asarray(ns, dtype=np.int64),
        log_values=np.asarray(logs),
        provenance=Provenance.SUPERHEAVY,
        descriptor=model.to_dict(),
        weights=np.array([w(int(n)) for n in ns]),
    )


def asymptotic_sequence(model: TailModel, ns: Sequence[int]) -> NormingSequence:
    vals = [1.0 if n == 1 else b_asymptotic(model, int(n))[0] for n in ns]
    return NormingSequence(np.asarray(ns, dtype=np.int64), np.log(vals), Provenance.ASYMPTOTIC,
                           model.to_dict())


def sqrt_sequence(ns: Sequence[int]) -> NormingSequence:
    return NormingSequence(np.asarray(ns, dtype=np.int64), 0.5 * np.log(np.asarray(ns, dtype=float)),
                           Provenance.SQRT_N, {"kind": "sqrt_n"})
