"""Norming sequences and the envelope for a Pareto tail.

Walks through the objects every bound is built from: the tail model, its
addition function psi, the envelope psi_bar and the natural norming b(n).
"""
import numpy as np

from heavysums.charfn import PsiBar, PsiFunction, c3, classify_mi_md
from heavysums.norming import b_asymptotic, solve_b
from heavysums.tailmodel import TailModel

model = TailModel(1.5, gamma=1.0)
print(f"model: r={model.r}, gamma={model.gamma}, regime {model.classify().value}")
print(f"cutoff x0={model.x0:.4f}, T(x0)={model.tail_at_cutoff:.4f}")

psi = PsiFunction.from_tail(model)
for t in (1e-1, 1e-2, 1e-3, 1e-4):
    lead = c3(1.5) * t ** 1.5 * abs(np.log(t))
    print(f"psi({t:g}) = {float(psi(t)):.4e}   leading term {lead:.4e}")

label = classify_mi_md(model)
print(f"monotonicity class: {label.label.value} ({label.rule})")

# psi_bar is a sup of ratios psi(lt)/psi(l), so it sits above psi only when
# psi(1) <= 1; this model has a heavier unit-scale part than that
pb = PsiBar(psi)
print(f"psi(1) = {float(psi(1.0)):.4f}")
t = np.array([0.05, 0.2, 0.5, 0.9])
print("t       psi(t)     psi_bar(t)")
for ti, a, b in zip(t, np.asarray(psi(t)), np.asarray(pb(t))):
    print(f"{ti:<7g} {a:.5f}    {b:.5f}")

print("\n     n      b(n)   asymptotic   ratio")
for n in (10, 100, 1000, 10_000, 100_000):
    b = solve_b(psi, n)
    a, _ = b_asymptotic(model, n)
    print(f"{n:>6d} {b:9.3f} {a:12.3f} {b / a:7.3f}")
