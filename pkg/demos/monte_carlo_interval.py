"""Confidence interval for a heavy-tailed Monte-Carlo integral.

The integrand f(u) = u^(-2/3) on (0, 1) has mean 3 and infinite variance,
so sqrt(n) intervals do not apply.  The interval uses the heavy-regime
curve, its inversion X(delta) and the natural norming b(n).
"""
import numpy as np

from heavysums.app import ci_mean, regime_curve, solve_X
from heavysums.simulate import substream
from heavysums.tailmodel import TailModel

model = TailModel(1.5)
curve, psi = regime_curve(model)
delta = 0.05
print(f"X({delta}) = {solve_X(curve, delta):.3f} from curve {curve.tag}")

for n in (1_000, 10_000, 100_000):
    f = substream(3, n).random(n) ** (-1 / 1.5)
    rep = ci_mean(f, model, delta, curve=curve, psi=psi, truth=3.0)
    lo, hi = rep.interval
    print(f"n={n:>6d}  estimate {rep.estimate:.4f}  interval [{lo:.3f}, {hi:.3f}]  b(n)={rep.b_n:.1f}  hit={rep.hit}")

trials = 200
hits = sum(ci_mean(substream(4, k).random(5_000) ** (-1 / 1.5), model, delta,
                   curve=curve, psi=psi, truth=3.0).hit for k in range(trials))
print(f"coverage over {trials} trials at n=5000: {hits / trials:.3f}")
