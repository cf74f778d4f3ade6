"""Uniform tail bound against a seeded simulation.

The heavy-regime curve is computed from psi alone; the simulation estimates
U(x) = sup_n P(|S(n)| / b(n) > x) and checks the curve at three standard
errors.  A deliberately weakened curve shows what a violation looks like.
"""
import numpy as np

from heavysums.bounds import BoundCurve, heavy_curve
from heavysums.simulate import SumExperiment, run_sums, verify_bound
from heavysums.tailmodel import TailModel

model = TailModel(1.5, gamma=1.0)
curve = heavy_curve(model)
print(f"curve {curve.tag}: {curve.constant:.3f} * {curve.shape}")

x = np.geomspace(10, 300, 8)
exp = SumExperiment(model, "exact", (1, 10, 100, 1000), 20_000, seed=1, x_grid=tuple(x))
emp = run_sums(exp, keep_sums=False)
rep = verify_bound(emp, curve)

print("      x    n*      U_hat        T(x)       bound")
for xi, n, u, b in zip(emp.x, emp.argmax_n, emp.U_hat, curve(emp.x)):
    print(f"{xi:7.1f} {n:5d}  {u:.3e}  {float(model(xi)):.3e}  {b:.3e}")
print("bound holds at 3 SE:", rep.passed)

weak = BoundCurve(lambda v: 0.05 * np.asarray(curve(v)), "weakened", x_min=curve.x_min, strict=False)
bad = verify_bound(emp, weak)
print("0.05 x bound holds:", bad.passed, "violations at x =", [round(v, 1) for v, _ in bad.violations])
