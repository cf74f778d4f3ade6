"""Covering numbers of a random point cloud and entropy integrals.

Greedy covering gives upper bounds on N(eps); the entropy integral then
decides whether the uniform bound over the index set is finite.
"""
import numpy as np

from heavysums.fields import AnalyticCovering, GridSpace, covering_numbers, entropy_integral

pts = np.random.default_rng(0).random((200, 2))
space = GridSpace.from_points(pts)
eps = space.diameter * np.geomspace(1.0, 0.01, 9)
prof = covering_numbers(space, eps)
print("    eps      N")
for e, n in zip(prof.eps, prof.N):
    print(f"{e:8.4f} {n:6d}")

for r in (1.0, 2.0, 3.0):
    res = entropy_integral(prof, r)
    print(f"profile, r={r:g}: value {res.value:.4f}, flag {res.flag.value}")

print("\nanalytic N(eps) = eps^(-1/alpha): finite iff 1/(alpha r) < 1")
for alpha, r in ((1.0, 3.0), (1.0, 1.0), (0.5, 3.0)):
    res = entropy_integral(AnalyticCovering.power(alpha), r)
    print(f"alpha={alpha:g} r={r:g}: {res.flag.value}, value {res.value:.6g}")
