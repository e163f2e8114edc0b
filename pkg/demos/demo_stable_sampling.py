"""Exact samplers for the isotropic stable process.

Walks through the three sampling primitives: free-space increments, exit
positions from balls, and the closed-form mean exit time, comparing each
against a textbook formula.
"""

import numpy as np

from reflected_stable import StableParams, ball_exit_position, ball_mean_exit_time, \
    sample_stable_increment

rng = np.random.default_rng(7)

print("== increments ==")
p = StableParams(1, 1.0)
x = sample_stable_increment(p, 1.0, rng, size=200000)
print("alpha=1 (Cauchy) unit-time increments:")
print("  P(|X| <= 1) empirical %.4f  vs arctan formula %.4f"
      % (np.mean(np.abs(x) <= 1.0), 2.0 / np.pi * np.arctan(1.0)))

p15 = StableParams(1, 1.5)
a = sample_stable_increment(p15, 0.25, rng, size=200000)
b = sample_stable_increment(p15, 1.0, rng, size=200000)
print("alpha=1.5 self-similarity: median |X_dt| * dt^(-1/alpha)")
print("  dt=0.25: %.4f   dt=1: %.4f" % (np.median(np.abs(a)) * 0.25 ** (-1 / 1.5),
                                        np.median(np.abs(b))))

print()
print("== ball exits ==")
z = ball_exit_position(p, 0.0, 1.0, 0.0, rng, size=200000)
print("exit from the unit interval started at the center, alpha=1:")
print("  P(|Z| > 2) empirical %.4f  vs 1 - (2/pi) arctan(sqrt 3) = %.4f"
      % (np.mean(np.abs(z) > 2.0), 1.0 - 2.0 / np.pi * np.arctan(np.sqrt(3.0))))
print("  smallest |Z| = %.6f (never inside the closed ball)" % np.abs(z).min())

d2 = StableParams(2, 1.0)
z2 = ball_exit_position(d2, np.zeros(2), 1.0, np.zeros(2), rng, size=100000)
r2 = np.linalg.norm(z2, axis=1)
print("d=2 exit radii share the 1-D law: P(R > 2) = %.4f (1/3 expected)"
      % np.mean(r2 > 2.0))

print()
print("== mean exit times ==")
for alpha in (0.5, 1.0, 1.5):
    pa = StableParams(1, alpha)
    print("  alpha=%.1f: E tau from center %.4f, from 0.9 %.4f"
          % (alpha, ball_mean_exit_time(pa, 1.0, 0.0),
             ball_mean_exit_time(pa, 1.0, 0.9)))
