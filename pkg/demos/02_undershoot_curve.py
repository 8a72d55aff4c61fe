"""
The expected undershoot E S_x
=============================

When the last block confirms the transaction it usually has room to
spare: the queue position jumps from somewhere in (0, 1] to below zero.
The depth S_x of that jump below zero drives the diffusion correction.
``solve`` computes x -> E S_x for one traffic rate.
"""

import numpy as np

from btc_confirm import interval_bounds, simulate_undershoot, solve

xs = np.arange(0.0, 6.01, 0.5)
print("   x  " + "  ".join(f"c={c:<5}" for c in (0.25, 0.5, 0.75, 0.95, 1.0)))
curves = {c: solve(c, x_max=6) for c in (0.25, 0.5, 0.75, 0.95, 1.0)}
for x in xs:
    print(f"{x:4.1f}  " + "  ".join(f"{curves[c](x):.5f}" for c in curves))

# %%
# Heavier traffic flattens the curve in x.  With c = 1 it tends to 1/3,
# the mean of the limiting law P(S > y) = (1 - y)^2.

print("\nspread over [2, 6]:", {c: round(float(np.ptp(curves[c](np.linspace(2, 6, 81)))), 5) for c in curves})

# %%
# An independent check: Monte Carlo of the block walk from x = 1.

for c in (0.25, 0.95):
    mc = simulate_undershoot(c, 1.0, runs=1_000_000, seed=3)
    print(f"c={c}: solver {curves[c](1.0):.5f}, simulation {mc.mean:.5f} +- {mc.se:.5f}")

# %%
# Without solving the whole system, eliminating the first knots gives an
# interval for E S_0 that only uses 0 <= E S_d <= 1.  It narrows with d.

for d in range(1, 7):
    lo, hi = interval_bounds(1.0, d)
    print(f"depth {d}: E S_0 in [{lo:.4f}, {hi:.4f}]")
print("solver:", curves[1.0](0.0))
