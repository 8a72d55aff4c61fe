"""
Confirmation within n blocks: the Erlang lower bound
=====================================================

After n blocks the queue ahead of a transaction has been drained by n
blocks and refilled by c times the Erlang(n) time those blocks took.
Ignoring that a confirmed transaction stays confirmed gives a cheap lower
bound on P(N <= n).  Here it is set against a 300,000-run simulation.
"""

from btc_confirm import ModelParams, SimulationConfig, lower_bound, simulate_confirmation

cases = [(0.25, 4.0, range(4, 9)), (0.5, 1.0, range(1, 9)), (0.75, 1.0, [1, 2, 3, 4, 18, 19, 20])]

for c, x0, ns in cases:
    params = ModelParams(c=c, x0=x0)
    sim = simulate_confirmation(SimulationConfig(params, runs=300_000, seed=1))
    print(f"\nc = {c}, x0 = {x0}")
    print(" n   simulated    se      bound    gap")
    for n in ns:
        p, se = sim.prob_within(n)
        b = lower_bound(params, n)
        print(f"{n:2d}   {p:.4f}    {se:.4f}   {b:.4f}  {p - b:+.4f}")

# %%
# The bound is tight in light traffic and gets loose as c grows: at
# c = 0.75 it trails the simulation by about 0.09 even after 20 blocks.
