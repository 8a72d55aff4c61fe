"""
From mempool data to model inputs
=================================

x0 is the data ahead of (and including) our transaction in fee-density
order, and c is the rate at which data paying at least our density
arrives, both in blocks.  The snapshot and arrival log below are
synthetic but use the same JSON layout as the CLI inputs.
"""

import json

import numpy as np

from btc_confirm import ModelParams, arrival_rate, confirm_quantile, initial_position, lower_bound, parse_arrivals, parse_snapshot

rng = np.random.default_rng(5)
sizes = rng.integers(150, 1500, size=4000)
densities = rng.lognormal(mean=2.5, sigma=0.8, size=4000)
snapshot = {"version": 1, "taken_at_s": 0.0,
            "txs": [{"size": int(s), "fee": int(s * d)} for s, d in zip(sizes, densities)]}
times = np.sort(rng.uniform(0, 3600, size=12000))
arrivals = {"version": 1, "window_start_s": 0.0, "window_end_s": 3600.0,
            "txs": [{"size": int(s), "fee": int(s * d), "time_s": float(t)}
                    for s, d, t in zip(rng.integers(150, 1500, 12000), rng.lognormal(2.5, 0.8, 12000), times)]}

snap = parse_snapshot(json.dumps(snapshot))
log = parse_arrivals(json.dumps(arrivals))
print(f"snapshot: {len(snap.txs)} txs, {snap.total_bytes / 1e6:.2f} MB")

# %%
# Paying more moves a transaction forward and shrinks the competing inflow.

print("\n phi   x0      c     P(N<=3) bound  90% time (blocks)")
for phi in (5, 10, 20, 40, 80):
    x0 = initial_position(snap, phi, own_size_bytes=250)
    c = arrival_rate(log, phi)
    params = ModelParams(c=c, x0=x0)
    q90 = confirm_quantile(0.9, params) if params.is_stable else float("inf")
    print(f"{phi:4d}  {x0:.3f}  {c:.3f}  {lower_bound(params, 3):.4f}        {q90:.2f}")
