import math

import numpy as np
import pytest
from scipy import stats

from btc_confirm.erlang_bound import lower_bound
from btc_confirm.model import DomainError, ModelParams
from btc_confirm.simulator import (
    CensoringWarning,
    SimulationConfig,
    chunk_generator,
    default_max_blocks,
    empirical_quantile,
    empirical_time_cdf,
    exponential,
    ladder_height_sampler,
    simulate_confirmation,
    simulate_undershoot,
)
from btc_confirm.undershoot import expected_undershoot


def run(c, x0, runs=100_000, seed=0, **kw):
    return simulate_confirmation(SimulationConfig(ModelParams(c, x0), runs=runs, seed=seed, **kw))


def test_worker_count_does_not_change_results():
    cfg = SimulationConfig(ModelParams(0.5, 1.0), runs=50_000, seed=11, chunk_size=4096)
    grid = np.linspace(0, 20, 41)
    one = simulate_confirmation(cfg, t_grid=grid, workers=1)
    four = simulate_confirmation(cfg, t_grid=grid, workers=4)
    assert np.array_equal(one.blocks, four.blocks)
    assert np.array_equal(one.times, four.times)
    assert np.array_equal(one.time_cdf.p_hat, four.time_cdf.p_hat)


def test_same_seed_same_result():
    a, b = run(0.75, 1.0, runs=20_000, seed=3), run(0.75, 1.0, runs=20_000, seed=3)
    assert np.array_equal(a.times, b.times)


def test_no_inflow_drains_exactly():
    r = run(0.0, 4.0, runs=1000)
    assert r.prob_within(3) == (0.0, 0.0)
    assert r.prob_within(4) == (1.0, 0.0)


@pytest.mark.parametrize(
    "c,x0,n,mean,sd",
    [(0.5, 1.0, 3, 0.797, 0.004), (0.25, 4.0, 7, 0.956, 0.002), (0.75, 1.0, 18, 0.954, 0.002)],
)
def test_table_rows(c, x0, n, mean, sd):
    p, _ = run(c, x0, runs=300_000, seed=1).prob_within(n)
    assert abs(p - mean) <= 3 * sd


def test_block_cdf_shape_and_errors():
    r = run(0.5, 1.0, runs=30_000)
    p, se = r.block_cdf.p_hat, r.block_cdf.se
    assert np.all(np.diff(p) >= 0)
    assert np.allclose(se, np.sqrt(p * (1 - p) / r.runs))
    assert len(p) == r.max_blocks


def test_time_and_block_counts_agree_per_run():
    c, x0 = 0.6, 2.5
    r = run(c, x0, runs=20_000)
    ok = r.blocks > 0
    n, tau = r.blocks[ok].astype(float), r.times[ok]
    # at the confirming block the pre-jump position is at most one block
    assert np.all(x0 + c * tau - (n - 1) <= 1 + 1e-9)
    assert np.all(n >= x0)


@pytest.mark.parametrize("c,x0", [(0.25, 1.0), (0.25, 4.0), (0.5, 1.0), (0.75, 1.0), (0.75, 3.0)])
def test_wald_identity_for_mean_time(c, x0):
    # E[x0 + c tau - N] = -E S_{x0} with E N = E tau
    r = run(c, x0, runs=200_000, seed=5, max_blocks=5000)
    assert r.censored == 0
    target = (x0 + expected_undershoot(c, x0)) / (1 - c)
    se = r.times.std(ddof=1) / math.sqrt(r.runs)
    assert abs(r.times.mean() - target) <= 3 * se


def test_exponential_sampler_ks():
    x = exponential(chunk_generator(2024, 0), 100_000)
    d = stats.kstest(x, "expon").statistic
    assert d < stats.kstwo.ppf(0.99, x.size)


def test_different_seeds_are_consistent():
    a, b = run(0.5, 1.0, runs=300_000, seed=1), run(0.5, 1.0, runs=300_000, seed=2)
    assert not np.array_equal(a.times[:100], b.times[:100])
    for n in range(1, 9):
        (pa, sa), (pb, sb) = a.prob_within(n), b.prob_within(n)
        assert abs(pa - pb) <= 4 * math.hypot(sa, sb) + 1e-15


@pytest.mark.parametrize("c,x0", [(0.25, 1.0), (0.25, 4.0), (0.5, 1.0), (0.75, 1.0)])
def test_dominates_lower_bound(c, x0):
    r = run(c, x0, runs=300_000)
    p = ModelParams(c, x0)
    for n in range(1, 21):
        ph, se = r.prob_within(n)
        assert lower_bound(p, n) <= ph + 3 * se


def test_time_cdf_edges():
    r = run(0.5, 1.0, runs=10_000)
    t = empirical_time_cdf(r, [0.0, r.times.min() / 2, r.times.max() + 1])
    assert t.p_hat.tolist() == [0.0, 0.0, 1.0]


def test_empirical_quantile():
    r = run(0.5, 1.0, runs=10_000)
    q = empirical_quantile(r, 0.5)
    assert np.mean(r.times <= q) >= 0.5 > np.mean(r.times < q)


def test_censoring_is_reported():
    with pytest.warns(CensoringWarning):
        r = run(1.2, 1.0, runs=5000, max_blocks=50)
    assert r.censored > 0
    assert np.all(np.isinf(r.times[r.blocks == 0]))
    assert empirical_quantile(r, 0.99) == math.inf


def test_default_horizon():
    assert default_max_blocks(ModelParams(0.5, 1.0)) == 120
    assert SimulationConfig(ModelParams(0.5, 1.0), runs=10).max_blocks == 120


@pytest.mark.parametrize("kw", [dict(runs=0), dict(runs=10, seed=-1), dict(runs=10, max_blocks=0), dict(runs=10, chunk_size=0)])
def test_config_validation(kw):
    with pytest.raises(DomainError):
        SimulationConfig(ModelParams(0.5, 1.0), **kw)


def test_undershoot_no_inflow():
    est = simulate_undershoot(0.0, 0.3, runs=100)
    assert est.mean == pytest.approx(0.7, abs=1e-15)
    assert est.se == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("c", [0.3, 0.7, 0.95])
def test_ladder_heights_match_first_descent(c):
    # first strict descent below a start at 0 is the first ladder height
    rng = chunk_generator(9, 0)
    n = 200_000
    walk = np.empty(n)
    pos = np.zeros(n)
    idx = np.arange(n)
    while idx.size:
        pos[idx] += c * exponential(rng, idx.size) - 1.0
        done = pos[idx] < 0
        walk[idx[done]] = -pos[idx[done]]
        idx = idx[~done]
    ladder = ladder_height_sampler(c)(chunk_generator(9, 1), n)
    assert stats.ks_2samp(walk, ladder).pvalue > 0.001


def test_ladder_completion_agrees_with_walk():
    walk = simulate_undershoot(0.9, 2.0, runs=400_000, seed=1)
    ladder = simulate_undershoot(0.9, 2.0, runs=400_000, seed=2, max_steps=0)
    assert walk.ladder_completed == 0
    assert ladder.ladder_completed == ladder.runs
    assert abs(walk.mean - ladder.mean) <= 4 * math.hypot(walk.se, ladder.se)


def test_undershoot_workers():
    a = simulate_undershoot(1.0, 1.0, runs=50_000, seed=4, max_steps=200, chunk_size=8192, workers=1)
    b = simulate_undershoot(1.0, 1.0, runs=50_000, seed=4, max_steps=200, chunk_size=8192, workers=3)
    assert a == b


@pytest.mark.parametrize("c", [0.002, 0.02, 0.5])
def test_ladder_sampler_light_traffic(c):
    h = ladder_height_sampler(c)(chunk_generator(1, 0), 100_000)
    assert np.all((h >= 0) & (h <= 1))
    # density proportional to exp((1 - p) h / c): mass piles up near 1
    assert np.mean(h) == pytest.approx(1 - c, abs=0.02 + 5 * c**2)


def test_light_traffic_undershoot_matches_closed_form():
    # from x in (0, 1) with tiny c the first block lands at 1 - c T - x below 0 almost surely
    est = simulate_undershoot(0.01, 0.4, runs=200_000, seed=2)
    assert abs(est.mean - (1 - 0.01 - 0.4)) <= 3 * est.se
