"""Seeded Monte Carlo for the confirmation process and its undershoot.

Random streams
--------------
Runs are split into chunks of ``chunk_size``.  Chunk ``i`` draws from a
Philox4x64 counter-based generator keyed by
``numpy.random.SeedSequence(seed, spawn_key=(i,))``.  The key depends only on
``(seed, i)``, so results are bit-identical for any number of workers as long
as ``seed`` and ``chunk_size`` are unchanged.  Exponential variates are
drawn by inversion, ``-log(1 - U)``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize

from .model import DomainError, ModelParams, validate

__all__ = [
    "CensoringWarning",
    "SimulationConfig",
    "CdfTable",
    "SimulationResult",
    "UndershootEstimate",
    "chunk_generator",
    "exponential",
    "default_max_blocks",
    "default_time_grid",
    "simulate_confirmation",
    "simulate_undershoot",
    "empirical_time_cdf",
    "empirical_quantile",
    "ladder_height_sampler",
]

DEFAULT_CHUNK = 1 << 16
CENSOR_WARN_FRACTION = 1e-3
SEED_MAX = (1 << 64) - 1


class CensoringWarning(UserWarning):
    pass


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def exponential(rng: np.random.Generator, n: int) -> np.ndarray:
    return -np.log1p(-rng.random(n))


def default_max_blocks(params: ModelParams) -> int:
    if params.c < 1.0:
        return 10 * math.ceil(params.x0 / (1.0 - params.c)) + 100
    return 100 * math.ceil(params.x0 + 1.0) + 1000


def default_time_grid(params: ModelParams, points: int = 201) -> np.ndarray:
    if params.c < 1.0:
        horizon = 4.0 * max(params.x0, 1.0) / (1.0 - params.c)
    else:
        horizon = float(default_max_blocks(params))
    return np.linspace(0.0, horizon, points)


def _check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= seed <= SEED_MAX:
        raise DomainError("seed", f"must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def _check_count(name: str, value: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise DomainError(name, f"must be a positive integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class SimulationConfig:
    params: ModelParams
    runs: int
    seed: int = 0
    max_blocks: int | None = None
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        validate(self.params)
        _check_count("runs", self.runs)
        _check_seed(self.seed)
        _check_count("chunk_size", self.chunk_size)
        if self.max_blocks is None:
            object.__setattr__(self, "max_blocks", default_max_blocks(self.params))
        _check_count("max_blocks", self.max_blocks)

    @property
    def n_chunks(self) -> int:
        return -(-self.runs // self.chunk_size)

    def chunk_runs(self, i: int) -> int:
        return min(self.chunk_size, self.runs - i * self.chunk_size)


@dataclass(frozen=True)
class CdfTable:
    """Empirical CDF points with binomial standard errors."""

    points: np.ndarray
    p_hat: np.ndarray
    se: np.ndarray

    def rows(self):
        return zip(self.points.tolist(), self.p_hat.tolist(), self.se.tolist())


def _binomial_table(points, counts, runs: int) -> CdfTable:
    p = np.asarray(counts, dtype=float) / runs
    return CdfTable(np.asarray(points), p, np.sqrt(p * (1.0 - p) / runs))


@dataclass(frozen=True, eq=False)
class SimulationResult:
    params: ModelParams
    runs: int
    seed: int
    max_blocks: int
    chunk_size: int
    blocks: np.ndarray = field(repr=False)  # confirmation block per run; 0 if censored
    times: np.ndarray = field(repr=False)  # confirmation time per run; inf if censored
    block_cdf: CdfTable = field(repr=False)
    time_cdf: CdfTable = field(repr=False)

    @property
    def censored(self) -> int:
        return int(np.count_nonzero(self.blocks == 0))

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.runs

    def prob_within(self, n: int) -> tuple[float, float]:
        """(p_hat, se) for P(N <= n)."""
        if n < 1:
            return 0.0, 0.0
        if n > self.max_blocks:
            n = self.max_blocks
        return float(self.block_cdf.p_hat[n - 1]), float(self.block_cdf.se[n - 1])


def _confirmation_chunk(c: float, x0: float, max_blocks: int, seed: int, chunk: int, n: int):
    rng = chunk_generator(seed, chunk)
    blocks = np.zeros(n, dtype=np.int64)
    times = np.zeros(n)
    idx = np.arange(n)
    x = np.full(n, float(x0))
    for k in range(1, max_blocks + 1):
        t = exponential(rng, idx.size)
        x += c * t
        times[idx] += t
        # the block confirms the transaction when everything ahead fits in it
        done = x <= 1.0
        blocks[idx[done]] = k
        keep = ~done
        idx = idx[keep]
        x = x[keep] - 1.0
        if idx.size == 0:
            break
    times[idx] = np.inf
    return blocks, times


def _run_chunks(fn: Callable[[int], tuple], n_chunks: int, workers: int) -> list:
    if workers <= 1 or n_chunks == 1:
        return [fn(i) for i in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_chunks)))


def simulate_confirmation(config: SimulationConfig, t_grid=None, workers: int = 1) -> SimulationResult:
    """Simulate block counts and times until confirmation.

    Runs that are still unconfirmed after ``max_blocks`` blocks are censored:
    they are kept in the denominator and counted as never confirmed.
    """
    p = config.params
    if t_grid is None:
        t_grid = default_time_grid(p)

    def one(i):
        return _confirmation_chunk(p.c, p.x0, config.max_blocks, config.seed, i, config.chunk_runs(i))

    parts = _run_chunks(one, config.n_chunks, workers)
    blocks = np.concatenate([b for b, _ in parts])
    times = np.concatenate([t for _, t in parts])

    hist = np.bincount(blocks, minlength=config.max_blocks + 1)[1:]
    block_cdf = _binomial_table(np.arange(1, config.max_blocks + 1), np.cumsum(hist), config.runs)
    for arr in (blocks, times):
        arr.setflags(write=False)
    result = SimulationResult(
        params=p,
        runs=config.runs,
        seed=config.seed,
        max_blocks=config.max_blocks,
        chunk_size=config.chunk_size,
        blocks=blocks,
        times=times,
        block_cdf=block_cdf,
        time_cdf=_time_table(times, t_grid),
    )
    if result.censored_fraction > CENSOR_WARN_FRACTION:
        warnings.warn(
            f"{result.censored_fraction:.2%} of runs exceeded max_blocks={config.max_blocks}",
            CensoringWarning,
            stacklevel=2,
        )
    return result


def _time_table(times: np.ndarray, t_grid) -> CdfTable:
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0) or np.any(grid < 0):
        raise DomainError("t_grid", "must be a strictly increasing sequence of nonnegative times")
    ordered = np.sort(times)
    counts = np.searchsorted(ordered, grid, side="right")
    return _binomial_table(grid, counts, times.size)


def empirical_time_cdf(result: SimulationResult, t_grid) -> CdfTable:
    return _time_table(result.times, t_grid)


def empirical_quantile(result: SimulationResult, prob: float) -> float:
    """Empirical ``prob``-quantile of the confirmation time (inf if censored)."""
    if not 0.0 < prob < 1.0:
        raise DomainError("p", f"must lie in (0, 1), got {prob!r}")
    ordered = np.sort(result.times)
    k = math.ceil(prob * result.runs) - 1
    return float(ordered[max(k, 0)])


# ---------------------------------------------------------------------------
# undershoot


def _ladder_parameter(c: float) -> float:
    """q = 1 - p where p in (0, 1) solves p = exp(-(1 - p)/c)."""

    def g(q):
        return -math.expm1(-q / c) - q

    lo = c * (1.0 - c)
    while g(lo) <= 0.0:
        lo *= 0.5
    return optimize.brentq(g, lo, 1.0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def ladder_height_sampler(c: float) -> Callable[[np.random.Generator, int], np.ndarray]:
    """Sampler for the strict descending ladder height of the block walk.

    Between block arrivals the walk moves ``c T - 1`` with ``T ~ Exp(1)``;
    its upward part is exponential with mean ``c``.  Wiener-Hopf
    factorisation then gives the ladder-height density
    ``(p/c) exp((1 - p) h / c)`` on [0, 1], uniform when ``c = 1``.
    """
    c = float(c)
    if not 0.0 <= c <= 1.0:
        raise DomainError("c", f"must lie in [0, 1], got {c!r}")
    if c == 0.0:
        return lambda rng, n: np.ones(n)
    if c == 1.0:
        return lambda rng, n: rng.random(n)
    q = _ladder_parameter(c)
    # p = exp(-q / c) underflows for small c, so invert the cdf in log space:
    # h = (c/q) log(1 + U q/p)
    log_ratio = math.log(q) + q / c
    scale = c / q

    def draw(rng, n):
        with np.errstate(divide="ignore"):
            return scale * np.logaddexp(0.0, np.log(rng.random(n)) + log_ratio)

    return draw


class UndershootEstimate(NamedTuple):
    mean: float
    se: float
    runs: int
    ladder_completed: int


def _undershoot_chunk(c: float, x: float, max_steps: int, ladder, seed: int, chunk: int, n: int):
    rng = chunk_generator(seed, chunk)
    pos = np.full(n, float(x))
    out = np.empty(n)
    idx = np.arange(n)
    for _ in range(max_steps):
        pos += c * exponential(rng, idx.size) - 1.0
        done = pos <= 0.0
        out[idx[done]] = -pos[done]
        keep = ~done
        idx, pos = idx[keep], pos[keep]
        if idx.size == 0:
            return out, 0
    completed = idx.size
    # finish long excursions exactly: from level y the remaining undershoot is
    # the overshoot of the ladder-height renewal process across y
    while idx.size:
        pos -= ladder(rng, idx.size)
        done = pos <= 0.0
        out[idx[done]] = -pos[done]
        keep = ~done
        idx, pos = idx[keep], pos[keep]
    return out, completed


def simulate_undershoot(
    c: float,
    x: float,
    runs: int,
    seed: int = 0,
    max_steps: int = 10_000,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> UndershootEstimate:
    """Monte Carlo estimate of E S_x (mean and standard error).

    Each run iterates ``X <- X + c T - 1`` until ``X <= 0`` and records
    ``-X``.  With ``c = 1`` the number of steps has infinite mean, so runs
    still alive after ``max_steps`` are completed by sampling ladder heights,
    which leaves the undershoot distribution unchanged.  ``max_steps=0``
    uses ladder heights only.
    """
    c, x = float(c), float(x)
    if not (math.isfinite(c) and 0.0 <= c <= 1.0):
        raise DomainError("c", f"must lie in [0, 1], got {c!r}")
    if not (math.isfinite(x) and x >= 0.0):
        raise DomainError("x", f"must be finite and >= 0, got {x!r}")
    runs = _check_count("runs", runs)
    seed = _check_seed(seed)
    chunk_size = _check_count("chunk_size", chunk_size)
    if isinstance(max_steps, bool) or not isinstance(max_steps, int) or max_steps < 0:
        raise DomainError("max_steps", f"must be a nonnegative integer, got {max_steps!r}")
    ladder = ladder_height_sampler(c)
    n_chunks = -(-runs // chunk_size)

    def one(i):
        n = min(chunk_size, runs - i * chunk_size)
        return _undershoot_chunk(c, x, max_steps, ladder, seed, i, n)

    parts = _run_chunks(one, n_chunks, workers)
    samples = np.concatenate([s for s, _ in parts])
    completed = sum(k for _, k in parts)
    se = float(samples.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    return UndershootEstimate(float(samples.mean()), se, runs, completed)
