"""Erlang-tail lower bound on the probability of confirmation within n blocks.

After n block arrivals the (boundary-free) position is ``x0 - n + c * E_n``
with ``E_n`` an Erlang(n, 1) variable, so

    P(N <= n) >= P(X_n <= 0) = P(E_n <= (n - x0) / c).

Ignoring the sticky boundary at zero is what makes this a lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .model import DomainError, ModelParams, validate

__all__ = ["BlockBoundTable", "lower_bound", "lower_bound_table", "erlang_cdf", "bound_quantile"]

_LOG_SPACE_THRESHOLD = 700.0


def erlang_cdf(n: int, y: float) -> float:
    """P(E_n <= y) for E_n ~ Erlang(n, 1), i.e. ``1 - sum_{k<n} y^k e^-y / k!``.

    For ``y < n`` the result is small and ``1 - tail`` would cancel, so the
    upper series ``sum_{k>=n} y^k e^-y / k!`` is summed instead; its terms
    shrink at least geometrically.
    """
    if y <= 0.0:
        return 0.0
    if y < n:
        log_term = n * math.log(y) - y - math.lgamma(n + 1)
        if log_term < -745.0:
            return 0.0
        term = math.exp(log_term)
        terms = [term]
        k = n
        while term > 1e-17 * terms[0]:
            k += 1
            term *= y / k
            terms.append(term)
        return min(1.0, math.fsum(terms))
    if y <= _LOG_SPACE_THRESHOLD:
        term = math.exp(-y)
        terms = [term]
        for k in range(1, n):
            term *= y / k
            terms.append(term)
    else:
        # e^-y underflows; build the terms from their logarithms instead
        log_y = math.log(y)
        log_term = -y
        terms = [math.exp(log_term)]
        for k in range(1, n):
            log_term += log_y - math.log(k)
            terms.append(math.exp(log_term))
    tail = math.fsum(terms)
    return min(1.0, max(0.0, 1.0 - tail))


def lower_bound(params: ModelParams, n: int) -> float:
    """Lower bound on P(confirmation in at most ``n`` blocks).

    Returns 0 when ``n <= x0``.  For ``c == 0`` the queue drains
    deterministically and the result is 1 if ``n >= x0`` else 0.
    """
    validate(params)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise DomainError("n", f"must be a positive integer, got {n!r}")
    c, x0 = params.c, params.x0
    if c == 0.0:
        return 1.0 if n >= x0 else 0.0
    if n <= x0:
        return 0.0
    return erlang_cdf(n, (n - x0) / c)


@dataclass(frozen=True)
class BlockBoundTable:
    params: ModelParams
    rows: tuple[tuple[int, float], ...]

    def bounds(self) -> list[float]:
        return [b for _, b in self.rows]


def lower_bound_table(params: ModelParams, n_max: int) -> BlockBoundTable:
    if isinstance(n_max, bool) or not isinstance(n_max, int) or n_max < 1:
        raise DomainError("n_max", f"must be a positive integer, got {n_max!r}")
    rows = tuple((n, lower_bound(params, n)) for n in range(1, n_max + 1))
    return BlockBoundTable(params=params, rows=rows)


def bound_quantile(params: ModelParams, q: float, n_cap: int = 1 << 20) -> int | None:
    """Smallest ``n`` whose bound reaches ``q``, or None if none does up to ``n_cap``.

    The bound need not be monotone in ``n`` (for c > 1 it eventually decays
    to zero), but it holds at every ``n``, so the first crossing is still a
    valid upper estimate of the ``q``-quantile of the block count.
    """
    validate(params)
    q = float(q)
    if not (0.0 < q < 1.0):
        raise DomainError("q", f"must lie in (0, 1), got {q!r}")
    c, x0 = params.c, params.x0
    if c == 0.0:
        return max(1, math.ceil(x0))
    lo = 1
    while lo <= n_cap:
        hi = min(n_cap, 2 * lo)
        n = np.arange(lo, hi + 1, dtype=float)
        # regularized lower incomplete gamma P(n, y) is the Erlang(n, 1) cdf
        b = np.where(n > x0, special.gammainc(n, np.maximum(n - x0, 0.0) / c), 0.0)
        hit = np.nonzero(b >= q)[0]
        if hit.size:
            k = lo + int(hit[0])
            # confirm on the exact evaluator in case gammainc rounds across q
            while k <= n_cap and lower_bound(params, k) < q:
                k += 1
            return k if k <= n_cap else None
        lo = hi + 1
    return None
