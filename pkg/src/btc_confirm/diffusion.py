"""Inverse-Gaussian approximation of the confirmation time.

The queue position has drift ``-(1 - c)`` and unit variance per block
interval.  A Brownian motion with the same drift and variance started at
level ``a`` first hits zero at an inverse-Gaussian time with mean
``a / (1 - c)`` and shape ``a**2``.  The uncorrected approximation uses
``a = x0``; the corrected one starts at ``a = x0 + E S_{x0}`` to account for
the jump overshoot past the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .model import DomainError, ModelParams, validate
from .undershoot import UndershootSolution, evaluate, expected_undershoot

__all__ = [
    "InverseGaussianParams",
    "normal_cdf",
    "ig_cdf",
    "ig_pdf",
    "ig_quantile",
    "hitting_params",
    "start_level",
    "confirm_cdf",
    "confirm_quantile",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class InverseGaussianParams:
    mean: float
    shape: float
    start_level: float | None = None
    drift: float | None = None
    variance: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise DomainError("mean", f"must be positive, got {self.mean!r}")
        if not (math.isfinite(self.shape) and self.shape > 0):
            raise DomainError("shape", f"must be positive, got {self.shape!r}")


def normal_cdf(z):
    """Standard normal CDF via erfc, accurate in the lower tail."""
    z = np.asarray(z, dtype=float)
    out = 0.5 * special.erfc(-z / _SQRT2)
    return float(out) if out.ndim == 0 else out


def ig_pdf(t, p: InverseGaussianParams):
    t = np.asarray(t, dtype=float)
    mu, lam = p.mean, p.shape
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sqrt(lam / (2.0 * np.pi * t**3)) * np.exp(-lam * (t - mu) ** 2 / (2.0 * mu**2 * t))
    out = np.where(t > 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


def ig_cdf(t, p: InverseGaussianParams):
    """P(T <= t) for T ~ IG(mean, shape); ``t`` must be positive.

    The term ``exp(2 shape/mean) * Phi(-...)`` is combined in log space so
    that neither factor overflows or underflows on its own.  Beyond the mean
    the result is formed as ``1 - survival``, which keeps values that round
    to 1 ordered consistently.
    """
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("t", "must be positive")
    mu, lam = p.mean, p.shape
    root = np.sqrt(lam / t)
    z1 = root * (t / mu - 1.0)
    with np.errstate(over="ignore"):
        second = np.exp(2.0 * lam / mu + special.log_ndtr(-root * (t / mu + 1.0)))
    lower = normal_cdf(z1) + second
    upper = 1.0 - np.maximum(normal_cdf(-z1) - second, 0.0)
    out = np.clip(np.where(t > mu, upper, lower), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def ig_quantile(prob: float, p: InverseGaussianParams) -> float:
    """Smallest ``t`` with ``ig_cdf(t) = prob``, by bracketed root finding."""
    prob = float(prob)
    if not (0.0 < prob < 1.0):
        raise DomainError("p", f"must lie in (0, 1), got {prob!r}")
    mu = p.mean

    def f(s):
        return ig_cdf(s, p) - prob

    # the cdf is increasing; grow the bracket geometrically from the mean
    lo = hi = mu
    while f(lo) > 0.0:
        lo *= 0.5
    while f(hi) < 0.0:
        hi *= 2.0
    if lo == hi:
        return float(mu)
    return float(optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))


def hitting_params(c: float, a: float) -> InverseGaussianParams:
    """First-passage law of a Brownian motion from ``a`` with drift ``-(1 - c)``."""
    c, a = float(c), float(a)
    if not (math.isfinite(c) and 0.0 <= c < 1.0):
        raise DomainError("c", f"diffusion approximation needs 0 <= c < 1, got {c!r}")
    if not (math.isfinite(a) and a > 0):
        raise DomainError("a", f"start level must be positive, got {a!r}")
    drift = 1.0 - c
    return InverseGaussianParams(mean=a / drift, shape=a * a, start_level=a, drift=drift)


def start_level(params: ModelParams, corrected: bool, sol: UndershootSolution | None = None) -> float:
    """Start level of the approximating Brownian motion."""
    validate(params, require_stable=True)
    if not corrected:
        return params.x0
    if sol is not None:
        if sol.c != params.c:
            raise DomainError("sol", f"solution is for c={sol.c}, params have c={params.c}")
        return params.x0 + evaluate(sol, params.x0)
    return params.x0 + expected_undershoot(params.c, params.x0)


def confirm_cdf(params: ModelParams, t, corrected: bool = True, sol: UndershootSolution | None = None):
    """Approximate P(tau <= t), time in mean block intervals.

    ``t = 0`` maps to 0.  An uncorrected start at ``x0 = 0`` is degenerate:
    the Brownian motion leaves immediately, so the CDF is 1 for every t > 0.
    """
    a = start_level(params, corrected, sol)
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t) & ~(t == np.inf)) or np.any(t < 0):
        raise DomainError("t", "must be >= 0")
    if a == 0.0:
        out = np.where(t > 0, 1.0, 0.0)
    else:
        ig = hitting_params(params.c, a)
        out = np.where(np.isinf(t), 1.0, 0.0)
        pos = (t > 0) & np.isfinite(t)
        if np.any(pos):
            out[pos] = ig_cdf(t[pos], ig)
    return float(out) if out.ndim == 0 else out


def confirm_quantile(prob: float, params: ModelParams, corrected: bool = True, sol: UndershootSolution | None = None) -> float:
    a = start_level(params, corrected, sol)
    if a == 0.0:
        return 0.0
    return ig_quantile(prob, hitting_params(params.c, a))
