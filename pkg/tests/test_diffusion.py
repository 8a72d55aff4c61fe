import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from btc_confirm.diffusion import (
    InverseGaussianParams,
    confirm_cdf,
    confirm_quantile,
    hitting_params,
    ig_cdf,
    ig_pdf,
    ig_quantile,
    normal_cdf,
    start_level,
)
from btc_confirm.model import DomainError, ModelParams, StabilityError
from btc_confirm.undershoot import solve

IG_GRID = [(mean, shape) for mean in (0.5, 1.0, 4.0, 27.2806) for shape in (0.2, 1.0, 1.860578, 10.0)]


def ig_cdf_by_quadrature(t, p):
    """Integrate the density on a subdivided interval around its mode."""
    mu, lam = p.mean, p.shape
    mode = mu * (math.sqrt(1 + (1.5 * mu / lam) ** 2) - 1.5 * mu / lam)
    pts = sorted({x for x in (mode / 4, mode / 2, mode, 2 * mode, 4 * mode) if 0 < x < t})
    val, _ = integrate.quad(lambda s: ig_pdf(s, p), 0.0, t, points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def test_normal_cdf_values():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(math.inf) == 1.0
    assert normal_cdf(-math.inf) == 0.0
    oracle = float(mpmath.quad(lambda z: mpmath.npdf(z), [-mpmath.inf, 0, 1.96]))
    assert normal_cdf(1.96) == pytest.approx(oracle, abs=1e-15)
    assert normal_cdf(1.96) == pytest.approx(0.9750021, abs=1e-7)


def test_normal_cdf_lower_tail_is_relative_accurate():
    oracle = float(mpmath.ncdf(-30))
    assert normal_cdf(-30.0) == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("mean,shape", IG_GRID)
def test_ig_cdf_against_density_integration(mean, shape):
    p = InverseGaussianParams(mean, shape)
    for t in (0.05, 0.3, 1.0, 3.0, 10.0, 50.0, 200.0):
        assert abs(ig_cdf(t, p) - ig_cdf_by_quadrature(t, p)) <= 1e-8


def test_ig_cdf_reference_point():
    p = InverseGaussianParams(1.0, 1.0)
    assert ig_cdf(1.0, p) == pytest.approx(0.668, abs=5e-4)


def test_ig_cdf_limits():
    p = InverseGaussianParams(2.0, 3.0)
    assert ig_cdf(1e-6, p) == pytest.approx(0.0, abs=1e-300)
    assert ig_cdf(1e6, p) == 1.0
    with pytest.raises(DomainError):
        ig_cdf(0.0, p)


def test_ig_cdf_no_overflow_for_large_ratio():
    # exp(2 shape / mean) = exp(2000) overflows unless combined in log space
    p = InverseGaussianParams(1.0, 1000.0)
    v = ig_cdf(np.array([0.9, 1.0, 1.1]), p)
    assert np.all(np.isfinite(v))
    assert v[1] == pytest.approx(ig_cdf_by_quadrature(1.0, p), abs=1e-8)


@settings(deadline=None)
@given(mean=st.floats(0.1, 50), shape=st.floats(0.05, 50), t=st.floats(0.01, 100), h=st.floats(1e-3, 5))
def test_ig_cdf_monotone(mean, shape, t, h):
    p = InverseGaussianParams(mean, shape)
    a, b = ig_cdf(t, p), ig_cdf(t + h, p)
    assert 0.0 <= a <= b <= 1.0


@pytest.mark.parametrize("mean,shape", IG_GRID)
def test_ig_derivative_matches_density(mean, shape):
    p = InverseGaussianParams(mean, shape)
    ts = np.geomspace(0.2 * mean, 3 * mean, 9)
    h = 1e-5 * ts
    fd = (ig_cdf(ts + h, p) - ig_cdf(ts - h, p)) / (2 * h)
    dens = ig_pdf(ts, p)
    ok = dens > 1e-6
    assert np.allclose(fd[ok], dens[ok], rtol=1e-6, atol=0)


@pytest.mark.parametrize("mean,shape", IG_GRID)
def test_ig_mean_by_quadrature(mean, shape):
    p = InverseGaussianParams(mean, shape)
    m, _ = integrate.quad(lambda s: s * ig_pdf(s, p), 0, np.inf, limit=400, epsrel=1e-10)
    assert m == pytest.approx(mean, rel=1e-6)


@pytest.mark.parametrize("mean,shape", IG_GRID)
@pytest.mark.parametrize("prob", [1e-6, 0.05, 0.5, 0.95, 0.999])
def test_quantile_round_trip(mean, shape, prob):
    p = InverseGaussianParams(mean, shape)
    assert ig_cdf(ig_quantile(prob, p), p) == pytest.approx(prob, abs=1e-10)


def test_quantile_small_probability_tends_to_zero():
    p = InverseGaussianParams(1.0, 1.0)
    assert ig_quantile(1e-12, p) < ig_quantile(1e-6, p) < 0.1


def test_median_below_mean():
    p = InverseGaussianParams(1.0, 1.0)
    med = ig_quantile(0.5, p)
    assert med < 1.0
    assert ig_cdf_by_quadrature(med, p) == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize(
    "c,a,mean,shape",
    [(0.0, 1.0, 1.0, 1.0), (0.95, 1.36403, 27.2806, 1.860578), (0.5, 2.0, 4.0, 4.0)],
)
def test_hitting_params(c, a, mean, shape):
    p = hitting_params(c, a)
    assert p.mean == pytest.approx(mean, rel=1e-12)
    assert p.shape == pytest.approx(shape, rel=1e-6)
    assert p.mean * (1 - c) == pytest.approx(a, rel=1e-15)


@settings(deadline=None)
@given(c=st.floats(0, 0.999), a=st.floats(1e-3, 100))
def test_hitting_params_scaling(c, a):
    assert hitting_params(c, a).mean * (1 - c) == pytest.approx(a, rel=1e-15)


@pytest.mark.parametrize("a", [0.0, -1.0])
def test_hitting_params_rejects_level(a):
    with pytest.raises(DomainError):
        hitting_params(0.5, a)


def test_unit_rate_is_excluded():
    with pytest.raises(DomainError):
        hitting_params(1.0, 1.0)
    with pytest.raises(StabilityError):
        confirm_cdf(ModelParams(1.0, 1.0), 1.0)


def test_corrected_start_levels():
    assert start_level(ModelParams(0.95, 1.0), True) == pytest.approx(1.36403, abs=5e-5)
    assert start_level(ModelParams(0.25, 1.0), True) == pytest.approx(1.57833, abs=5e-5)
    assert start_level(ModelParams(0.25, 1.0), False) == 1.0


def test_start_level_solution_mismatch():
    with pytest.raises(DomainError):
        start_level(ModelParams(0.5, 1.0), True, solve(0.25))


def test_no_inflow_from_zero():
    # corrected start is E S_0 = 1, so the law is IG(1, 1); the exact answer is Exp(1)
    v = confirm_cdf(ModelParams(0.0, 0.0), 1.0, corrected=True)
    assert v == pytest.approx(ig_cdf(1.0, InverseGaussianParams(1.0, 1.0)), abs=1e-15)
    assert v == pytest.approx(0.668, abs=5e-4)
    assert abs(v - (1 - math.exp(-1))) > 0.03


def test_degenerate_uncorrected_zero_start():
    p = ModelParams(0.5, 0.0)
    assert confirm_cdf(p, 0.0, corrected=False) == 0.0
    assert confirm_cdf(p, 1e-9, corrected=False) == 1.0
    assert confirm_quantile(0.5, p, corrected=False) == 0.0


def test_confirm_cdf_endpoints():
    p = ModelParams(0.5, 1.0)
    v = confirm_cdf(p, np.array([0.0, np.inf]))
    assert v.tolist() == [0.0, 1.0]
    with pytest.raises(DomainError):
        confirm_cdf(p, -1.0)


@pytest.mark.parametrize("c", [0.25, 0.5, 0.95])
def test_corrected_below_uncorrected(c):
    p = ModelParams(c, 1.0)
    t = np.linspace(0, 200, 2001)
    assert np.all(confirm_cdf(p, t, corrected=True) <= confirm_cdf(p, t, corrected=False))


def test_confirm_quantile_round_trip():
    p = ModelParams(0.95, 1.0)
    sol = solve(0.95)
    for prob in (0.1, 0.5, 0.9):
        t = confirm_quantile(prob, p, sol=sol)
        assert confirm_cdf(p, t, sol=sol) == pytest.approx(prob, abs=1e-10)
