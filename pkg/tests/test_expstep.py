"""Exponential-step coefficients against high-precision arithmetic."""
import mpmath as mp
import numpy as np
import pytest

from smallmass._expstep import exp_step_coeffs

mp.mp.dps = 50


def _exact(dt, m):
    dt, m = mp.mpf(dt), mp.mpf(m)
    r = dt / m
    e1 = 1 - mp.e**-r
    e2 = 1 - mp.e**(-2 * r)
    cxx = dt - 2 * m * e1 + m / 2 * e2
    cxy = e1**2 / 2
    cyy = e2 / (2 * m)
    wxb = dt - m * e1
    return [float(v) for v in (mp.e**-r, e1, wxb, cxx, cxy, cyy)]


@pytest.mark.parametrize("r", [1e-10, 1e-6, 1e-3, 9e-3, 1.1e-2, 0.1, 0.2, 1.0, 5.0, 50.0, 1e4])
@pytest.mark.parametrize("m", [1e-6, 0.01, 0.3, 1.0])
def test_coefficients_match_high_precision(r, m):
    dt = r * m
    co = exp_step_coeffs(dt, m)
    exact = _exact(dt, m)
    got = [co.decay, co.e1, co.wxb, co.cxx, co.cxy, co.cyy]
    for g, e in zip(got, exact):
        assert g == pytest.approx(e, rel=1e-11, abs=1e-300)


@pytest.mark.parametrize("r", [1e-8, 1e-3, 0.2, 2.0, 200.0])
def test_cholesky_reconstructs_covariance(r):
    co = exp_step_coeffs(r * 0.05, 0.05)
    assert co.l11**2 == pytest.approx(co.cxx, rel=1e-12)
    assert co.l11 * co.l21 == pytest.approx(co.cxy, rel=1e-12)
    assert co.l21**2 + co.l22**2 == pytest.approx(co.cyy, rel=1e-12)
    # the joint covariance is strictly positive definite for r > 0
    assert co.l22 > 0


def test_rejects_nonpositive_arguments():
    with pytest.raises(ValueError):
        exp_step_coeffs(0.0, 1.0)
    with pytest.raises(ValueError):
        exp_step_coeffs(0.1, -1.0)


def test_small_mass_limit_matches_euler_maruyama():
    # as m -> 0 the position noise variance approaches dt (the limit SDE's)
    co = exp_step_coeffs(1e-2, 1e-8)
    assert co.cxx == pytest.approx(1e-2, rel=1e-5)
    assert co.cxy == pytest.approx(0.5, rel=1e-6)
    assert co.cyy == pytest.approx(1.0 / (2e-8), rel=1e-6)
