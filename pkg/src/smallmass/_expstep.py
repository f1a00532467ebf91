"""Scalar coefficients of the frozen-coefficient exponential step.

Freezing b and sigma at the step's start turns one step of the kinetic
system over [0, dt] into a linear SDE whose update is exact:

    y <- e^{-r} y + E1 b + S_y,        r = dt/m,  E1 = 1 - e^{-r}
    x <- x + m E1 y + (dt - m E1) b + S_x

with the pair (S_x, S_y) jointly Gaussian.  Writing E2 = 1 - e^{-2r}, the
covariance of (S_x, S_y) is sigma sigma^T times the 2x2 scalar matrix

    c_xx = dt - 2 m E1 + (m/2) E2      (= int (1-e^{-u/m})^2 du)
    c_xy = E1^2 / 2                    (= (1/m) int (1-e^{-u/m}) e^{-u/m} du)
    c_yy = E2 / (2 m)                  (= (1/m^2) int e^{-2u/m} du)

c_xx suffers catastrophic cancellation for r << 1 (it is O(r^3) built from
O(r) terms), so a Taylor branch takes over below a switch point; the same
applies to dt - m E1 = m (r - E1).  Both branches are validated against
high-precision arithmetic in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

_SERIES_SWITCH = 1e-3


def _r_minus_e1(r: float) -> float:
    """r - (1 - e^-r), stable for small r."""
    if r < 1e-2:
        # r^2/2 - r^3/6 + r^4/24 - r^5/120 + r^6/720
        return r * r * (0.5 + r * (-1.0 / 6.0 + r * (1.0 / 24.0 + r * (-1.0 / 120.0 + r / 720.0))))
    return r + math.expm1(-r)


def _cxx_scaled(r: float) -> float:
    """(1/m) * c_xx as a function of r alone: r - 2(1-e^-r) + (1-e^-2r)/2.

    Identical to (r - E1) - E1^2/2, which only loses ~log10(1/r) digits;
    below the switch a Taylor series is exact to working precision.
    """
    if r < _SERIES_SWITCH:
        # r^3/3 - r^4/4 + 7 r^5/60 - r^6/24 + ...
        return r**3 * (1.0 / 3.0 + r * (-0.25 + r * (7.0 / 60.0 - r / 24.0)))
    e1 = -math.expm1(-r)
    return _r_minus_e1(r) - 0.5 * e1 * e1


@dataclass(frozen=True)
class ExpStepCoeffs:
    """Per-(dt, m) constants of the exponential scheme, including the
    Cholesky factor of the shared-noise covariance."""

    dt: float
    m: float
    decay: float  # e^{-dt/m}
    e1: float     # 1 - e^{-dt/m}
    wxb: float    # dt - m * e1
    cxx: float
    cxy: float
    cyy: float
    l11: float
    l21: float
    l22: float


def exp_step_coeffs(dt: float, m: float) -> ExpStepCoeffs:
    if dt <= 0 or m <= 0:
        raise ValueError("dt and m must be positive")
    r = dt / m
    decay = math.exp(-r)
    e1 = -math.expm1(-r)
    e2 = -math.expm1(-2.0 * r)
    cxx = m * _cxx_scaled(r)
    cxy = 0.5 * e1 * e1
    cyy = e2 / (2.0 * m)
    wxb = m * _r_minus_e1(r)
    l11 = math.sqrt(cxx)
    l21 = cxy / l11
    l22 = math.sqrt(max(cyy - l21 * l21, 0.0))
    return ExpStepCoeffs(
        dt=dt, m=m, decay=decay, e1=e1, wxb=wxb,
        cxx=cxx, cxy=cxy, cyy=cyy, l11=l11, l21=l21, l22=l22,
    )
