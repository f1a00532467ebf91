"""One-dimensional Stein-equation solver and regularity/identity checks.

For the limiting generator A g = b g' + (sigma^2/2) g'' the equation

    A f = h - nu(h)

is solved by quadrature against the explicit stationary density
p ~ sigma^{-2} exp(int 2b/sigma^2): multiplying by p turns the generator
into an exact derivative, giving the integrating-factor formula

    f'(x) = 2 / (sigma^2(x) p(x)) * int_{-R}^x (h - nu(h)) p du.

f'' then follows algebraically from the equation itself and f''' from its
derivative.  All integrals use cumulative Simpson on a uniform grid; nu(h)
is defined through the same quadrature so the integrand integrates to zero
across the full domain exactly, which pins the decaying solution.

The quadrature degrades where p underflows relative to interior values, so
the working domain is chosen deep enough (see ``default_domain_radius``)
and a boundary layer of one tenth of the radius is excluded from every
sup-norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson

from .ergodic import EmpiricalMeasure, chain_mean_se
from .exceptions import DomainError
from .models import ModelSpec, TestFunction

__all__ = [
    "Density1D",
    "SteinSolution1D",
    "default_domain_radius",
    "invariant_density_1d",
    "nu_expectation",
    "solve_stein_1d",
    "GrowthReport",
    "verify_regularity_growth",
    "LogModulusResult",
    "hessian_log_modulus_check",
    "IdentityCheckResult",
    "stationary_identity_check",
    "RemainderCheckResult",
    "stein_remainder_check",
]

DEFAULT_GRID = 2**19 + 1
BOUNDARY_LAYER = 0.1  # fraction of the radius excluded from sup-norms
_TAIL_GAP = 28.0      # required log-density drop across the boundary layer


# --------------------------------------------------------------------------
# stationary density
# --------------------------------------------------------------------------

def default_domain_radius(spec: ModelSpec) -> float:
    """Quadrature domain half-width.

    Two requirements: the dissipativity envelope must put the boundary
    log-density at least 40 max(1, ||sigma||^2) below scale (tail mass), and
    the drop across the excluded boundary layer itself must exceed
    ``_TAIL_GAP`` so that missing-tail contamination of f' stays far below
    the advertised residual tolerances.  The envelope used is the slowest
    admissible decay, log p(x) <= const + (2/||sigma||^2)(c1 ln|x| - c2 x^2 / 2).
    """
    c1, c2 = spec.dissipative_c1, spec.dissipative_c2
    s2 = spec.sigma_sup**2
    r_mass = math.sqrt((c1 + 40.0 * max(1.0, s2)) / c2)

    def depth(u: float) -> float:
        return (2.0 / s2) * (c2 * u * u / 2.0 - c1 * math.log(max(u, 1.0)))

    lo, hi = 1.0, 1e4
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if depth(mid) - depth((1.0 - BOUNDARY_LAYER) * mid) >= _TAIL_GAP:
            hi = mid
        else:
            lo = mid
    return max(r_mass, hi)


@dataclass
class Density1D:
    """Normalized stationary density of the limiting SDE on a uniform grid."""

    grid: np.ndarray
    values: np.ndarray
    log_unnorm: np.ndarray
    norm_const: float

    def __post_init__(self):
        total = float(np.trapezoid(self.values, self.grid))
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"density normalization off by {total - 1.0:.2e}")
        if np.any(self.values < 0):
            raise ValueError("density must be nonnegative")

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])


def invariant_density_1d(
    spec: ModelSpec, radius: Optional[float] = None, n_grid: int = DEFAULT_GRID
) -> Density1D:
    """Stationary Fokker-Planck density p ~ sigma^{-2} exp(int 2b/sigma^2)."""
    spec._require_1d()
    R = default_domain_radius(spec) if radius is None else float(radius)
    if n_grid % 2 == 0:
        n_grid += 1  # keep a grid point exactly at the origin
    x = np.linspace(-R, R, n_grid)
    b = spec.drift_1d(x)
    s2 = spec.sigma_1d(x) ** 2
    integrand = 2.0 * b / s2
    ell = cumulative_simpson(integrand, x=x, initial=0.0)
    i0 = n_grid // 2
    ell = ell - ell[i0]
    logp = ell - np.log(s2)
    peak = float(logp.max())
    logp -= peak

    # integrability: the log-density must fall far below its peak by the edge
    edge = max(logp[0], logp[-1])
    if edge > -30.0:
        raise DomainError(
            f"stationary density does not decay on [-{R:g}, {R:g}] "
            f"(edge log-density {edge:.1f}); the drift may not be integrable "
            "or the radius is too small"
        )
    # floor far below any mass that matters but above exp underflow, so the
    # integrating-factor division stays finite on extended domains; the
    # affected region carries < 1e-290 of probability
    logp = np.maximum(logp, -700.0)
    p_un = np.exp(logp)
    Z = float(cumulative_simpson(p_un, x=x, initial=0.0)[-1])
    if not np.isfinite(Z) or Z <= 0:
        raise DomainError("density normalization diverged")
    p = p_un / Z

    # Mills-ratio tail estimate from the dissipativity envelope
    for j in (0, -1):
        slope = abs(2.0 * b[j] / s2[j])
        tail = p[j] / max(slope, 1e-12)
        if tail > 1e-10:
            raise DomainError(
                f"estimated tail mass {tail:.2e} beyond x={x[j]:g} exceeds 1e-10; "
                "increase the domain radius"
            )
    return Density1D(grid=x, values=p, log_unnorm=logp + peak, norm_const=Z * math.exp(peak))


def nu_expectation(dens: Density1D, h: TestFunction) -> float:
    """Quadrature expectation of h against the stationary density."""
    hv = np.asarray(h.h(dens.grid), dtype=float)
    if not np.all(np.isfinite(hv)):
        raise ValueError("test function returned non-finite values on the grid")
    return float(cumulative_simpson(hv * dens.values, x=dens.grid, initial=0.0)[-1])


# --------------------------------------------------------------------------
# Stein solution
# --------------------------------------------------------------------------

def _deriv4(y: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order central first derivative; one-sided ends are second order.

    Only interior values matter for the sup-norms; the boundary layer is
    excluded anyway.
    """
    out = np.empty_like(y)
    out[2:-2] = (-y[4:] + 8.0 * y[3:-1] - 8.0 * y[1:-3] + y[:-4]) / (12.0 * dx)
    out[:2] = np.gradient(y[:4], dx)[:2]
    out[-2:] = np.gradient(y[-4:], dx)[-2:]
    return out


@dataclass
class SteinSolution1D:
    """Grid solution f (with three derivatives) of A f = h - nu(h)."""

    grid: np.ndarray
    f: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    nu_h: float
    h: TestFunction
    dens: Density1D
    interior: np.ndarray  # mask: boundary layer excluded
    meta: dict = field(default_factory=dict)

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def residual(self) -> np.ndarray:
        """b f' + (sigma^2/2) D[f'] - (h - nu(h)) on the interior grid.

        D[f'] is an independent finite-difference derivative of the
        quadrature f', so this genuinely measures solver error; with the
        algebraic f'' the identity would be a tautology.
        """
        b = self.meta["b"]
        s2 = self.meta["s2"]
        htil = self.meta["htilde"]
        f2num = _deriv4(self.f1, self.dx)
        res = b * self.f1 + 0.5 * s2 * f2num - htil
        return res[self.interior]

    def residual_sup(self) -> float:
        return float(np.max(np.abs(self.residual())))

    def derivative_consistency(self) -> dict:
        """Sup mismatch between numerical derivatives and the algebraic chain."""
        dx = self.dx
        inn = self.interior
        return {
            "f1_vs_dfdx": float(np.max(np.abs(_deriv4(self.f, dx) - self.f1)[inn])),
            "f2_vs_df1dx": float(np.max(np.abs(_deriv4(self.f1, dx) - self.f2)[inn])),
            "f3_vs_df2dx": float(np.max(np.abs(_deriv4(self.f2, dx) - self.f3)[inn])),
        }

    def interp(self, which: str, x: np.ndarray) -> np.ndarray:
        return np.interp(x, self.grid, getattr(self, which))


def solve_stein_1d(
    spec: ModelSpec,
    dens: Density1D,
    h: TestFunction,
) -> SteinSolution1D:
    """Solve A f = h - nu(h) with f(0) = 0 by the integrating-factor route.

    f'' comes algebraically from the equation and f''' from its derivative,
    using analytic b', sigma' when the model declares them and central
    differences otherwise.
    """
    spec._require_1d()
    x = dens.grid
    p = dens.values
    if np.any(p <= 0):
        raise DomainError("density underflowed to zero on the grid; shrink the domain")
    b = spec.drift_1d(x)
    s = spec.sigma_1d(x)
    s2 = s * s

    hv = np.asarray(h.h(x), dtype=float)
    if not np.all(np.isfinite(hv)):
        raise ValueError("test function returned non-finite values on the grid")
    I_p = cumulative_simpson(p, x=x, initial=0.0)
    I_hp = cumulative_simpson(hv * p, x=x, initial=0.0)
    nu_h = float(I_hp[-1] / I_p[-1])
    htilde = hv - nu_h

    # The prefix integral of htilde * p vanishes at both ends (nu_h is built
    # from the same quadrature), but a single left-anchored accumulation
    # carries bulk-scale roundoff that swamps the tiny tail densities it is
    # divided by.  Accumulating from the nearest end keeps the error
    # relative to the local density scale: left-anchored on the left of the
    # density peak, right-anchored on the right.
    y = htilde * p
    I_left = cumulative_simpson(y, x=x, initial=0.0)
    I_right = cumulative_simpson(y[::-1], x=x, initial=0.0)[::-1]  # int_x^R y du
    split = int(np.argmax(p))
    I = np.where(np.arange(x.size) <= split, I_left, -I_right)

    f1 = 2.0 * I / (s2 * p)
    F = cumulative_simpson(f1, x=x, initial=0.0)
    f = F - F[x.size // 2]  # f(0) = 0
    f2 = 2.0 * (htilde - b * f1) / s2
    db = spec.drift_deriv_1d(x)
    ds = spec.sigma_deriv_1d(x)
    if h.grad is not None:
        dh = np.asarray(h.grad(x), dtype=float)
    else:
        dh = np.gradient(hv, x)
    f3 = 2.0 * (dh - db * f1 - (b + s * ds) * f2) / s2

    R = float(x[-1])
    interior = np.abs(x) <= (1.0 - BOUNDARY_LAYER) * R
    return SteinSolution1D(
        grid=x,
        f=f,
        f1=f1,
        f2=f2,
        f3=f3,
        nu_h=nu_h,
        h=h,
        dens=dens,
        interior=interior,
        meta={
            "radius": R,
            "n_grid": int(x.size),
            "derivs_analytic": spec.has_analytic_derivs,
            "b": b,
            "s2": s2,
            "htilde": htilde,
            "model": spec.name,
        },
    )


# --------------------------------------------------------------------------
# regularity checks
# --------------------------------------------------------------------------

_GROWTH_ORDERS = {"f": 2, "f1": 3, "f2": 4, "f3": 5}


def _growth_ratios(sol: SteinSolution1D) -> dict:
    out = {}
    x = sol.grid[sol.interior]
    for name, order in _GROWTH_ORDERS.items():
        vals = np.abs(getattr(sol, name)[sol.interior]) / (1.0 + np.abs(x) ** order)
        i = int(np.argmax(vals))
        out[name] = (float(vals[i]), float(x[i]))
    return out


@dataclass
class GrowthReport:
    """Polynomial-growth envelopes of f and its derivatives.

    For each derivative order the sup over the interior grid of
    |f^(k)| / (1 + |x|^{k+2}) is reported at the base radius and at 1.5x
    the radius; a sound solution has ratios attained away from the boundary
    and stable (within 20%) under the domain extension.
    """

    radius: float
    sups: dict          # name -> (sup, argmax) at base radius
    sups_extended: dict  # same at 1.5 * radius
    stable: dict        # name -> bool
    attained_interior: dict  # name -> bool
    passed: bool


def verify_regularity_growth(
    spec: ModelSpec,
    h: TestFunction,
    radius: Optional[float] = None,
    n_grid: int = DEFAULT_GRID,
    rel_tol: float = 0.20,
) -> GrowthReport:
    R = default_domain_radius(spec) if radius is None else float(radius)
    sol1 = solve_stein_1d(spec, invariant_density_1d(spec, R, n_grid), h)
    sol2 = solve_stein_1d(spec, invariant_density_1d(spec, 1.5 * R, n_grid), h)
    g1 = _growth_ratios(sol1)
    g2 = _growth_ratios(sol2)
    stable, attained = {}, {}
    tiny = 1e-10
    for name in _GROWTH_ORDERS:
        s1, x1 = g1[name]
        s2, _ = g2[name]
        if max(s1, s2) < tiny:
            stable[name] = True
            attained[name] = True
            continue
        stable[name] = abs(s2 - s1) <= rel_tol * max(s1, tiny)
        attained[name] = abs(x1) <= 0.75 * R
    passed = all(stable.values()) and all(attained.values())
    return GrowthReport(
        radius=R,
        sups=g1,
        sups_extended=g2,
        stable=stable,
        attained_interior=attained,
        passed=passed,
    )


@dataclass
class LogModulusResult:
    """Log-modulus continuity statistic of f'' over pairs within 1/8."""

    sup: float
    sup_refined: float
    stable: bool
    max_separation: float
    spacing: float


def hessian_log_modulus_check(
    sol: SteinSolution1D,
    max_separation: float = 0.125,
    spacing: float = 1.0 / 256.0,
    rel_tol: float = 0.20,
) -> LogModulusResult:
    """sup over interior pairs 0 < |x-y| <= 1/8 of
    |f''(x) - f''(y)| / (|x-y| |ln|x-y|| (1 + min(|x|,|y|)^5)),
    evaluated on a subsampled grid and again at twice the resolution."""
    if spacing > 1.0 / 64.0:
        raise ValueError("pair grid spacing must be <= 1/64")

    def sup_at(h: float) -> float:
        step = max(1, int(round(h / sol.dx)))
        idx = np.flatnonzero(sol.interior)[::step]
        x = sol.grid[idx]
        f2 = sol.f2[idx]
        best = 0.0
        kmax = int(max_separation / (step * sol.dx))
        for k in range(1, kmax + 1):
            sep = k * step * sol.dx
            if sep > max_separation:
                break
            num = np.abs(f2[k:] - f2[:-k])
            base = np.minimum(np.abs(x[k:]), np.abs(x[:-k]))
            denom = sep * abs(math.log(sep)) * (1.0 + base**5)
            best = max(best, float(np.max(num / denom)))
        return best

    sup1 = sup_at(spacing)
    sup2 = sup_at(spacing / 2.0)
    tiny = 1e-10
    stable = abs(sup2 - sup1) <= rel_tol * max(sup1, tiny) or max(sup1, sup2) < tiny
    return LogModulusResult(
        sup=sup1,
        sup_refined=sup2,
        stable=bool(stable),
        max_separation=max_separation,
        spacing=spacing,
    )


# --------------------------------------------------------------------------
# stationary identities against kinetic samples
# --------------------------------------------------------------------------

@dataclass
class IdentityCheckResult:
    orth_mean: float        # E[Y f'(X)]
    orth_se: float
    orth_z: float
    gap_direct: float       # E[h(X)] - nu(h)
    gap_phi: float          # E[(sigma^2/2) f'' - m Y^2 f'']
    diff_mean: float        # per-sample difference of the two sides
    diff_se: float
    diff_z: float
    passed: bool


def stationary_identity_check(
    measure: EmpiricalMeasure, sol: SteinSolution1D, z_max: float = 4.0
) -> IdentityCheckResult:
    """Two equilibrium identities of the kinetic invariant measure.

    (i) E[Y f'(X)] = 0: the generator image of f(x) integrates to zero.
    (ii) E[h(X)] - nu(h) = E[(sigma^2/2) f''(X) - m Y^2 f''(X)]: the
    position-marginal gap equals the kinetic expectation of the Stein-
    transformed observable.  Both are tested at z_max standard errors with
    chain-aware errors; (ii) is tested on the per-sample difference so the
    shared-sample correlation is accounted for.
    """
    if measure.velocities is None:
        raise ValueError("stationary identity checks need velocities")
    m = measure.provenance["m"]
    x = measure.position_1d()
    yv = measure.velocities[:, 0]
    ids = measure.chain_ids

    f1x = sol.interp("f1", x)
    orth_mean, orth_se = chain_mean_se(yv * f1x, ids)
    orth_z = abs(orth_mean) / orth_se if orth_se > 0 else math.inf

    hx = np.asarray(sol.h.h(x), dtype=float)
    f2x = sol.interp("f2", x)
    s2x = np.interp(x, sol.grid, sol.meta["s2"])
    phi = 0.5 * s2x * f2x - m * yv * yv * f2x
    gap_direct, _ = chain_mean_se(hx - sol.nu_h, ids)
    gap_phi, _ = chain_mean_se(phi, ids)
    diff_mean, diff_se = chain_mean_se(hx - sol.nu_h - phi, ids)
    diff_z = abs(diff_mean) / diff_se if diff_se > 0 else math.inf

    return IdentityCheckResult(
        orth_mean=orth_mean,
        orth_se=orth_se,
        orth_z=orth_z,
        gap_direct=gap_direct,
        gap_phi=gap_phi,
        diff_mean=diff_mean,
        diff_se=diff_se,
        diff_z=diff_z,
        passed=bool(orth_z <= z_max and diff_z <= z_max),
    )


@dataclass
class RemainderCheckResult:
    m: float
    gap_direct: float
    gap_direct_se: float
    remainder: float        # -E[(m^2/2) Y^3 f''' + m b(X) f''(X) Y]
    remainder_se: float
    diff_z: float
    passed: bool


def stein_remainder_check(
    measure: EmpiricalMeasure, sol: SteinSolution1D, m: Optional[float] = None,
    z_max: float = 4.0,
) -> RemainderCheckResult:
    """One-dimensional remainder formula for the position-marginal gap.

    nu_m(h) - nu(h) = -E[(m^2/2) Y^3 f'''(X) + m b(X) f''(X) Y]; the direct
    gap estimate and the remainder expression must agree within z_max
    combined standard errors.
    """
    if measure.velocities is None:
        raise ValueError("remainder checks need velocities")
    if m is None:
        m = measure.provenance["m"]
    x = measure.position_1d()
    yv = measure.velocities[:, 0]
    ids = measure.chain_ids

    hx = np.asarray(sol.h.h(x), dtype=float)
    f2x = sol.interp("f2", x)
    f3x = sol.interp("f3", x)
    bx = np.interp(x, sol.grid, sol.meta["b"])
    rem_samples = -(0.5 * m * m * yv**3 * f3x + m * bx * f2x * yv)
    gap_direct, gap_se = chain_mean_se(hx - sol.nu_h, ids)
    remainder, rem_se = chain_mean_se(rem_samples, ids)
    diff_mean, diff_se = chain_mean_se(hx - sol.nu_h - rem_samples, ids)
    diff_z = abs(diff_mean) / diff_se if diff_se > 0 else math.inf
    return RemainderCheckResult(
        m=m,
        gap_direct=gap_direct,
        gap_direct_se=gap_se,
        remainder=remainder,
        remainder_se=rem_se,
        diff_z=diff_z,
        passed=bool(diff_z <= z_max),
    )
