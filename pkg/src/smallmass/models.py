"""Diffusion model specifications, assumption validation, and generators.

A model is the pair (b, sigma) of a second-order ("kinetic") system

    dX = Y dt,    m dY = b(X) dt + sigma(X) dB - Y dt,

and of its zero-mass limit

    dX = b(X) dt + sigma(X) dB.

The standing structural conditions are Lipschitz coefficients, uniform
ellipticity with a uniform bound on ||sigma||, and an inward-drift
(dissipativity) condition <x, b(x)> <= c1 - c2 |x|^2.  Constants are
declared by the caller and verified by sampling; estimating tight constants
would be global optimization and is out of scope.

Array conventions: positions are arrays of shape (..., d); ``drift`` maps
(..., d) -> (..., d) and ``diffusion`` maps (..., d) -> (..., d, d).  When
the noise is isotropic, sigma(x) = s(x) * I, the scalar field s is also
exposed as ``sigma_scalar`` mapping (..., d) -> (...,); the simulation
backends exploit it.  The one-dimensional derivative accessors
(``drift_deriv``, ``sigma_scalar_deriv``) act on plain scalar arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import ModelEvaluationError
from . import rng as _rng

__all__ = [
    "ModelSpec",
    "KineticState",
    "LimitState",
    "TestFunction",
    "KernelModel",
    "ProbePlan",
    "ValidationReport",
    "validate_model",
    "lyapunov_vm",
    "lyapunov_vm_values",
    "kinetic_lyapunov_drift_values",
    "generator_kinetic_apply",
    "generator_limit_apply",
    "admissible_mass_bound",
    "make_model",
    "MODEL_FAMILIES",
    "TEST_FUNCTIONS",
    "make_test_function",
]


# --------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelModel:
    """Registry handle that lets compiled kernels evaluate a model natively."""

    family_id: int
    params: tuple[float, ...]


@dataclass(frozen=True)
class ModelSpec:
    """A diffusion model plus its declared assumption constants."""

    dimension: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    lipschitz_L: float
    growth_Lb: float
    ellipticity_sigma0: float
    dissipative_c1: float
    dissipative_c2: float
    sigma_sup: float
    # isotropic shortcut sigma(x) = sigma_scalar(x) * I, used by fast backends
    sigma_scalar: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # d = 1 analytic derivatives b'(x), sigma'(x) on scalar arrays;
    # central differences are used when absent
    drift_deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sigma_scalar_deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    gradient_drift: bool = False
    constant_diffusion: bool = False
    kernel: Optional[KernelModel] = None
    name: str = "custom"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        for fname in ("ellipticity_sigma0", "dissipative_c2", "sigma_sup"):
            if getattr(self, fname) <= 0:
                raise ValueError(f"{fname} must be positive")
        for fname in ("lipschitz_L", "growth_Lb", "dissipative_c1"):
            if getattr(self, fname) < 0:
                raise ValueError(f"{fname} must be nonnegative")

    # -- d = 1 scalar accessors -------------------------------------------
    def _require_1d(self):
        if self.dimension != 1:
            raise ValueError(f"operation requires a 1-d model, got d={self.dimension}")

    def drift_1d(self, x: np.ndarray) -> np.ndarray:
        self._require_1d()
        x = np.asarray(x, dtype=float)
        return np.asarray(self.drift(x[..., None]), dtype=float)[..., 0]

    def sigma_1d(self, x: np.ndarray) -> np.ndarray:
        self._require_1d()
        x = np.asarray(x, dtype=float)
        if self.sigma_scalar is not None:
            s = np.asarray(self.sigma_scalar(x[..., None]), dtype=float)
            return np.broadcast_to(s, x.shape).copy()
        return np.asarray(self.diffusion(x[..., None]), dtype=float)[..., 0, 0]

    def drift_deriv_1d(self, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
        """b'(x); analytic when declared, else central differences."""
        self._require_1d()
        x = np.asarray(x, dtype=float)
        if self.drift_deriv is not None:
            return np.asarray(self.drift_deriv(x), dtype=float)
        return (self.drift_1d(x + h) - self.drift_1d(x - h)) / (2 * h)

    def sigma_deriv_1d(self, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
        """sigma'(x); analytic when declared, else central differences."""
        self._require_1d()
        x = np.asarray(x, dtype=float)
        if self.sigma_scalar_deriv is not None:
            return np.asarray(self.sigma_scalar_deriv(x), dtype=float)
        return (self.sigma_1d(x + h) - self.sigma_1d(x - h)) / (2 * h)

    @property
    def has_analytic_derivs(self) -> bool:
        return self.drift_deriv is not None and self.sigma_scalar_deriv is not None

    def provenance(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "constants": {
                "lipschitz_L": self.lipschitz_L,
                "growth_Lb": self.growth_Lb,
                "ellipticity_sigma0": self.ellipticity_sigma0,
                "dissipative_c1": self.dissipative_c1,
                "dissipative_c2": self.dissipative_c2,
                "sigma_sup": self.sigma_sup,
            },
        }


@dataclass
class KineticState:
    """Phase-space point of the second-order system."""

    x: np.ndarray
    y: np.ndarray
    m: float

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if self.m <= 0:
            raise ValueError("mass m must be positive")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("state coordinates must be finite")
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have identical shapes")


@dataclass
class LimitState:
    """Position-only state of the limiting first-order system."""

    x: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if not np.all(np.isfinite(self.x)):
            raise ValueError("state coordinates must be finite")


@dataclass(frozen=True)
class TestFunction:
    """A scalar test observable h with optional derivative data.

    ``lipschitz_bound <= 1`` together with ``zero_at_origin`` declares
    membership in the unit-Lipschitz class pinned at the origin over which
    the dual form of the 1-Wasserstein distance ranges.
    """

    __test__ = False  # not a pytest class despite the name

    h: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_bound: float = 1.0
    zero_at_origin: bool = True
    name: str = "h"

    def check_membership(self, points: np.ndarray, tol: float = 1e-9) -> bool:
        """Sampled verification of |h(x)-h(y)| <= bound*|x-y| and h(0)=0."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            vals = np.asarray(self.h(pts), dtype=float)
            dist = np.abs(np.diff(pts))
            zero = float(np.asarray(self.h(np.zeros(1))).ravel()[0])
        else:
            vals = np.asarray(self.h(pts), dtype=float)
            dist = np.linalg.norm(np.diff(pts, axis=0), axis=-1)
            zero = float(np.asarray(self.h(np.zeros((1, pts.shape[1])))).ravel()[0])
        ok = bool(np.all(np.abs(np.diff(vals)) <= self.lipschitz_bound * dist + tol))
        if self.zero_at_origin:
            ok = ok and abs(zero) <= tol
        return ok


# --------------------------------------------------------------------------
# Lyapunov function and generators
# --------------------------------------------------------------------------

def lyapunov_vm(state: KineticState) -> float:
    """Quadratic Lyapunov function 2|x|^2 + 6 m^2 |y|^2 + 4 m <x, y>."""
    return float(lyapunov_vm_values(state.x, state.y, state.m))


def lyapunov_vm_values(x: np.ndarray, y: np.ndarray, m: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (
        2.0 * np.sum(x * x, axis=-1)
        + 6.0 * m * m * np.sum(y * y, axis=-1)
        + 4.0 * m * np.sum(x * y, axis=-1)
    )


def _hs_norm_sq(spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    """||sigma(x)||_HS^2 as a field over positions of shape (..., d)."""
    if spec.sigma_scalar is not None:
        s = np.asarray(spec.sigma_scalar(x), dtype=float)
        return spec.dimension * np.broadcast_to(s * s, x.shape[:-1]).copy()
    sig = np.asarray(spec.diffusion(x), dtype=float)
    return np.sum(sig * sig, axis=(-2, -1))


def kinetic_lyapunov_drift_values(spec: ModelSpec, x: np.ndarray, y: np.ndarray, m: float) -> np.ndarray:
    """Closed form of the kinetic generator applied to the Lyapunov function.

    Expands to -8m|y|^2 + 12m<b(x),y> + 4<b(x),x> + 6||sigma(x)||_HS^2; the
    tests cross-check it against the generic generator application.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b = np.asarray(spec.drift(x), dtype=float)
    return (
        -8.0 * m * np.sum(y * y, axis=-1)
        + 12.0 * m * np.sum(b * y, axis=-1)
        + 4.0 * np.sum(b * x, axis=-1)
        + 6.0 * _hs_norm_sq(spec, x)
    )


def _fd_step(state_norm: float) -> float:
    return 1e-5 * (1.0 + state_norm)


def _fd_grad(f: Callable[[np.ndarray], float], z: np.ndarray, h: float) -> np.ndarray:
    g = np.empty_like(z)
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        g[i] = (f(zp) - f(zm)) / (2 * h)
    return g


def _fd_hess(f: Callable[[np.ndarray], float], z: np.ndarray, h: float) -> np.ndarray:
    d = z.size
    H = np.empty((d, d))
    f0 = f(z)
    for i in range(d):
        for j in range(i, d):
            if i == j:
                zp, zm = z.copy(), z.copy()
                zp[i] += h
                zm[i] -= h
                H[i, i] = (f(zp) - 2 * f0 + f(zm)) / (h * h)
            else:
                zpp, zpm, zmp, zmm = z.copy(), z.copy(), z.copy(), z.copy()
                zpp[i] += h
                zpp[j] += h
                zpm[i] += h
                zpm[j] -= h
                zmp[i] -= h
                zmp[j] += h
                zmm[i] -= h
                zmm[j] -= h
                H[i, j] = H[j, i] = (f(zpp) - f(zpm) - f(zmp) + f(zmm)) / (4 * h * h)
    return H


def generator_kinetic_apply(
    spec: ModelSpec,
    g: Callable[[np.ndarray, np.ndarray], float],
    state: KineticState,
    *,
    grad_x: Optional[Callable] = None,
    grad_y: Optional[Callable] = None,
    hess_yy: Optional[Callable] = None,
) -> float:
    """Apply the kinetic generator to a scalar observable g(x, y).

    Returns <y, grad_x g> + (1/m) <b(x)-y, grad_y g>
    + (1/(2 m^2)) <sigma sigma^T, hess_yy g>_HS.  Derivatives not supplied
    analytically fall back to central differences with step
    1e-5 * (1 + |state|).
    """
    x, y, m = state.x, state.y, state.m
    h = _fd_step(float(np.sqrt(np.sum(x * x) + np.sum(y * y))))
    gx = np.asarray(grad_x(x, y), dtype=float) if grad_x else _fd_grad(lambda u: g(u, y), x.copy(), h)
    gy = np.asarray(grad_y(x, y), dtype=float) if grad_y else _fd_grad(lambda v: g(x, v), y.copy(), h)
    gyy = np.asarray(hess_yy(x, y), dtype=float) if hess_yy else _fd_hess(lambda v: g(x, v), y.copy(), h)
    if not (np.all(np.isfinite(gx)) and np.all(np.isfinite(gy)) and np.all(np.isfinite(gyy))):
        raise ModelEvaluationError(f"non-finite derivative of observable at x={x}, y={y}")
    b = np.asarray(spec.drift(x[None, :]), dtype=float)[0]
    sig = np.asarray(spec.diffusion(x[None, :]), dtype=float)[0]
    a = sig @ sig.T
    val = (
        float(y @ gx)
        + float((b - y) @ gy) / m
        + 0.5 * float(np.sum(a * gyy)) / (m * m)
    )
    if not np.isfinite(val):
        raise ModelEvaluationError(f"non-finite generator value at x={x}, y={y}")
    return val


def generator_limit_apply(
    spec: ModelSpec,
    g: Callable[[np.ndarray], float],
    state: LimitState,
    *,
    grad: Optional[Callable] = None,
    hess: Optional[Callable] = None,
) -> float:
    """Apply the limiting generator: <b, grad g> + (1/2) <sigma sigma^T, hess g>_HS."""
    x = state.x
    h = _fd_step(float(np.linalg.norm(x)))
    gx = np.asarray(grad(x), dtype=float) if grad else _fd_grad(g, x.copy(), h)
    gxx = np.asarray(hess(x), dtype=float) if hess else _fd_hess(g, x.copy(), h)
    if not (np.all(np.isfinite(gx)) and np.all(np.isfinite(gxx))):
        raise ModelEvaluationError(f"non-finite derivative of observable at x={x}")
    b = np.asarray(spec.drift(x[None, :]), dtype=float)[0]
    sig = np.asarray(spec.diffusion(x[None, :]), dtype=float)[0]
    a = sig @ sig.T
    val = float(b @ gx) + 0.5 * float(np.sum(a * gxx))
    if not np.isfinite(val):
        raise ModelEvaluationError(f"non-finite generator value at x={x}")
    return val


def admissible_mass_bound(spec: ModelSpec, one_dimensional_rate: bool = True) -> float:
    """Largest mass the ergodic/rate machinery is stated for.

    min{c2/(2 Lb), 2/c2, 1}; the general-dimension rate statement tightens
    the final cap to 1/e.
    """
    cap = 1.0 if one_dimensional_rate else 1.0 / math.e
    return min(spec.dissipative_c2 / (2.0 * spec.growth_Lb), 2.0 / spec.dissipative_c2, cap)


# --------------------------------------------------------------------------
# assumption validation by sampling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbePlan:
    """Sampling plan for assumption validation."""

    radius: float = 20.0
    count: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("probe count must be >= 1")
        if self.radius <= 0:
            raise ValueError("probe radius must be positive")


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    margin: float  # max over probes of (lhs - rhs); <= 0 means satisfied
    witness: np.ndarray
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[AssumptionCheck, ...]
    probe: ProbePlan

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self):
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            w = np.array2string(c.witness, precision=4)
            lines.append(f"{c.name:14s} {status}  worst margin {c.margin:+.3e} at {w}")
        return "\n".join(lines)


VIOLATION_TOL = 1e-12


def probe_points(d: int, radius: float, count: int, seed: int) -> np.ndarray:
    """Uniform draws in the ball of given radius plus deterministic axis points."""
    gen = _rng.generator(seed, _rng.DOMAIN_PROBE)
    z = gen.standard_normal((count, d))
    z /= np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-300)
    r = radius * gen.random(count) ** (1.0 / d)
    pts = z * r[:, None]
    axes = [np.zeros(d)]
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        axes += [radius * e, -radius * e, 0.5 * radius * e, -0.5 * radius * e]
    return np.vstack([pts, np.array(axes)])


def validate_model(spec: ModelSpec, probe: ProbePlan = ProbePlan()) -> ValidationReport:
    """Check the declared assumption constants on sampled probe points.

    Each check reports the worst observed violation margin (a positive
    margin means the declared inequality failed at the witness point).
    Passing is necessary, not sufficient: probes sample a ball, they do not
    prove global validity.
    """
    d = spec.dimension
    pts = probe_points(d, probe.radius, probe.count, probe.seed)
    b = np.asarray(spec.drift(pts), dtype=float)
    sig = np.asarray(spec.diffusion(pts), dtype=float)
    if not np.all(np.isfinite(b)):
        bad = pts[~np.all(np.isfinite(b), axis=-1)][0]
        raise ModelEvaluationError(f"drift returned a non-finite value at x={bad}")
    if not np.all(np.isfinite(sig)):
        bad = pts[~np.all(np.isfinite(sig), axis=(-2, -1))][0]
        raise ModelEvaluationError(f"diffusion returned a non-finite value at x={bad}")

    checks = []

    # Lipschitz condition on consecutive sampled pairs
    dist = np.linalg.norm(pts[:-1] - pts[1:], axis=1)
    keep = dist > 1e-12
    num = (
        np.linalg.norm(b[:-1] - b[1:], axis=1)
        + np.linalg.norm(sig[:-1] - sig[1:], axis=(1, 2))
    )
    lip_margin = num[keep] - spec.lipschitz_L * dist[keep]
    checks.append(_mk_check("lipschitz", lip_margin, pts[:-1][keep]))

    # linear growth of the drift
    growth_margin = np.sum(b * b, axis=1) - spec.growth_Lb * (1.0 + np.sum(pts * pts, axis=1))
    checks.append(_mk_check("drift_growth", growth_margin, pts))

    # uniform ellipticity and the sup bound on sigma
    a = sig @ np.swapaxes(sig, -1, -2)
    lam_min = np.linalg.eigvalsh(a)[:, 0]
    checks.append(_mk_check("ellipticity", spec.ellipticity_sigma0 - lam_min, pts))
    sup_margin = np.linalg.norm(sig, axis=(1, 2)) - spec.sigma_sup
    checks.append(_mk_check("sigma_sup", sup_margin, pts))

    # dissipativity
    dis_margin = (
        np.sum(pts * b, axis=1)
        - spec.dissipative_c1
        + spec.dissipative_c2 * np.sum(pts * pts, axis=1)
    )
    checks.append(_mk_check("dissipativity", dis_margin, pts))

    return ValidationReport(checks=tuple(checks), probe=probe)


def _mk_check(name: str, margins: np.ndarray, points: np.ndarray) -> AssumptionCheck:
    i = int(np.argmax(margins))
    worst = float(margins[i])
    return AssumptionCheck(name=name, margin=worst, witness=np.array(points[i]), passed=worst <= VIOLATION_TOL)


# --------------------------------------------------------------------------
# built-in model families
# --------------------------------------------------------------------------

FAMILY_LINEAR = 1
FAMILY_REFERENCE1D = 2
FAMILY_WELL1D = 3
FAMILY_CURL2D = 4
FAMILY_ROTLINEAR2D = 5


def _const_iso_diffusion(d: int, s: float):
    def diffusion(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (d, d))
        idx = np.arange(d)
        out[..., idx, idx] = s
        return out

    return diffusion


def _const_sigma_scalar(s: float):
    def sigma_scalar(x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], s)

    return sigma_scalar


def _linear(dimension: int = 1, rate: float = 1.0, sigma: float = math.sqrt(2.0)) -> ModelSpec:
    d = int(dimension)
    rate = float(rate)
    sigma = float(sigma)

    return ModelSpec(
        dimension=d,
        drift=lambda x: -rate * np.asarray(x, dtype=float),
        diffusion=_const_iso_diffusion(d, sigma),
        sigma_scalar=_const_sigma_scalar(sigma),
        drift_deriv=(lambda x: np.full(np.shape(x), -rate)) if d == 1 else None,
        sigma_scalar_deriv=(lambda x: np.zeros(np.shape(x))) if d == 1 else None,
        lipschitz_L=abs(rate),
        growth_Lb=max(rate * rate, 1e-12),
        ellipticity_sigma0=sigma * sigma,
        dissipative_c1=0.0,
        # a non-contracting rate cannot be dissipative; keep the declared
        # placeholder so validation (not construction) reports the failure
        dissipative_c2=rate if rate > 0 else 1.0,
        sigma_sup=sigma * math.sqrt(d),
        gradient_drift=True,
        constant_diffusion=True,
        kernel=KernelModel(FAMILY_LINEAR, (rate, sigma)),
        name=f"linear(d={d},rate={rate:g},sigma={sigma:g})",
    )


def _reference1d(cos_amp: float = 0.25, sigma_base: float = 1.0, sigma_bump: float = 0.5) -> ModelSpec:
    a, s0, s1 = float(cos_amp), float(sigma_base), float(sigma_bump)
    if s0 <= 0 or s1 < 0:
        raise ValueError("sigma_base must be positive and sigma_bump nonnegative")

    def bfun(u):
        return -u + a * np.cos(u)

    def sfun(u):
        return s0 + s1 / (1.0 + u * u)

    # sup |d/du 1/(1+u^2)| = 3*sqrt(3)/8, attained at u = 1/sqrt(3)
    sig_lip = s1 * 3.0 * math.sqrt(3.0) / 8.0
    # sup (|u|+a)^2/(1+u^2) = 1 + a^2, attained at u = 1/a
    growth = (1.0 + a * a) * 1.001  # headroom: the envelope is not exactly b^2

    return ModelSpec(
        dimension=1,
        drift=lambda x: bfun(np.asarray(x, dtype=float)),
        diffusion=lambda x: sfun(np.asarray(x, dtype=float)[..., 0])[..., None, None],
        sigma_scalar=lambda x: sfun(np.asarray(x, dtype=float)[..., 0]),
        drift_deriv=lambda u: -1.0 - a * np.sin(np.asarray(u, dtype=float)),
        sigma_scalar_deriv=lambda u: -2.0 * s1 * np.asarray(u, dtype=float)
        / (1.0 + np.asarray(u, dtype=float) ** 2) ** 2,
        lipschitz_L=1.0 + a + sig_lip,
        growth_Lb=growth,
        ellipticity_sigma0=s0 * s0,
        dissipative_c1=max(1.0, a * a / 2.0),
        dissipative_c2=0.5,
        sigma_sup=s0 + s1,
        gradient_drift=False,
        constant_diffusion=False,
        kernel=KernelModel(FAMILY_REFERENCE1D, (a, s0, s1)),
        name=f"reference1d(a={a:g},s0={s0:g},s1={s1:g})",
    )


def _well1d(tanh_amp: float = 1.0, sigma: float = 1.0) -> ModelSpec:
    beta, s = float(tanh_amp), float(sigma)

    return ModelSpec(
        dimension=1,
        drift=lambda x: -np.asarray(x, dtype=float) - beta * np.tanh(np.asarray(x, dtype=float)),
        diffusion=_const_iso_diffusion(1, s),
        sigma_scalar=_const_sigma_scalar(s),
        drift_deriv=lambda u: -1.0 - beta * (1.0 - np.tanh(np.asarray(u, dtype=float)) ** 2),
        sigma_scalar_deriv=lambda u: np.zeros(np.shape(u)),
        lipschitz_L=1.0 + beta,
        growth_Lb=(1.0 + beta * beta) * 1.001,
        ellipticity_sigma0=s * s,
        dissipative_c1=0.0,
        dissipative_c2=1.0,
        sigma_sup=s,
        gradient_drift=True,
        constant_diffusion=True,
        kernel=KernelModel(FAMILY_WELL1D, (beta, s)),
        name=f"well1d(beta={beta:g},sigma={s:g})",
    )


def _curl2d(amp: float = 0.25, sigma: float = 1.0) -> ModelSpec:
    a, s = float(amp), float(sigma)

    def drift(x):
        x = np.asarray(x, dtype=float)
        out = -x.copy()
        out[..., 0] += a * np.sin(x[..., 1])
        out[..., 1] += a * np.cos(x[..., 0])
        return out

    q = a * math.sqrt(2.0)
    return ModelSpec(
        dimension=2,
        drift=drift,
        diffusion=_const_iso_diffusion(2, s),
        sigma_scalar=_const_sigma_scalar(s),
        lipschitz_L=1.0 + a,
        growth_Lb=(1.0 + q * q) * 1.001,
        ellipticity_sigma0=s * s,
        dissipative_c1=q * q / 2.0,
        dissipative_c2=0.5,
        sigma_sup=s * math.sqrt(2.0),
        gradient_drift=False,
        constant_diffusion=True,
        kernel=KernelModel(FAMILY_CURL2D, (a, s)),
        name=f"curl2d(a={a:g},sigma={s:g})",
    )


def _rotlinear2d(rate: float = 1.0, rot: float = 0.25, sigma: float = 1.0) -> ModelSpec:
    """Linear drift (-rate*I + rot*J) x with constant isotropic noise.

    Non-gradient for rot != 0, yet fully Gaussian: both invariant measures
    solve Lyapunov equations in closed form, which makes this the exact
    oracle model for the d=2 pipeline.
    """
    r, w, s = float(rate), float(rot), float(sigma)

    def drift(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., 0] = -r * x[..., 0] + w * x[..., 1]
        out[..., 1] = -w * x[..., 0] - r * x[..., 1]
        return out

    op_norm = math.hypot(r, w)
    return ModelSpec(
        dimension=2,
        drift=drift,
        diffusion=_const_iso_diffusion(2, s),
        sigma_scalar=_const_sigma_scalar(s),
        lipschitz_L=op_norm,
        growth_Lb=op_norm * op_norm,
        ellipticity_sigma0=s * s,
        dissipative_c1=0.0,
        dissipative_c2=r,
        sigma_sup=s * math.sqrt(2.0),
        gradient_drift=(w == 0.0),
        constant_diffusion=True,
        kernel=KernelModel(FAMILY_ROTLINEAR2D, (r, w, s)),
        name=f"rotlinear2d(rate={r:g},rot={w:g},sigma={s:g})",
    )


MODEL_FAMILIES: dict[str, Callable[..., ModelSpec]] = {
    "linear": _linear,
    "reference1d": _reference1d,
    "well1d": _well1d,
    "curl2d": _curl2d,
    "rotlinear2d": _rotlinear2d,
}


def make_model(family: str, **params) -> ModelSpec:
    """Construct a registry model; unknown family names raise KeyError."""
    try:
        factory = MODEL_FAMILIES[family]
    except KeyError:
        known = ", ".join(sorted(MODEL_FAMILIES))
        raise KeyError(f"unknown model family {family!r}; known: {known}") from None
    return factory(**params)


# --------------------------------------------------------------------------
# built-in 1-d test functions for the Stein machinery
# --------------------------------------------------------------------------

def _smooth_abs_pair(eps: float = 0.1):
    def h(x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(x * x + eps * eps) - eps

    def dh(x):
        x = np.asarray(x, dtype=float)
        return x / np.sqrt(x * x + eps * eps)

    return h, dh


def _make_identity() -> TestFunction:
    return TestFunction(
        h=lambda x: np.asarray(x, dtype=float),
        grad=lambda x: np.ones(np.shape(x)),
        lipschitz_bound=1.0,
        name="identity",
    )


def _make_tanh() -> TestFunction:
    return TestFunction(
        h=lambda x: np.tanh(np.asarray(x, dtype=float)),
        grad=lambda x: 1.0 - np.tanh(np.asarray(x, dtype=float)) ** 2,
        lipschitz_bound=1.0,
        name="tanh",
    )


def _make_smooth_abs() -> TestFunction:
    h, dh = _smooth_abs_pair()
    return TestFunction(h=h, grad=dh, lipschitz_bound=1.0, name="smooth_abs")


def _make_cube() -> TestFunction:
    # deliberately outside the unit-Lipschitz class; used to exercise
    # growth-check failure paths
    return TestFunction(
        h=lambda x: np.asarray(x, dtype=float) ** 3,
        grad=lambda x: 3.0 * np.asarray(x, dtype=float) ** 2,
        lipschitz_bound=math.inf,
        zero_at_origin=True,
        name="cube",
    )


TEST_FUNCTIONS: dict[str, Callable[[], TestFunction]] = {
    "identity": _make_identity,
    "tanh": _make_tanh,
    "smooth_abs": _make_smooth_abs,
    "cube": _make_cube,
}


def make_test_function(name: str) -> TestFunction:
    try:
        return TEST_FUNCTIONS[name]()
    except KeyError:
        known = ", ".join(sorted(TEST_FUNCTIONS))
        raise KeyError(f"unknown test function {name!r}; known: {known}") from None
