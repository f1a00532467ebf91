"""Time-stepping schemes for the kinetic and limiting SDEs.

Three schemes:

``kinetic_exponential``
    Frozen-coefficient variation-of-constants step.  The friction term is
    treated exactly, so the scheme stays stable for every dt no matter how
    small the mass; the only error source is freezing b and sigma at the
    step's start.  Both stochastic increments are driven by the same
    Brownian path through their exact joint 2x2 covariance (see _expstep).

``kinetic_euler``
    Direct Euler-Maruyama on the second-order system.  Requires
    dt <= mass_cfl * m for stability and is used as an independent
    cross-check of the exponential scheme.

``limit_euler``
    Euler-Maruyama on the limiting first-order SDE.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import backend
from ._expstep import exp_step_coeffs
from .exceptions import StabilityError
from .models import KineticState, LimitState, ModelSpec

SCHEMES = ("kinetic_exponential", "kinetic_euler", "limit_euler")


@dataclass(frozen=True)
class IntegratorConfig:
    """Stepping policy: scheme, step ceiling, and the mass-CFL fraction.

    Kinetic runs use dt = min(dt_max, mass_cfl * m); limit runs use dt_max.
    The default mass_cfl keeps the freezing bias of the exponential scheme
    small; it is a bias knob there, a hard stability bound for
    kinetic_euler.
    """

    scheme: str = "kinetic_exponential"
    dt_max: float = 1e-2
    mass_cfl: float = 0.2
    rng_seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.dt_max <= 0:
            raise ValueError("dt_max must be positive")
        if not (0.0 < self.mass_cfl <= 1.0):
            raise ValueError("mass_cfl must lie in (0, 1]")

    def step_size(self, m: Optional[float]) -> float:
        if self.scheme == "limit_euler" or m is None:
            return self.dt_max
        return min(self.dt_max, self.mass_cfl * m)


@dataclass
class PathSample:
    """A recorded trajectory with its seed provenance."""

    times: np.ndarray
    xs: np.ndarray  # (n, d)
    ys: Optional[np.ndarray]  # (n, d) for kinetic schemes
    scheme: str
    m: Optional[float]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.xs)):
            raise ValueError("path contains non-finite positions")


def _sigma_apply(spec: ModelSpec, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    sig = np.asarray(spec.diffusion(x[None, :]), dtype=float)[0]
    return sig @ z


def step_kinetic_exponential(
    spec: ModelSpec, s: KineticState, dt: float, rng: np.random.Generator
) -> KineticState:
    """One frozen-coefficient exponential step of the kinetic system."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    co = exp_step_coeffs(dt, s.m)
    b = np.asarray(spec.drift(s.x[None, :]), dtype=float)[0]
    d = spec.dimension
    z1 = rng.standard_normal(d)
    z2 = rng.standard_normal(d)
    sz1 = _sigma_apply(spec, s.x, z1)
    sz2 = _sigma_apply(spec, s.x, z2)
    x_new = s.x + s.m * co.e1 * s.y + co.wxb * b + co.l11 * sz1
    y_new = co.decay * s.y + co.e1 * b + co.l21 * sz1 + co.l22 * sz2
    return KineticState(x=x_new, y=y_new, m=s.m)


def step_kinetic_euler(
    spec: ModelSpec,
    s: KineticState,
    dt: float,
    rng: np.random.Generator,
    mass_cfl: float = 1.0,
) -> KineticState:
    """One Euler-Maruyama step of the kinetic system (dt <= mass_cfl * m)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > mass_cfl * s.m * (1.0 + 1e-12):
        raise StabilityError(
            f"kinetic_euler needs dt <= mass_cfl*m = {mass_cfl * s.m:.3g}, got dt = {dt:.3g}"
        )
    b = np.asarray(spec.drift(s.x[None, :]), dtype=float)[0]
    z = rng.standard_normal(spec.dimension)
    sz = _sigma_apply(spec, s.x, z)
    x_new = s.x + dt * s.y
    y_new = s.y + (dt / s.m) * (b - s.y) + (math.sqrt(dt) / s.m) * sz
    return KineticState(x=x_new, y=y_new, m=s.m)


def step_limit_euler(
    spec: ModelSpec, s: LimitState, dt: float, rng: np.random.Generator
) -> LimitState:
    """One Euler-Maruyama step of the limiting SDE."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    b = np.asarray(spec.drift(s.x[None, :]), dtype=float)[0]
    z = rng.standard_normal(spec.dimension)
    sz = _sigma_apply(spec, s.x, z)
    return LimitState(x=s.x + dt * b + math.sqrt(dt) * sz)


def simulate_path(
    spec: ModelSpec,
    cfg: IntegratorConfig,
    s0,
    horizon: float,
    record_stride: int = 1,
    master_seed: Optional[int] = None,
    run_path: tuple[int, ...] = (0,),
    threads: int = 1,
) -> PathSample:
    """Simulate one trajectory, recording every record_stride-th state.

    Deterministic given (spec, cfg, s0, horizon, seed); the final state is
    always recorded.  horizon = 0 returns just the initial state.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    kinetic = cfg.scheme != "limit_euler"
    if kinetic and not isinstance(s0, KineticState):
        raise TypeError("kinetic schemes need a KineticState start")
    if not kinetic and not isinstance(s0, LimitState):
        raise TypeError("limit_euler needs a LimitState start")
    m = s0.m if kinetic else None
    dt = cfg.step_size(m)
    if cfg.scheme == "kinetic_euler" and dt > cfg.mass_cfl * m * (1 + 1e-12):
        raise StabilityError("dt exceeds mass_cfl * m")
    seed = cfg.rng_seed if master_seed is None else master_seed

    n_steps = int(math.ceil(horizon / dt - 1e-9)) if horizon > 0 else 0
    rec = list(range(record_stride, n_steps + 1, record_stride))
    if n_steps > 0 and (not rec or rec[-1] != n_steps):
        rec.append(n_steps)

    x0 = s0.x[None, :]
    y0 = s0.y[None, :] if kinetic else None
    if rec:
        xs, ys = backend.run_chains(
            spec, cfg.scheme, m if kinetic else None, dt,
            np.asarray(rec, dtype=np.int64), x0, y0,
            master_seed=seed, run_path=run_path,
            record_velocity=kinetic, threads=threads,
        )
        times = np.concatenate([[0.0], np.asarray(rec, dtype=float) * dt])
        all_x = np.vstack([x0, xs[:, 0, :]])
        all_y = np.vstack([y0, ys[:, 0, :]]) if kinetic else None
    else:
        times = np.array([0.0])
        all_x = x0.copy()
        all_y = y0.copy() if kinetic else None

    return PathSample(
        times=times,
        xs=all_x,
        ys=all_y,
        scheme=cfg.scheme,
        m=m,
        provenance={
            "master_seed": int(seed),
            "run_path": list(run_path),
            "dt": dt,
            "spec": spec.provenance(),
            "backend": backend.active_backend(),
        },
    )


def save_path(sample: PathSample, base: str | Path) -> tuple[Path, Path]:
    """Persist a trajectory as CSV plus a JSON provenance sidecar."""
    base = Path(base)
    csv_path = base.with_suffix(".csv")
    json_path = base.with_suffix(".json")
    d = sample.xs.shape[1]
    cols = ["t"] + [f"x_{i+1}" for i in range(d)]
    data = [sample.times] + [sample.xs[:, i] for i in range(d)]
    if sample.ys is not None:
        cols += [f"y_{i+1}" for i in range(d)]
        data += [sample.ys[:, i] for i in range(d)]
    arr = np.column_stack(data)
    header = ",".join(cols)
    np.savetxt(csv_path, arr, delimiter=",", header=header, comments="", fmt="%.17g")
    meta = dict(sample.provenance)
    meta.update({"scheme": sample.scheme, "m": sample.m, "n_records": int(len(sample.times))})
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return csv_path, json_path
