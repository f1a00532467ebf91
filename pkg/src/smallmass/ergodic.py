"""Long-run sampling of invariant measures and moment/drift diagnostics.

Chains start overdispersed (positions ~ N(0, 4I), velocities ~ N(0, 4I/m),
matching the 1/sqrt(m) stationary velocity scale), discard a burn-in
window, then record thinned states.  Standard errors everywhere come from
between-chain variation, which is honest without autocorrelation modelling
because chains are independent; single-chain runs fall back to an
initial-positive-sequence autocorrelation-time estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import backend
from . import rng as _rng
from .integrate import IntegratorConfig
from .models import (
    ModelSpec,
    ProbePlan,
    admissible_mass_bound,
    kinetic_lyapunov_drift_values,
    lyapunov_vm_values,
    probe_points,
)

__all__ = [
    "EmpiricalMeasure",
    "StationarityReport",
    "sample_invariant",
    "chain_mean_se",
    "velocity_moment",
    "moment_scaling_check",
    "increment_moment_check",
    "lyapunov_drift_check",
    "generator_mean_zero_checks",
    "default_burn_in",
    "default_thinning",
]


# --------------------------------------------------------------------------
# measures
# --------------------------------------------------------------------------

@dataclass
class EmpiricalMeasure:
    """Uniformly weighted sample cloud standing in for an invariant measure."""

    dimension: int
    samples: np.ndarray  # (n, d)
    velocities: Optional[np.ndarray]  # (n, d) for kinetic measures
    chain_ids: np.ndarray  # (n,) which chain produced each sample
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise ValueError("samples must be a nonempty (n, d) array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def m(self) -> Optional[float]:
        return self.provenance.get("m")

    def position_1d(self) -> np.ndarray:
        if self.dimension != 1:
            raise ValueError("1-d positions requested from a d>1 measure")
        return self.samples[:, 0]


def chain_mean_se(values: np.ndarray, chain_ids: np.ndarray) -> tuple[float, float]:
    """Mean and standard error of a per-sample statistic.

    Uses between-chain variation when several chains are present; for a
    single chain, inflates the naive error by the estimated integrated
    autocorrelation time.
    """
    values = np.asarray(values, dtype=float)
    ids = np.asarray(chain_ids)
    uniq = np.unique(ids)
    mean = float(values.mean())
    if uniq.size >= 2:
        sums = np.bincount(ids, weights=values)
        cnts = np.bincount(ids)
        keep = cnts > 0
        chain_means = sums[keep] / cnts[keep]
        c = chain_means.size
        se = float(np.std(chain_means, ddof=1) / math.sqrt(c))
        return mean, se
    tau = integrated_autocorr_time(values)
    ess = max(1.0, values.size / tau)
    return mean, float(values.std(ddof=1) / math.sqrt(ess))


def integrated_autocorr_time(series: np.ndarray, max_lag: Optional[int] = None) -> float:
    """Initial-positive-sequence estimate of 2*sum(acf) + 1."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 8:
        return 1.0
    x = x - x.mean()
    var = float(np.mean(x * x))
    if var == 0:
        return 1.0
    if max_lag is None:
        max_lag = min(n - 1, 1000)
    tau = 1.0
    for lag in range(1, max_lag + 1):
        rho = float(np.mean(x[:-lag] * x[lag:])) / var
        if rho <= 0:
            break
        tau += 2.0 * rho
    return tau


# --------------------------------------------------------------------------
# invariant-measure sampling
# --------------------------------------------------------------------------

@dataclass
class StationarityReport:
    """Trailing-window diagnostics of a chain ensemble."""

    window_stats: dict  # name -> (first-half mean, second-half mean, combined se)
    stationary: bool
    insufficient_data: bool
    decay_rate: Optional[float]  # fitted autocorrelation decay of |x|^2, per unit time
    messages: list = field(default_factory=list)


def default_burn_in(spec: ModelSpec, m: Optional[float]) -> float:
    c2 = spec.dissipative_c2
    if m is None:
        return 20.0 / c2
    return 20.0 * max(1.0 / c2, m)


def default_thinning(spec: ModelSpec) -> float:
    return 1.0 / spec.dissipative_c2


def sample_invariant(
    spec: ModelSpec,
    cfg: IntegratorConfig,
    m: Optional[float],
    n_samples: int,
    burn_in: Optional[float] = None,
    thinning: Optional[float] = None,
    n_chains: int = 256,
    master_seed: int = 0,
    run_path: tuple[int, ...] = (0,),
    record_velocity: bool = True,
    threads: int = 1,
) -> tuple[EmpiricalMeasure, StationarityReport]:
    """Draw approximate stationary samples of the kinetic (m > 0) or
    limiting (m=None) dynamics.

    Positions (and, for kinetic runs, velocities) are recorded every
    ``thinning`` time units after ``burn_in``, across ``n_chains``
    independent chains.  Callers must pass a distinct ``run_path`` per draw
    so random streams never collide within one experiment.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    kinetic = m is not None
    if kinetic:
        if m <= 0:
            raise ValueError("mass must be positive")
        bound = admissible_mass_bound(spec)
        if m > bound * (1 + 1e-12):
            raise ValueError(
                f"m={m:.4g} above the admissible bound min{{c2/2Lb, 2/c2, 1}} = {bound:.4g}"
            )
        scheme = cfg.scheme if cfg.scheme != "limit_euler" else "kinetic_exponential"
    else:
        scheme = "limit_euler"
    if burn_in is None:
        burn_in = default_burn_in(spec, m)
    if thinning is None:
        thinning = default_thinning(spec)
    if burn_in <= 0 or thinning <= 0:
        raise ValueError("burn_in and thinning must be positive")

    d = spec.dimension
    n_chains = int(min(n_chains, n_samples))
    dt = cfg.step_size(m)
    stride = max(1, int(round(thinning / dt)))
    burn_steps = max(1, int(math.ceil(burn_in / dt)))
    per_chain = int(math.ceil(n_samples / n_chains))
    record_steps = burn_steps + stride * np.arange(1, per_chain + 1, dtype=np.int64)

    init = _rng.init_generator(master_seed, run_path)
    x0 = 2.0 * init.standard_normal((n_chains, d))
    y0 = (2.0 / math.sqrt(m)) * init.standard_normal((n_chains, d)) if kinetic else None

    xs, ys = backend.run_chains(
        spec, scheme, m, dt, record_steps, x0, y0,
        master_seed=master_seed, run_path=run_path,
        record_velocity=kinetic and record_velocity, threads=threads,
    )

    report = _stationarity_report(spec, xs, ys, m, thinning)

    # flatten chain-major so per-chain samples stay contiguous
    pos = np.ascontiguousarray(xs.transpose(1, 0, 2)).reshape(n_chains * per_chain, d)
    vel = None
    if ys is not None:
        vel = np.ascontiguousarray(ys.transpose(1, 0, 2)).reshape(n_chains * per_chain, d)
    ids = np.repeat(np.arange(n_chains, dtype=np.int64), per_chain)
    pos = pos[:n_samples]
    ids = ids[:n_samples]
    if vel is not None:
        vel = vel[:n_samples]

    measure = EmpiricalMeasure(
        dimension=d,
        samples=pos,
        velocities=vel,
        chain_ids=ids,
        provenance={
            "spec": spec.provenance(),
            "m": m,
            "kind": "kinetic" if kinetic else "limit",
            "scheme": scheme,
            "dt": dt,
            "master_seed": int(master_seed),
            "run_path": list(run_path),
            "burn_in": burn_in,
            "thinning": thinning,
            "n_chains": n_chains,
            "backend": backend.active_backend(),
        },
    )
    return measure, report


def _stationarity_report(spec, xs, ys, m, thinning) -> StationarityReport:
    nrec, C, d = xs.shape
    msgs = []
    insufficient = nrec < 4 or nrec * C < 8
    stats = {}
    names = {"|x|^2": np.sum(xs * xs, axis=2)}
    if ys is not None:
        names["m^2|y|^2"] = m * m * np.sum(ys * ys, axis=2)
        names["V_m"] = lyapunov_vm_values(xs, ys, m)
    stationary = True
    half = nrec // 2
    for name, series in names.items():  # series shape (nrec, C)
        if insufficient or half < 1:
            stats[name] = (float(series.mean()), float("nan"), float("nan"))
            continue
        first = series[:half].mean(axis=0)  # per-chain means
        second = series[half:].mean(axis=0)
        mu1, mu2 = float(first.mean()), float(second.mean())
        if C >= 2:
            se = math.sqrt(
                np.var(first, ddof=1) / C + np.var(second, ddof=1) / C
            )
        else:
            se = float("nan")
        stats[name] = (mu1, mu2, se)
        if np.isfinite(se) and se > 0 and abs(mu1 - mu2) > 5.0 * se:
            stationary = False
            msgs.append(
                f"trailing-block means of {name} differ by "
                f"{abs(mu1 - mu2) / se:.1f} se (> 5): possible non-stationarity"
            )
    if insufficient:
        msgs.append("insufficient data for stationarity diagnostics")

    decay = None
    if not insufficient and nrec >= 8:
        series = names["|x|^2"] - names["|x|^2"].mean(axis=0, keepdims=True)
        var = np.mean(series * series)
        if var > 0:
            max_lag = min(10, nrec - 2)
            rhos = []
            for lag in range(1, max_lag + 1):
                rhos.append(max(np.mean(series[:-lag] * series[lag:]) / var, 1e-12))
            rhos = np.asarray(rhos)
            pos_mask = rhos > 1e-10
            if pos_mask.sum() >= 2:
                lags = np.arange(1, max_lag + 1)[pos_mask]
                slope = np.polyfit(lags * thinning, np.log(rhos[pos_mask]), 1)[0]
                decay = float(-slope)

    return StationarityReport(
        window_stats=stats,
        stationary=stationary,
        insufficient_data=insufficient,
        decay_rate=decay,
        messages=msgs,
    )


# --------------------------------------------------------------------------
# moment diagnostics
# --------------------------------------------------------------------------

def velocity_moment(measure: EmpiricalMeasure, p: int) -> tuple[float, float]:
    """E|Y|^p with standard error; rejects position-only measures."""
    if measure.velocities is None:
        raise ValueError("measure has no velocities; kinetic samples required")
    speed = np.linalg.norm(measure.velocities, axis=1)
    return chain_mean_se(speed**p, measure.chain_ids)


@dataclass
class MomentScalingResult:
    p: int
    m_grid: np.ndarray
    moments: np.ndarray
    moment_ses: np.ndarray
    slope: float
    slope_se: float
    ci95: tuple[float, float]


def moment_scaling_check(
    spec: ModelSpec,
    cfg: IntegratorConfig,
    m_grid,
    p: int,
    n_per_m: int,
    n_chains: int = 256,
    master_seed: int = 0,
    run_path: tuple[int, ...] = (10,),
    threads: int = 1,
) -> MomentScalingResult:
    """Fit the scaling exponent of log E|Y|^p against log m.

    The stationary velocity moments blow up like m^{-p/2}; for linear
    models with constant noise the exponent is exactly -p/2.
    """
    if p not in (2, 4):
        raise ValueError("p must be 2 or 4")
    m_grid = np.asarray(sorted(m_grid), dtype=float)
    if m_grid.size < 3:
        raise ValueError("degenerate regression: need at least 3 mass grid points")
    moments, ses = [], []
    for i, m in enumerate(m_grid):
        meas, _ = sample_invariant(
            spec, cfg, float(m), n_samples=n_per_m, n_chains=n_chains,
            master_seed=master_seed, run_path=run_path + (i,), threads=threads,
        )
        mom, se = velocity_moment(meas, p)
        moments.append(mom)
        ses.append(se)
    moments = np.asarray(moments)
    ses = np.asarray(ses)
    slope, slope_se = _wls_slope(np.log(m_grid), np.log(moments), ses / moments)
    return MomentScalingResult(
        p=p,
        m_grid=m_grid,
        moments=moments,
        moment_ses=ses,
        slope=slope,
        slope_se=slope_se,
        ci95=(slope - 1.96 * slope_se, slope + 1.96 * slope_se),
    )


def _wls_slope(x: np.ndarray, y: np.ndarray, y_se: np.ndarray) -> tuple[float, float]:
    w = 1.0 / np.maximum(y_se, 1e-12) ** 2
    X = np.column_stack([np.ones_like(x), x])
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    beta = cov @ (WX.T @ y)
    return float(beta[1]), float(math.sqrt(cov[1, 1]))


@dataclass
class IncrementCheckResult:
    m: float
    p: int
    t_grid: np.ndarray
    moments: np.ndarray
    moment_ses: np.ndarray
    bounds: np.ndarray           # t^{p/2} + m^{p/2}
    ratios: np.ndarray
    log_moments: np.ndarray      # E[|dX|^p |ln|dX||^p]
    log_bounds: np.ndarray       # (t^{p/2}+m^{p/2}) (|ln(t+m)|^p + 1)
    log_ratios: np.ndarray
    ratio_spread: float          # max ratio / min ratio
    passed: bool


def increment_moment_check(
    spec: ModelSpec,
    cfg: IntegratorConfig,
    m: float,
    t_grid,
    p: int,
    n: int,
    n_chains: int = 256,
    master_seed: int = 0,
    run_path: tuple[int, ...] = (20,),
    threads: int = 1,
    start_measure: Optional[EmpiricalMeasure] = None,
    ratio_cap: float = 10.0,
) -> IncrementCheckResult:
    """Short-time increment moments from a stationary start.

    E|X_t - X_0|^p is compared against t^{p/2} + m^{p/2} across the t grid,
    together with the logarithmic refinement
    E[|dX|^p |ln|dX||^p] vs (t^{p/2}+m^{p/2})(|ln(t+m)|^p + 1).
    Stationary starts recycle a converged ensemble.
    """
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    if np.any(t_grid <= 0) or np.any(t_grid > 1):
        raise ValueError("t grid must lie in (0, 1]")
    if start_measure is None:
        start_measure, _ = sample_invariant(
            spec, cfg, m, n_samples=n, n_chains=n_chains,
            master_seed=master_seed, run_path=run_path + (0,), threads=threads,
        )
    if start_measure.velocities is None:
        raise ValueError("stationary starts need velocities")
    x0 = start_measure.samples[:n]
    y0 = start_measure.velocities[:n]
    ids = start_measure.chain_ids[:n]

    dt = cfg.step_size(m)
    steps = np.maximum(1, np.round(t_grid / dt).astype(np.int64))
    steps_unique, inverse = np.unique(steps, return_inverse=True)
    scheme = cfg.scheme if cfg.scheme != "limit_euler" else "kinetic_exponential"
    xs, _ = backend.run_chains(
        spec, scheme, m, dt, steps_unique, x0, y0,
        master_seed=master_seed, run_path=run_path + (1,),
        record_velocity=False, threads=threads,
    )
    t_actual = steps_unique[inverse] * dt

    moments, ses, logmoms = [], [], []
    for k in range(t_grid.size):
        dx = xs[inverse[k]] - x0
        r = np.linalg.norm(dx, axis=1)
        mom, se = chain_mean_se(r**p, ids)
        moments.append(mom)
        ses.append(se)
        with np.errstate(divide="ignore"):
            lg = np.where(r > 0, np.abs(np.log(np.where(r > 0, r, 1.0))) ** p, 0.0)
        logmoms.append(float(np.mean(r**p * lg)))
    moments = np.asarray(moments)
    ses = np.asarray(ses)
    logmoms = np.asarray(logmoms)
    bounds = t_actual ** (p / 2) + m ** (p / 2)
    ratios = moments / bounds
    log_bounds = bounds * (np.abs(np.log(t_actual + m)) ** p + 1.0)
    log_ratios = logmoms / log_bounds
    spread = float(ratios.max() / ratios.min())
    return IncrementCheckResult(
        m=m,
        p=p,
        t_grid=t_actual,
        moments=moments,
        moment_ses=ses,
        bounds=bounds,
        ratios=ratios,
        log_moments=logmoms,
        log_bounds=log_bounds,
        log_ratios=log_ratios,
        ratio_spread=spread,
        passed=bool(spread <= ratio_cap),
    )


# --------------------------------------------------------------------------
# pointwise Lyapunov drift check
# --------------------------------------------------------------------------

@dataclass
class DriftCheckResult:
    m: float
    c_star: float
    worst_margin: float
    witness_x: np.ndarray
    witness_y: np.ndarray
    passed: bool


def lyapunov_drift_check(
    spec: ModelSpec,
    m: float,
    probe: ProbePlan = ProbePlan(),
    tol: float = 1e-12,
) -> DriftCheckResult:
    """Pointwise drift inequality of the kinetic Lyapunov function.

    Verifies A_m V_m + (c2/8) V_m - C* <= 0 at sampled probe points with
    C* = 4 c1 + 3 c2 + 6 ||sigma||_inf^2, the explicit drift constant of
    the admissible-mass regime.  Velocities are probed on the 1/sqrt(m)
    scale where the friction term competes.
    """
    bound = admissible_mass_bound(spec)
    if m > bound * (1 + 1e-12):
        raise ValueError(f"m={m:.4g} above the admissible bound {bound:.4g}")
    d = spec.dimension
    x = probe_points(d, probe.radius, probe.count, probe.seed)
    y = probe_points(d, probe.radius / math.sqrt(m), probe.count, probe.seed + 1)
    n = min(len(x), len(y))
    x, y = x[:n], y[:n]
    c2 = spec.dissipative_c2
    c_star = 4.0 * spec.dissipative_c1 + 3.0 * c2 + 6.0 * spec.sigma_sup**2
    margins = (
        kinetic_lyapunov_drift_values(spec, x, y, m)
        + (c2 / 8.0) * lyapunov_vm_values(x, y, m)
        - c_star
    )
    i = int(np.argmax(margins))
    return DriftCheckResult(
        m=m,
        c_star=c_star,
        worst_margin=float(margins[i]),
        witness_x=x[i],
        witness_y=y[i],
        passed=bool(margins[i] <= tol),
    )


# --------------------------------------------------------------------------
# stationarity of the generator (mean-zero identities)
# --------------------------------------------------------------------------

def generator_mean_zero_checks(measure: EmpiricalMeasure, spec: ModelSpec) -> list[dict]:
    """Monte Carlo means of generator images that vanish in equilibrium.

    For kinetic measures: A_m applied to x_i y_j, |y|^2, and V_m; for limit
    measures: A applied to x_i and |x|^2.  Returns per-observable rows with
    mean, standard error, and the z score |mean|/se.
    """
    x = measure.samples
    ids = measure.chain_ids
    d = measure.dimension
    rows = []
    if measure.velocities is not None:
        m = measure.provenance["m"]
        y = measure.velocities
        b = np.asarray(spec.drift(x), dtype=float)
        hs2 = _hs2(spec, x)
        for i in range(d):
            for j in range(d):
                vals = y[:, i] * y[:, j] + x[:, i] * (b[:, j] - y[:, j]) / m
                rows.append(_mz_row(f"A_m[x_{i+1} y_{j+1}]", vals, ids))
        vals = 2.0 / m * np.sum((b - y) * y, axis=1) + hs2 / (m * m)
        rows.append(_mz_row("A_m[|y|^2]", vals, ids))
        vals = kinetic_lyapunov_drift_values(spec, x, y, m)
        rows.append(_mz_row("A_m[V_m]", vals, ids))
    else:
        b = np.asarray(spec.drift(x), dtype=float)
        hs2 = _hs2(spec, x)
        for i in range(d):
            rows.append(_mz_row(f"A[x_{i+1}]", b[:, i], ids))
        vals = 2.0 * np.sum(b * x, axis=1) + hs2
        rows.append(_mz_row("A[|x|^2]", vals, ids))
    return rows


def _hs2(spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    if spec.sigma_scalar is not None:
        s = np.asarray(spec.sigma_scalar(x), dtype=float)
        return spec.dimension * np.broadcast_to(s * s, x.shape[:-1]).copy()
    sig = np.asarray(spec.diffusion(x), dtype=float)
    return np.sum(sig * sig, axis=(-2, -1))


def _mz_row(name: str, vals: np.ndarray, ids: np.ndarray) -> dict:
    mean, se = chain_mean_se(vals, ids)
    z = abs(mean) / se if se > 0 else math.inf
    return {"name": name, "mean": mean, "se": se, "z": z}
