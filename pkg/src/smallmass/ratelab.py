"""Mass sweeps, baseline-corrected transport distances, and rate fits.

A sweep draws, for each mass m in a grid, a fresh position sample of the
kinetic invariant measure and a fresh sample of the limiting one, measures
their distance with the dimension-appropriate estimator, and subtracts the
statistical floor (the self-distance of two independent same-law limit
samples).  The fitted slope of log W1 against log m is the empirical
convergence exponent; an optional log|ln m| regressor captures the
logarithmic correction the general-dimension theory allows.

Rows persist incrementally to CSV keyed by (m, method, seed), so an
interrupted sweep resumes without recomputation.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import rng as _rng
from . import transport
from .ergodic import sample_invariant
from .integrate import IntegratorConfig
from .models import ModelSpec, admissible_mass_bound

__all__ = [
    "SweepPlan",
    "SweepRow",
    "RateFitResult",
    "run_sweep",
    "fit_rate",
    "null_case_check",
    "save_rows",
    "load_rows",
    "write_plot_data",
]

# run-path row tags (see rng docstring; these are second-level path ids)
_PATH_KINETIC = 100
_PATH_LIMIT = 200
_PATH_BASELINE = 300
_PATH_DIRECTIONS = 400
_PATH_SUBSAMPLE = 500
_PATH_BOOT = 600


@dataclass(frozen=True)
class SweepPlan:
    """Sampling and transport policy for one sweep."""

    n_samples: int = 1_000_000
    n_chains: int = 1024
    burn_in: Optional[float] = None
    thinning: Optional[float] = None
    limit_dt_max: Optional[float] = None  # finer step for the limit sampler
    transport_method: str = "auto"  # auto | sorted_1d | sliced
    n_proj: int = 128
    lp_subsample: int = 2048
    lp_crosscheck: bool = True  # for d > 1, also report an exact-LP row on subsampled clouds
    n_boot_stderr: int = 64
    wallclock_cap: Optional[float] = None  # seconds per sweep point, advisory


@dataclass
class SweepRow:
    m: float
    w1_value: float
    w1_stderr: float
    self_baseline: float
    n_samples: int
    method: str
    seed: int
    wallclock: float

    def corrected(self) -> float:
        return max(self.w1_value - self.self_baseline, 0.0)


_CSV_FIELDS = ["m", "w1", "stderr", "baseline", "n", "method", "seed"]


def save_rows(rows: Sequence[SweepRow], path: str | Path, append: bool = True) -> None:
    path = Path(path)
    new_file = not (append and path.exists())
    mode = "a" if append else "w"
    with path.open(mode, newline="") as fh:
        w = csv.writer(fh)
        if new_file or not append:
            w.writerow(_CSV_FIELDS)
        for r in rows:
            w.writerow([
                f"{r.m:.17g}", f"{r.w1_value:.17g}", f"{r.w1_stderr:.17g}",
                f"{r.self_baseline:.17g}", r.n_samples, r.method, r.seed,
            ])


def load_rows(path: str | Path) -> list[SweepRow]:
    path = Path(path)
    if not path.exists():
        return []
    rows = []
    with path.open(newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(SweepRow(
                m=float(rec["m"]),
                w1_value=float(rec["w1"]),
                w1_stderr=float(rec["stderr"]),
                self_baseline=float(rec["baseline"]),
                n_samples=int(rec["n"]),
                method=rec["method"],
                seed=int(rec["seed"]),
                wallclock=float("nan"),
            ))
    return rows


def _row_key(m: float, method: str, seed: int) -> tuple:
    return (f"{m:.12g}", method, seed)


def run_sweep(
    spec: ModelSpec,
    cfg: IntegratorConfig,
    m_grid: Sequence[float],
    plan: SweepPlan = SweepPlan(),
    table_path: Optional[str | Path] = None,
    master_seed: int = 0,
    threads: int = 1,
) -> tuple[list[SweepRow], list[dict]]:
    """Measure the kinetic-vs-limit transport distance across a mass grid.

    Returns (rows, failures).  Per-m failures are recorded and the sweep
    continues; rows already present in ``table_path`` are not recomputed.
    """
    m_grid = [float(m) for m in m_grid]
    if not m_grid:
        raise ValueError("mass grid must be nonempty")
    d = spec.dimension
    bound = admissible_mass_bound(spec, one_dimensional_rate=(d == 1))
    for m in m_grid:
        if m <= 0 or m > bound * (1 + 1e-12):
            raise ValueError(f"m={m:.4g} outside the admissible range (0, {bound:.4g}]")

    method = plan.transport_method
    if method == "auto":
        method = "sorted_1d" if d == 1 else "sliced"

    done = {_row_key(r.m, r.method, r.seed): r for r in (load_rows(table_path) if table_path else [])}
    rows: list[SweepRow] = []
    failures: list[dict] = []

    limit_cfg = IntegratorConfig(
        scheme="limit_euler",
        dt_max=plan.limit_dt_max or cfg.dt_max,
        mass_cfl=cfg.mass_cfl,
        rng_seed=cfg.rng_seed,
    )

    def draw_limit(run_tag: int):
        meas, _ = sample_invariant(
            spec, limit_cfg, None, n_samples=plan.n_samples,
            burn_in=plan.burn_in, thinning=plan.thinning,
            n_chains=plan.n_chains, master_seed=master_seed,
            run_path=(run_tag,), record_velocity=False, threads=threads,
        )
        return meas

    # self-distance floor from two independent limit samples, once per sweep
    need_baseline = any(
        _row_key(m, meth, master_seed) not in done
        for m in m_grid
        for meth in ([method, "assignment_lp"] if (d > 1 and plan.lp_crosscheck) else [method])
    )
    baselines: dict[str, float] = {}
    if need_baseline:
        nu_a = draw_limit(_PATH_BASELINE)
        nu_b = draw_limit(_PATH_BASELINE + 1)
        if method == "sorted_1d":
            baselines["sorted_1d"] = transport.w1_sorted_1d(nu_a, nu_b).value
        else:
            baselines["sliced"] = transport.w1_sliced(
                nu_a, nu_b, n_proj=plan.n_proj,
                master_seed=master_seed, run_path=(_PATH_DIRECTIONS, 0),
            ).value
        if d > 1 and plan.lp_crosscheck:
            sub = _rng.generator(master_seed, _rng.DOMAIN_MISC, _PATH_SUBSAMPLE, 0)
            ia = sub.choice(nu_a.n, size=min(plan.lp_subsample, nu_a.n), replace=False)
            ib = sub.choice(nu_b.n, size=min(plan.lp_subsample, nu_b.n), replace=False)
            baselines["assignment_lp"] = transport.w1_assignment_exact(
                nu_a.samples[ia], nu_b.samples[ib]
            ).value

    for i, m in enumerate(sorted(m_grid, reverse=True)):
        keys = [(method, _row_key(m, method, master_seed))]
        if d > 1 and plan.lp_crosscheck:
            keys.append(("assignment_lp", _row_key(m, "assignment_lp", master_seed)))
        if all(k in done for _, k in keys):
            rows.extend(done[k] for _, k in keys)
            continue
        t0 = time.time()
        try:
            kin, _ = sample_invariant(
                spec, cfg, m, n_samples=plan.n_samples,
                burn_in=plan.burn_in, thinning=plan.thinning,
                n_chains=plan.n_chains, master_seed=master_seed,
                run_path=(_PATH_KINETIC, i), record_velocity=False, threads=threads,
            )
            nu = draw_limit(_PATH_LIMIT + i)
            new_rows = []
            if method == "sorted_1d":
                res = transport.w1_sorted_1d(kin, nu)
                stderr = transport.bootstrap_stderr_1d(
                    kin, nu, n_boot=plan.n_boot_stderr,
                    master_seed=master_seed, run_path=(_PATH_BOOT, i),
                )
            else:
                res = transport.w1_sliced(
                    kin, nu, n_proj=plan.n_proj,
                    master_seed=master_seed, run_path=(_PATH_DIRECTIONS, 1 + i),
                )
                stderr = res.stderr if res.stderr is not None else float("nan")
            new_rows.append(SweepRow(
                m=m, w1_value=res.value, w1_stderr=float(stderr),
                self_baseline=baselines[method], n_samples=plan.n_samples,
                method=method, seed=master_seed, wallclock=time.time() - t0,
            ))
            if d > 1 and plan.lp_crosscheck:
                sub = _rng.generator(master_seed, _rng.DOMAIN_MISC, _PATH_SUBSAMPLE, 1 + i)
                ia = sub.choice(kin.n, size=min(plan.lp_subsample, kin.n), replace=False)
                ib = sub.choice(nu.n, size=min(plan.lp_subsample, nu.n), replace=False)
                lp = transport.w1_assignment_exact(kin.samples[ia], nu.samples[ib])
                new_rows.append(SweepRow(
                    m=m, w1_value=lp.value, w1_stderr=float("nan"),
                    self_baseline=baselines["assignment_lp"], n_samples=len(ia),
                    method="assignment_lp", seed=master_seed, wallclock=time.time() - t0,
                ))
            for r in new_rows:
                rows.append(r)
            if table_path:
                save_rows(new_rows, table_path, append=True)
            if plan.wallclock_cap is not None and time.time() - t0 > plan.wallclock_cap:
                failures.append({"m": m, "error": "wallclock cap exceeded (row kept)"})
        except Exception as exc:  # per-m failure: record, continue
            failures.append({"m": m, "error": f"{type(exc).__name__}: {exc}"})
    rows.sort(key=lambda r: (-r.m, r.method))
    return rows, failures


# --------------------------------------------------------------------------
# rate fitting
# --------------------------------------------------------------------------

@dataclass
class RateFitResult:
    """Weighted log-log fit of corrected distances against mass."""

    slope: float
    intercept: float
    log_coef: Optional[float]  # coefficient of log|ln m| when requested
    ci95: tuple[float, float]  # bootstrap CI for the slope
    n_rows: int
    method: str
    verdict: str  # "ok" | "indistinguishable_from_zero"
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "log_coef": self.log_coef,
            "ci95": list(self.ci95),
            "n_rows": self.n_rows,
            "method": self.method,
            "verdict": self.verdict,
            "diagnostics": self.diagnostics,
        }


def fit_rate(
    rows: Sequence[SweepRow],
    with_log_correction: bool = False,
    n_boot: int = 2000,
    master_seed: int = 0,
    method: Optional[str] = None,
    min_rows: int = 4,
) -> RateFitResult:
    """Fit log(corrected W1) = alpha log m [+ gamma log|ln m|] + beta.

    Weighted least squares with delta-method weights from the per-row
    standard errors; the slope CI comes from a parametric bootstrap of the
    log-distances.  All-zero corrected values yield the verdict
    "indistinguishable_from_zero" instead of a fit.
    """
    rows = list(rows)
    if method is None:
        method = _majority_method(rows)
    rows = [r for r in rows if r.method == method]
    usable = [r for r in rows if r.corrected() > 0]
    # a row resolves signal above the floor only when the excess clears its
    # own noise; with none such, the rate cannot be distinguished from zero
    significant = [
        r for r in usable
        if not np.isfinite(r.w1_stderr) or (r.w1_value - r.self_baseline) > 2.0 * r.w1_stderr
    ]
    if not usable or not significant:
        return RateFitResult(
            slope=float("nan"), intercept=float("nan"), log_coef=None,
            ci95=(float("nan"), float("nan")), n_rows=0, method=method,
            verdict="indistinguishable_from_zero",
            diagnostics={
                "reason": "no corrected distance resolves above the self-distance floor",
                "positive_rows": len(usable),
            },
        )
    if len(usable) < min_rows:
        raise ValueError(
            f"rate fit needs >= {min_rows} rows with positive corrected distance, got {len(usable)}"
        )

    m = np.array([r.m for r in usable])
    val = np.array([r.corrected() for r in usable])
    # delta method on log: se(log w) ~ se(w)/w; fall back to the median
    # weight where a row has no stderr
    rel = np.array([
        r.w1_stderr / r.w1_value if np.isfinite(r.w1_stderr) and r.w1_value > 0 else np.nan
        for r in usable
    ])
    if np.all(np.isnan(rel)):
        rel = np.full(len(usable), 0.1)
    rel = np.where(np.isnan(rel), np.nanmedian(rel), rel)
    se_log = np.maximum(rel, 1e-12)

    y = np.log(val)
    cols = [np.ones_like(y), np.log(m)]
    if with_log_correction:
        cols.append(np.log(np.abs(np.log(m))))
    X = np.column_stack(cols)
    beta, cov = _wls(X, y, se_log)

    gen = _rng.generator(master_seed, _rng.DOMAIN_BOOTSTRAP, 7000)
    slopes = np.empty(n_boot)
    for itb in range(n_boot):
        yb = y + se_log * gen.standard_normal(y.size)
        bb, _ = _wls(X, yb, se_log)
        slopes[itb] = bb[1]
    ci = (float(np.quantile(slopes, 0.025)), float(np.quantile(slopes, 0.975)))

    resid = y - X @ beta
    dof = max(1, y.size - X.shape[1])
    diagnostics = {
        "residual_rms": float(np.sqrt(np.mean(resid**2))),
        "max_std_residual": float(np.max(np.abs(resid / se_log))),
        "chi2_per_dof": float(np.sum((resid / se_log) ** 2) / dof),
        "rows_used": [r.m for r in usable],
        "rows_dropped_nonpositive": [r.m for r in rows if r.corrected() <= 0],
    }
    return RateFitResult(
        slope=float(beta[1]),
        intercept=float(beta[0]),
        log_coef=float(beta[2]) if with_log_correction else None,
        ci95=ci,
        n_rows=len(usable),
        method=method,
        verdict="ok",
        diagnostics=diagnostics,
    )


def _wls(X: np.ndarray, y: np.ndarray, se: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w = 1.0 / se**2
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    return cov @ (WX.T @ y), cov


def _majority_method(rows: Sequence[SweepRow]) -> str:
    counts: dict[str, int] = {}
    for r in rows:
        counts[r.method] = counts.get(r.method, 0) + 1
    return max(counts, key=counts.get) if counts else "sorted_1d"


def write_plot_data(rows: Sequence[SweepRow], path: str | Path, method: Optional[str] = None) -> None:
    """log m vs log corrected W1 with CI columns, one row per sweep point."""
    if method is None and rows:
        method = _majority_method(rows)
    sel = [r for r in rows if r.method == method]
    lines = ["# log_m log_w1_corrected log_w1_lo log_w1_hi"]
    for r in sorted(sel, key=lambda r: r.m):
        cor = r.corrected()
        if cor <= 0:
            continue
        rel = r.w1_stderr / r.w1_value if np.isfinite(r.w1_stderr) and r.w1_value > 0 else 0.0
        lm, lw = math.log(r.m), math.log(cor)
        lines.append(
            f"{lm:.10g} {lw:.10g} {lw - 1.96 * rel:.10g} {lw + 1.96 * rel:.10g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# null case
# --------------------------------------------------------------------------

@dataclass
class NullCaseResult:
    m: float
    w1: float
    baseline: float
    corrected: float
    combined_se: float
    z: float
    passed: bool


def null_case_check(
    spec: ModelSpec,
    cfg: IntegratorConfig,
    m: float,
    n: int,
    plan: SweepPlan = SweepPlan(),
    master_seed: int = 0,
    threads: int = 1,
    z_max: float = 4.0,
) -> NullCaseResult:
    """Gradient drift + constant noise: the kinetic position marginal equals
    the limiting invariant measure exactly, so the corrected distance must
    be statistically indistinguishable from zero.
    """
    if not spec.constant_diffusion:
        raise ValueError("null case requires constant diffusion")
    if not spec.gradient_drift:
        raise ValueError("null case requires a drift declared as a gradient")
    d = spec.dimension
    plan = SweepPlan(
        n_samples=n, n_chains=plan.n_chains, burn_in=plan.burn_in,
        thinning=plan.thinning, limit_dt_max=plan.limit_dt_max,
        transport_method=plan.transport_method, n_proj=plan.n_proj,
        lp_subsample=plan.lp_subsample, lp_crosscheck=False,
        n_boot_stderr=plan.n_boot_stderr,
    )
    rows, failures = run_sweep(
        spec, cfg, [m], plan, table_path=None, master_seed=master_seed, threads=threads,
    )
    if failures or not rows:
        raise RuntimeError(f"null-case sweep failed: {failures}")
    row = rows[0]
    # combined error: distance stderr plus the same-magnitude baseline noise
    combined = math.sqrt(row.w1_stderr**2 + row.w1_stderr**2) if np.isfinite(row.w1_stderr) else row.w1_value
    diff = row.w1_value - row.self_baseline
    z = diff / combined if combined > 0 else math.inf
    return NullCaseResult(
        m=m,
        w1=row.w1_value,
        baseline=row.self_baseline,
        corrected=row.corrected(),
        combined_se=combined,
        z=z,
        passed=bool(z <= z_max),
    )
