"""Sweep orchestration, rate fitting, and the null-case oracle."""
import numpy as np
import pytest

from smallmass import make_model
from smallmass.integrate import IntegratorConfig
from smallmass.ratelab import (
    NullCaseResult,
    RateFitResult,
    SweepPlan,
    SweepRow,
    fit_rate,
    load_rows,
    null_case_check,
    run_sweep,
    save_rows,
    write_plot_data,
)

CFG = IntegratorConfig()
TINY_PLAN = SweepPlan(n_samples=4000, n_chains=64, limit_dt_max=5e-3, n_boot_stderr=16)


def _synthetic_rows(values_fn, ms=None, rel_se=1e-4):
    ms = ms or [2.0**-k for k in range(4, 10)]
    return [
        SweepRow(
            m=m, w1_value=values_fn(m), w1_stderr=rel_se * values_fn(m),
            self_baseline=0.0, n_samples=10**6, method="sorted_1d",
            seed=0, wallclock=0.0,
        )
        for m in ms
    ]


class TestFitRate:
    def test_exact_square_root_scaling(self):
        fit = fit_rate(_synthetic_rows(np.sqrt))
        assert fit.slope == pytest.approx(0.5, abs=1e-6)
        assert fit.ci95[0] <= 0.5 <= fit.ci95[1]
        fit_log = fit_rate(_synthetic_rows(np.sqrt), with_log_correction=True)
        assert fit_log.slope == pytest.approx(0.5, abs=1e-4)
        assert abs(fit_log.log_coef) < 1e-3

    def test_exact_linear_scaling(self):
        fit = fit_rate(_synthetic_rows(lambda m: m))
        assert fit.slope == pytest.approx(1.0, abs=1e-6)

    def test_log_corrected_recovery(self):
        fit = fit_rate(
            _synthetic_rows(lambda m: np.sqrt(m) * abs(np.log(m))),
            with_log_correction=True,
        )
        assert abs(fit.slope - 0.5) < 0.05
        assert abs(fit.log_coef - 1.0) < 0.2

    def test_all_zero_corrected_yields_verdict(self):
        rows = [
            SweepRow(m=m, w1_value=0.001, w1_stderr=1e-4, self_baseline=0.002,
                     n_samples=100, method="sorted_1d", seed=0, wallclock=0.0)
            for m in (0.1, 0.05, 0.025, 0.0125)
        ]
        fit = fit_rate(rows)
        assert fit.verdict == "indistinguishable_from_zero"

    def test_too_few_positive_rows_refused(self):
        rows = _synthetic_rows(np.sqrt, ms=[0.1, 0.05, 0.025])
        with pytest.raises(ValueError, match=">= 4"):
            fit_rate(rows)

    def test_bootstrap_ci_deterministic(self):
        rows = _synthetic_rows(np.sqrt, rel_se=0.05)
        a = fit_rate(rows, master_seed=5)
        b = fit_rate(rows, master_seed=5)
        assert a.ci95 == b.ci95


class TestRunSweep:
    def test_empty_grid_rejected(self, ou_model):
        with pytest.raises(ValueError, match="nonempty"):
            run_sweep(ou_model, CFG, [], TINY_PLAN)

    def test_mass_outside_range_rejected(self, ou_model):
        with pytest.raises(ValueError, match="admissible"):
            run_sweep(ou_model, CFG, [0.9], TINY_PLAN)

    def test_deterministic_given_seed(self, ou_model):
        ms = [0.25, 0.125]
        rows1, f1 = run_sweep(ou_model, CFG, ms, TINY_PLAN, master_seed=3, threads=2)
        rows2, f2 = run_sweep(ou_model, CFG, ms, TINY_PLAN, master_seed=3, threads=2)
        assert not f1 and not f2
        for a, b in zip(rows1, rows2):
            assert a.w1_value == b.w1_value
            assert a.w1_stderr == b.w1_stderr
            assert a.self_baseline == b.self_baseline

    def test_resume_skips_completed_rows(self, ou_model, tmp_path):
        table = tmp_path / "table.csv"
        ms = [0.25, 0.125, 0.0625]
        rows1, _ = run_sweep(ou_model, CFG, ms[:2], TINY_PLAN, table_path=table,
                             master_seed=4, threads=2)
        text_after_first = table.read_text()
        rows2, _ = run_sweep(ou_model, CFG, ms, TINY_PLAN, table_path=table,
                             master_seed=4, threads=2)
        text_after_second = table.read_text()
        # previously computed rows are byte-identical prefixes of the table
        assert text_after_second.startswith(text_after_first)
        assert len(rows2) == 3
        done = {f"{r.m:.12g}" for r in rows1}
        kept = [r for r in rows2 if f"{r.m:.12g}" in done]
        for a, b in zip(sorted(rows1, key=lambda r: r.m), sorted(kept, key=lambda r: r.m)):
            assert a.w1_value == b.w1_value

    def test_rows_roundtrip_through_csv(self, tmp_path):
        rows = _synthetic_rows(np.sqrt)
        path = tmp_path / "rows.csv"
        save_rows(rows, path, append=False)
        back = load_rows(path)
        assert len(back) == len(rows)
        for a, b in zip(rows, back):
            assert a.m == b.m and a.w1_value == b.w1_value

    def test_plot_data_written(self, tmp_path):
        rows = _synthetic_rows(np.sqrt)
        out = tmp_path / "plot.dat"
        write_plot_data(rows, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("#")
        assert len(lines) == 1 + len(rows)

    def test_d2_carries_both_methods(self):
        spec = make_model("rotlinear2d")
        plan = SweepPlan(n_samples=2000, n_chains=64, limit_dt_max=5e-3,
                         n_proj=16, lp_subsample=256)
        rows, failures = run_sweep(spec, CFG, [0.2, 0.1], plan, master_seed=6, threads=2)
        assert not failures
        methods = {r.method for r in rows}
        assert methods == {"sliced", "assignment_lp"}


class TestNullCase:
    def test_preconditions(self, reference_model):
        with pytest.raises(ValueError, match="constant diffusion"):
            null_case_check(reference_model, CFG, 0.1, 100)
        rot = make_model("rotlinear2d")
        with pytest.raises(ValueError, match="gradient"):
            null_case_check(rot, CFG, 0.1, 100)

    def test_linear_model_passes(self, ou_model):
        res = null_case_check(ou_model, CFG, 0.25, 20_000, plan=TINY_PLAN,
                              master_seed=8, threads=2)
        assert isinstance(res, NullCaseResult)
        assert res.passed
        assert res.corrected <= 3 * res.baseline

    def test_saturating_well_passes(self):
        spec = make_model("well1d")
        res = null_case_check(spec, CFG, 0.2, 20_000, plan=TINY_PLAN,
                              master_seed=9, threads=2)
        assert res.passed

    def test_radial_2d_passes_with_assignment(self):
        # d = 2 gradient drift: check on subsampled clouds via the exact LP
        spec = make_model("linear", dimension=2, rate=1.0, sigma=1.0)
        plan = SweepPlan(n_samples=2048, n_chains=64, limit_dt_max=5e-3,
                         transport_method="sliced", n_proj=32, lp_subsample=2048)
        res = null_case_check(spec, CFG, 0.25, 2048, plan=plan, master_seed=10,
                              threads=2)
        assert res.passed
