"""Stepping schemes: exactness, stability, covariance oracle, weak order."""
import dataclasses
import math

import numpy as np
import pytest

from smallmass import make_model
from smallmass._expstep import exp_step_coeffs
from smallmass.exceptions import StabilityError
from smallmass.integrate import (
    IntegratorConfig,
    PathSample,
    save_path,
    simulate_path,
    step_kinetic_euler,
    step_kinetic_exponential,
    step_limit_euler,
)
from smallmass.models import KineticState, LimitState
from smallmass import backend

from conftest import zero_drift_model


def _noiseless(spec):
    d = spec.dimension
    return dataclasses.replace(
        spec,
        diffusion=lambda x: np.zeros(np.asarray(x).shape[:-1] + (d, d)),
        sigma_scalar=lambda x: np.zeros(np.asarray(x).shape[:-1]),
        kernel=None,  # force the generic python path
    )


class TestExponentialStep:
    def test_free_decay(self):
        # b = 0, sigma = 0: x -> x + m y (1 - e^{-dt/m}), y -> y e^{-dt/m}
        spec = _noiseless(zero_drift_model())
        m, dt = 0.2, 0.05
        s = KineticState(x=[1.0], y=[3.0], m=m)
        rng = np.random.default_rng(0)
        out = step_kinetic_exponential(spec, s, dt, rng)
        e1 = -math.expm1(-dt / m)
        assert out.x[0] == pytest.approx(1.0 + m * 3.0 * e1, rel=1e-14)
        assert out.y[0] == pytest.approx(3.0 * math.exp(-dt / m), rel=1e-14)

    def test_constant_drift_matches_exact_ode(self):
        # xdot = y, m ydot = b - y with constant b: exact over many steps
        bval = 0.8
        spec = dataclasses.replace(
            _noiseless(zero_drift_model()),
            drift=lambda x: np.full_like(np.asarray(x, dtype=float), bval),
        )
        m, dt, nsteps = 0.3, 0.07, 9
        s = KineticState(x=[0.5], y=[-1.0], m=m)
        rng = np.random.default_rng(0)
        for _ in range(nsteps):
            s = step_kinetic_exponential(spec, s, dt, rng)
        t = nsteps * dt
        y_exact = bval + (-1.0 - bval) * math.exp(-t / m)
        x_exact = 0.5 + bval * t + m * (-1.0 - bval) * (1 - math.exp(-t / m))
        assert s.y[0] == pytest.approx(y_exact, rel=1e-12)
        assert s.x[0] == pytest.approx(x_exact, rel=1e-12)

    def test_frozen_coefficient_one_step_mean(self, reference_model):
        # with noise off, one step must match the frozen-b closed form to 1e-12
        spec = _noiseless(reference_model)
        m, dt = 0.1, 0.02
        x0, y0 = 0.7, -1.1
        s = step_kinetic_exponential(spec, KineticState(x=[x0], y=[y0], m=m), dt,
                                     np.random.default_rng(0))
        co = exp_step_coeffs(dt, m)
        b0 = float(spec.drift_1d(np.array([x0]))[0])
        assert s.x[0] == pytest.approx(x0 + m * co.e1 * y0 + co.wxb * b0, rel=1e-12)
        assert s.y[0] == pytest.approx(co.decay * y0 + co.e1 * b0, rel=1e-12)

    def test_rejects_bad_dt(self, ou_model):
        s = KineticState(x=[0.0], y=[0.0], m=0.1)
        with pytest.raises(ValueError):
            step_kinetic_exponential(ou_model, s, 0.0, np.random.default_rng(0))

    def test_stable_at_vanishing_mass(self, reference_model):
        # no mass-CFL restriction: tiny m with dt = dt_max stays finite
        cfg = IntegratorConfig(scheme="kinetic_exponential", dt_max=1e-2, mass_cfl=1.0)
        s0 = KineticState(x=[0.3], y=[5.0], m=1e-6)
        path = simulate_path(reference_model, cfg, s0, horizon=10.0, record_stride=100,
                             master_seed=4)
        assert np.all(np.isfinite(path.xs))
        assert np.all(np.isfinite(path.ys))

    def test_noise_covariance_against_fine_euler(self):
        """Exact joint (dx, dy) covariance vs a fine-step Euler-Maruyama
        Monte Carlo oracle (Richardson-extrapolated in the fine step to
        remove its first-order bias), n = 1e6 paths each."""
        m, dt, sigma = 0.1, 0.05, 1.0
        spec = zero_drift_model(sigma=sigma)
        n = 1_000_000

        def euler_cov(dt_fine):
            steps = int(round(dt / dt_fine))
            xs, ys = backend.run_chains(
                spec, "kinetic_euler", m, dt_fine,
                np.asarray([steps], dtype=np.int64),
                np.zeros((n, 1)), np.zeros((n, 1)),
                master_seed=1234, run_path=(int(1 / dt_fine),),
                record_velocity=True, threads=2,
            )
            x, y = xs[-1][:, 0], ys[-1][:, 0]
            c = np.cov(np.vstack([x, y]))
            return c

        c1 = euler_cov(m / 200)
        c2 = euler_cov(m / 400)
        cov = 2 * c2 - c1  # kills the O(dt_fine) weak bias
        co = exp_step_coeffs(dt, m)
        exact = np.array([[co.cxx, co.cxy], [co.cxy, co.cyy]])
        # se of a variance estimate ~ var * sqrt(2/n); extrapolation widens by sqrt(5)
        for i in range(2):
            for j in range(2):
                scale = math.sqrt(exact[i, i] * exact[j, j])
                se = scale * math.sqrt((2 if i == j else 1) / n) * math.sqrt(5)
                assert abs(cov[i, j] - exact[i, j]) < 3 * se, (i, j)


class TestKineticEuler:
    def test_velocity_damping_single_step(self):
        spec = _noiseless(zero_drift_model())
        m, dt = 0.4, 0.1
        s = step_kinetic_euler(spec, KineticState(x=[0.0], y=[2.0], m=m), dt,
                               np.random.default_rng(0))
        assert s.y[0] == pytest.approx(2.0 * (1 - dt / m), rel=1e-14)

    def test_stability_precondition(self, ou_model):
        s = KineticState(x=[0.0], y=[0.0], m=0.1)
        with pytest.raises(StabilityError):
            step_kinetic_euler(ou_model, s, dt=0.2, rng=np.random.default_rng(0), mass_cfl=1.0)

    def test_deterministic_part_agrees_with_exponential_to_second_order(self, reference_model):
        spec = _noiseless(reference_model)
        m = 0.2
        x0, y0 = 0.9, -0.7
        diffs = []
        for dt in (m / 10, m / 20, m / 40):
            s0 = KineticState(x=[x0], y=[y0], m=m)
            a = step_kinetic_exponential(spec, s0, dt, np.random.default_rng(0))
            b = step_kinetic_euler(spec, s0, dt, np.random.default_rng(0))
            diffs.append(abs(a.y[0] - b.y[0]) + abs(a.x[0] - b.x[0]))
        # one-step difference is O(dt^2): halving dt shrinks it ~4x
        assert diffs[0] / diffs[1] == pytest.approx(4.0, rel=0.3)
        assert diffs[1] / diffs[2] == pytest.approx(4.0, rel=0.3)


class TestLimitEuler:
    def test_contraction_single_step(self, ou_model):
        spec = _noiseless(ou_model)
        s = step_limit_euler(spec, LimitState(x=[2.0]), 0.25, np.random.default_rng(0))
        assert s.x[0] == pytest.approx(2.0 * (1 - 0.25), rel=1e-14)

    def test_fixed_point_stays(self):
        spec = _noiseless(zero_drift_model())
        s = step_limit_euler(spec, LimitState(x=[0.0]), 0.1, np.random.default_rng(0))
        assert s.x[0] == 0.0

    def test_ou_stationary_variance(self, ou_model):
        # long trajectory of the limit chain: Var -> 1 within 2%
        cfg = IntegratorConfig(scheme="limit_euler", dt_max=5e-3)
        path = simulate_path(ou_model, cfg, LimitState(x=[0.0]), horizon=60_000.0,
                             record_stride=100, master_seed=9)
        var = float(np.var(path.xs[200:]))
        assert abs(var - 1.0) < 0.02


class TestSimulatePath:
    def test_zero_horizon_returns_initial_state(self, ou_model):
        cfg = IntegratorConfig()
        s0 = KineticState(x=[1.0], y=[2.0], m=0.25)
        path = simulate_path(ou_model, cfg, s0, horizon=0.0, master_seed=1)
        assert len(path.times) == 1
        assert path.xs[0, 0] == 1.0 and path.ys[0, 0] == 2.0

    def test_same_seed_reproduces_bitwise(self, reference_model):
        cfg = IntegratorConfig(rng_seed=77)
        s0 = KineticState(x=[0.1], y=[0.0], m=0.125)
        p1 = simulate_path(reference_model, cfg, s0, horizon=5.0, record_stride=7)
        p2 = simulate_path(reference_model, cfg, s0, horizon=5.0, record_stride=7)
        assert np.array_equal(p1.xs, p2.xs)
        assert np.array_equal(p1.ys, p2.ys)

    def test_cross_scheme_weak_agreement(self, reference_model):
        # E[X_T^2] under both kinetic schemes at dt = m/20 within 3 combined se
        m, T, n = 0.25, 4.0, 60_000
        out = {}
        for scheme in ("kinetic_exponential", "kinetic_euler"):
            dt = m / 20
            steps = int(round(T / dt))
            xs, _ = backend.run_chains(
                reference_model, scheme, m, dt, np.asarray([steps], dtype=np.int64),
                np.full((n, 1), 0.4), np.zeros((n, 1)),
                master_seed=5, run_path=(hash(scheme) % 1000,), threads=2,
            )
            v = xs[-1][:, 0] ** 2
            out[scheme] = (v.mean(), v.std(ddof=1) / math.sqrt(n))
        (m1, s1), (m2, s2) = out.values()
        assert abs(m1 - m2) < 3 * math.hypot(s1, s2)

    def test_weak_order_on_drift(self, reference_model):
        # noiseless runs isolate the freezing bias: halving dt halves the error
        spec = _noiseless(reference_model)
        m, T = 0.25, 2.0
        vals = []
        for k in (5, 10, 20, 40):
            dt = m / k
            cfg = IntegratorConfig(dt_max=dt, mass_cfl=1.0)
            path = simulate_path(spec, cfg, KineticState(x=[1.2], y=[0.5], m=m),
                                 horizon=T, record_stride=10**9, master_seed=0)
            vals.append(path.xs[-1, 0] ** 2)
        diffs = np.abs(np.diff(vals))
        assert diffs[0] / diffs[1] >= 1.5
        assert diffs[1] / diffs[2] >= 1.5

    def test_csv_roundtrip(self, tmp_path, ou_model):
        cfg = IntegratorConfig()
        s0 = KineticState(x=[0.0], y=[1.0], m=0.25)
        path = simulate_path(ou_model, cfg, s0, horizon=1.0, record_stride=5, master_seed=2)
        csv_path, json_path = save_path(path, tmp_path / "traj")
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
        assert data.shape[1] == 3  # t, x_1, y_1
        np.testing.assert_allclose(data[:, 0], path.times)
        np.testing.assert_allclose(data[:, 1], path.xs[:, 0])
        assert json_path.exists()

    def test_path_sample_rejects_bad_times(self):
        with pytest.raises(ValueError):
            PathSample(
                times=np.array([0.0, 0.0]),
                xs=np.zeros((2, 1)),
                ys=None,
                scheme="limit_euler",
                m=None,
            )
