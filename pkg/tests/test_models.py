"""Model specifications, assumption validation, Lyapunov function, generators."""
import dataclasses

import numpy as np
import pytest

from smallmass import make_model, validate_model
from smallmass.exceptions import ModelEvaluationError
from smallmass.models import (
    KineticState,
    LimitState,
    ModelSpec,
    ProbePlan,
    TestFunction,
    admissible_mass_bound,
    generator_kinetic_apply,
    generator_limit_apply,
    kinetic_lyapunov_drift_values,
    lyapunov_vm,
    lyapunov_vm_values,
    make_test_function,
)

from conftest import zero_drift_model


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

class TestValidation:
    def test_linear_model_passes_exactly(self, ou_model):
        report = validate_model(ou_model)
        assert report.passed
        for check in report.checks:
            assert check.margin <= 1e-12

    def test_expanding_drift_fails_dissipativity(self):
        bad = make_model("linear", dimension=1, rate=-1.0)  # b(x) = +x, declared c2 = 1
        report = validate_model(bad)
        assert not report.passed
        by_name = {c.name: c for c in report.checks}
        assert not by_name["dissipativity"].passed
        assert by_name["dissipativity"].margin > 0

    def test_reference_model_constants_hold_on_grid(self, reference_model):
        # independent oracle: dense grid maximization of each margin on |x| <= 20
        x = np.linspace(-20, 20, 200_001)
        b = reference_model.drift_1d(x)
        s = reference_model.sigma_1d(x)
        spec = reference_model
        # dissipativity margin
        dis = x * b - spec.dissipative_c1 + spec.dissipative_c2 * x * x
        assert dis.max() <= 1e-12
        # growth margin
        grow = b * b - spec.growth_Lb * (1 + x * x)
        assert grow.max() <= 1e-12
        # Lipschitz via finite differences of b and sigma
        lip = (np.abs(np.diff(b)) + np.abs(np.diff(s))) / np.diff(x)
        assert lip.max() <= spec.lipschitz_L + 1e-9
        # ellipticity / sup
        assert s.min() ** 2 >= spec.ellipticity_sigma0 - 1e-12
        assert s.max() <= spec.sigma_sup + 1e-12
        assert validate_model(spec).passed

    def test_all_registry_families_validate(self):
        for family in ("linear", "reference1d", "well1d", "curl2d", "rotlinear2d"):
            spec = make_model(family)
            assert validate_model(spec).passed, family

    def test_understated_dissipativity_constant_is_caught(self, reference_model):
        # the cosine kick needs c1 >= cos_amp^2/2; declaring nearly zero fails
        lying = dataclasses.replace(reference_model, dissipative_c1=1e-4)
        report = validate_model(lying)
        by_name = {c.name: c for c in report.checks}
        assert not by_name["dissipativity"].passed

    def test_nonfinite_drift_reports_point(self):
        spec = dataclasses.replace(
            make_model("linear"),
            drift=lambda x: np.where(np.abs(x) > 5, np.nan, -x),
        )
        with pytest.raises(ModelEvaluationError, match="drift"):
            validate_model(spec)

    def test_probe_plan_validates(self):
        with pytest.raises(ValueError):
            ProbePlan(count=0)
        with pytest.raises(ValueError):
            ProbePlan(radius=-1.0)


# --------------------------------------------------------------------------
# Lyapunov function
# --------------------------------------------------------------------------

class TestLyapunov:
    def test_vanishes_at_origin(self):
        assert lyapunov_vm(KineticState(x=[0.0], y=[0.0], m=0.7)) == 0.0

    def test_unit_position_value(self):
        assert lyapunov_vm(KineticState(x=[1.0], y=[0.0], m=1.0)) == pytest.approx(2.0)

    def test_sandwich_inequality(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            d = rng.integers(1, 4)
            x = rng.standard_normal(d) * 3
            y = rng.standard_normal(d) * 5
            m = float(rng.uniform(1e-4, 1.0))
            v = lyapunov_vm(KineticState(x=x, y=y, m=m))
            mid = float(x @ x + m * m * (y @ y))
            assert 0.0 <= v / 8.0 <= mid + 1e-12
            assert mid <= v + 1e-12

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((50, 2))
        y = rng.standard_normal((50, 2))
        vals = lyapunov_vm_values(x, y, 0.3)
        for i in range(50):
            assert vals[i] == pytest.approx(lyapunov_vm(KineticState(x=x[i], y=y[i], m=0.3)))


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

class TestGenerators:
    def test_velocity_projection_observable(self, ou_model):
        # g(x, y) = <y, v>: only the velocity-gradient term survives
        v = np.array([0.7])
        state = KineticState(x=[1.3], y=[-0.4], m=0.5)
        got = generator_kinetic_apply(ou_model, lambda x, y: float(y @ v), state)
        b = -state.x
        expect = float((b - state.y) @ v) / state.m
        assert got == pytest.approx(expect, rel=1e-6)

    def test_lyapunov_image_known_value(self, ou_model):
        # V_m at (x=1, y=1, m=1) for b=-x, sigma=sqrt(2):
        # -8m|y|^2 + 12m<b,y> + 4<b,x> + 6||sigma||^2 = -8-12-4+12 = -12
        state = KineticState(x=[1.0], y=[1.0], m=1.0)
        g = lambda x, y: float(2 * x @ x + 6 * y @ y + 4 * x @ y)
        assert generator_kinetic_apply(ou_model, g, state) == pytest.approx(-12.0, rel=1e-5)

    def test_pure_transport_term(self):
        spec = zero_drift_model()
        state = KineticState(x=[1.5], y=[2.0], m=0.3)
        got = generator_kinetic_apply(spec, lambda x, y: float(x @ x), state)
        assert got == pytest.approx(2 * 1.5 * 2.0, rel=1e-6)

    def test_closed_form_drift_matches_generic_application(self, reference_model):
        rng = np.random.default_rng(11)
        for _ in range(25):
            x = rng.standard_normal(1) * 4
            y = rng.standard_normal(1) * 6
            m = float(rng.uniform(0.05, 0.5))
            state = KineticState(x=x, y=y, m=m)
            g = lambda xx, yy: float(2 * xx @ xx + 6 * m * m * yy @ yy + 4 * m * xx @ yy)
            generic = generator_kinetic_apply(reference_model, g, state)
            closed = float(kinetic_lyapunov_drift_values(reference_model, x[None], y[None], m)[0])
            assert generic == pytest.approx(closed, rel=2e-4, abs=1e-6)

    def test_limit_quadratic_known_value(self, ou_model):
        # A(1+|x|^2) = 2<b,x> + ||sigma||^2 = -8 + 2 at x = 2
        got = generator_limit_apply(ou_model, lambda x: float(1 + x @ x), LimitState(x=[2.0]))
        assert got == pytest.approx(-6.0, rel=1e-6)

    def test_limit_constant_observable_is_zero(self, reference_model):
        got = generator_limit_apply(reference_model, lambda x: 3.14, LimitState(x=[1.0]))
        assert got == pytest.approx(0.0, abs=1e-8)

    def test_finite_differences_agree_with_analytic(self, reference_model):
        # random smooth observable with hand derivatives
        def g(x):
            return float(np.sin(x[0]) + 0.1 * x[0] ** 2)

        def grad(x):
            return np.array([np.cos(x[0]) + 0.2 * x[0]])

        def hess(x):
            return np.array([[-np.sin(x[0]) + 0.2]])

        rng = np.random.default_rng(3)
        for _ in range(20):
            state = LimitState(x=rng.standard_normal(1) * 3)
            fd = generator_limit_apply(reference_model, g, state)
            an = generator_limit_apply(reference_model, g, state, grad=grad, hess=hess)
            assert fd == pytest.approx(an, rel=1e-6, abs=1e-8)


# --------------------------------------------------------------------------
# mass bound, states, test functions
# --------------------------------------------------------------------------

def test_admissible_mass_bound(ou_model):
    # min{c2/(2 Lb), 2/c2, 1} = min{1/2, 2, 1}
    assert admissible_mass_bound(ou_model) == pytest.approx(0.5)
    assert admissible_mass_bound(ou_model, one_dimensional_rate=False) == pytest.approx(
        1 / np.e
    )


def test_states_reject_bad_input():
    with pytest.raises(ValueError):
        KineticState(x=[0.0], y=[0.0], m=0.0)
    with pytest.raises(ValueError):
        KineticState(x=[np.inf], y=[0.0], m=1.0)
    with pytest.raises(ValueError):
        LimitState(x=[np.nan])


class TestTestFunctions:
    def test_builtin_membership(self):
        pts = np.linspace(-8, 8, 400)
        for name in ("identity", "tanh", "smooth_abs"):
            assert make_test_function(name).check_membership(pts), name

    def test_lipschitz_violation_detected(self):
        h = TestFunction(h=lambda x: 2.0 * np.asarray(x), lipschitz_bound=1.0)
        assert not h.check_membership(np.linspace(-1, 1, 50))

    def test_nonzero_origin_detected(self):
        h = TestFunction(h=lambda x: np.asarray(x) + 1.0, lipschitz_bound=1.0)
        assert not h.check_membership(np.linspace(-1, 1, 50))

    def test_unknown_name_raises(self):
        with pytest.raises(KeyError, match="unknown test function"):
            make_test_function("nope")


def test_unknown_family_raises():
    with pytest.raises(KeyError, match="unknown model family"):
        make_model("nope")


def test_constants_must_be_positive():
    with pytest.raises(ValueError):
        dataclasses.replace(make_model("linear"), dissipative_c2=-1.0)
