"""smallmass: a numerical laboratory for kinetic Langevin diffusions and
their small-mass limit.

Simulates the second-order system dX = Y dt, m dY = (b(X) - Y) dt + sigma(X) dB
and the limiting diffusion dX = b(X) dt + sigma(X) dB, estimates both
invariant measures, measures their 1-Wasserstein distance as the mass m
shrinks, and numerically verifies the Lyapunov, moment, and Stein-equation
regularity machinery that underpins the convergence-rate analysis.
"""
from .models import (
    KineticState,
    LimitState,
    ModelSpec,
    ProbePlan,
    TestFunction,
    make_model,
    make_test_function,
    validate_model,
)
from .integrate import IntegratorConfig, PathSample, simulate_path

__version__ = "0.1.0"

__all__ = [
    "KineticState",
    "LimitState",
    "ModelSpec",
    "ProbePlan",
    "TestFunction",
    "make_model",
    "make_test_function",
    "validate_model",
    "IntegratorConfig",
    "PathSample",
    "simulate_path",
    "__version__",
]
