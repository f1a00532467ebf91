import numpy as np
import pytest

from smallmass import make_model
from smallmass.models import ModelSpec


@pytest.fixture(scope="session")
def ou_model() -> ModelSpec:
    """b = -x, sigma = sqrt(2): the standard-normal stationary case."""
    return make_model("linear", dimension=1, rate=1.0, sigma=np.sqrt(2.0))


@pytest.fixture(scope="session")
def reference_model() -> ModelSpec:
    return make_model("reference1d")


def zero_drift_model(d: int = 1, sigma: float = 1.0) -> ModelSpec:
    """Driftless test model (declared constants are placeholders)."""
    return make_model("linear", dimension=d, rate=0.0, sigma=sigma)
