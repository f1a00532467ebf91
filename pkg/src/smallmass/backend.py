"""Backend selection: compiled extension core with pure-numpy fallback.

At import time the package tries to load the Cython extension; if that
fails (no compiler at install time, pure-source checkout) everything runs
on the numpy backend with identical semantics and random streams.  The two
backends are cross-validated in the test suite and compared for throughput
by ``smallmass bench``.
"""
from __future__ import annotations

import numpy as np

from . import _kernels_py
from . import rng as _rng
from .models import ModelSpec

try:  # pragma: no cover - exercised indirectly
    from . import _kernels  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover
    _kernels = None
    HAVE_COMPILED = False

_FORCED: str | None = None


def active_backend() -> str:
    if _FORCED is not None:
        return _FORCED
    return "compiled" if HAVE_COMPILED else "python"


def force_backend(name: str | None) -> None:
    """Pin the backend ('compiled' | 'python' | None for auto).

    Intended for tests and benchmarks; simulation results are statistically
    identical either way because both backends consume the same per-chain
    streams.
    """
    global _FORCED
    if name not in (None, "compiled", "python"):
        raise ValueError("backend must be 'compiled', 'python', or None")
    if name == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled backend requested but the extension is not available")
    _FORCED = name


def kernel_supported(model: ModelSpec, backend: str) -> bool:
    if backend != "compiled":
        return False
    return (
        HAVE_COMPILED
        and model.kernel is not None
        and model.dimension <= 4
        and model.sigma_scalar is not None
    )


def run_chains(
    model: ModelSpec,
    scheme: str,
    m: float,
    dt: float,
    record_steps: np.ndarray,
    x0: np.ndarray,
    y0: np.ndarray | None,
    master_seed: int,
    run_path: tuple[int, ...],
    record_velocity: bool = False,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Integrate an ensemble with per-chain streams derived from the seed tree.

    Returns (positions, velocities-or-None) of shape (n_records, n_chains, d).
    """
    C = int(np.asarray(x0).shape[0])
    bitgens = _rng.chain_bit_generators(master_seed, run_path, C)
    backend = active_backend()
    if kernel_supported(model, backend):
        return _kernels.run_chains(
            model.kernel.family_id,
            model.kernel.params,
            scheme,
            float(m if m is not None else 0.0),
            float(dt),
            np.asarray(record_steps, dtype=np.int64),
            np.asarray(x0, dtype=float),
            None if y0 is None else np.asarray(y0, dtype=float),
            bitgens,
            record_velocity,
            int(threads),
        )
    return _kernels_py.run_chains(
        model,
        scheme,
        float(m if m is not None else 0.0),
        float(dt),
        np.asarray(record_steps, dtype=np.int64),
        np.asarray(x0, dtype=float),
        None if y0 is None else np.asarray(y0, dtype=float),
        bitgens,
        record_velocity,
        int(threads),
    )
