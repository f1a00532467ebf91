"""Pure-numpy simulation backend.

Semantics contract shared with the compiled backend in ``_kernels.pyx``:

* chain c consumes the Philox stream ``bitgens[c]`` and nothing else;
* per step, the kinetic exponential scheme consumes 2*d standard normals in
  the order z1[0..d-1], z2[0..d-1]; the Euler schemes consume d;
* the state after ``record_steps[k]`` steps is stored in slot k;
* a non-finite state detected at a record aborts with its location.

The chains axis is vectorized here; normals are pre-drawn per chain in
step blocks so the stream layout matches the compiled backend's
chain-sequential consumption exactly.
"""
from __future__ import annotations

import numpy as np

from ._expstep import exp_step_coeffs
from .exceptions import BlowupError
from .models import ModelSpec

_BLOCK_VALUES = 1 << 22  # target normals held in memory per block


def _noise_apply(model: ModelSpec, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """sigma(x) applied to one normal block z of shape (C, d)."""
    if model.sigma_scalar is not None:
        s = np.asarray(model.sigma_scalar(x), dtype=float)
        return s[:, None] * z
    sig = np.asarray(model.diffusion(x), dtype=float)
    return np.einsum("cij,cj->ci", sig, z)


def run_chains(
    model: ModelSpec,
    scheme: str,
    m: float,
    dt: float,
    record_steps: np.ndarray,
    x0: np.ndarray,
    y0: np.ndarray | None,
    bitgens: list,
    record_velocity: bool = False,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Integrate an ensemble of chains, recording after given step counts.

    ``threads`` is accepted for signature parity; this backend is
    single-threaded numpy.
    """
    record_steps = np.asarray(record_steps, dtype=np.int64)
    if record_steps.size == 0 or record_steps[0] < 1 or np.any(np.diff(record_steps) <= 0):
        raise ValueError("record_steps must be ascending positive step counts")
    x = np.array(x0, dtype=float, order="C")
    C, d = x.shape
    kinetic = scheme in ("kinetic_exponential", "kinetic_euler")
    if kinetic:
        y = np.array(y0, dtype=float, order="C")
    else:
        y = None
    nz = 2 if scheme == "kinetic_exponential" else 1
    n_steps = int(record_steps[-1])
    nrec = record_steps.size

    xs = np.empty((nrec, C, d))
    ys = np.empty((nrec, C, d)) if (kinetic and record_velocity) else None

    if scheme == "kinetic_exponential":
        co = exp_step_coeffs(dt, m)
        me1, wxb, e1, decay = m * co.e1, co.wxb, co.e1, co.decay
        l11, l21, l22 = co.l11, co.l21, co.l22
    sqrt_dt = np.sqrt(dt)

    gens = [np.random.Generator(bg) for bg in bitgens]
    block = max(1, min(4096, _BLOCK_VALUES // max(1, C * nz * d)))
    z_buf = np.empty((C, block, nz, d))

    ri = 0
    step = 0
    # overflow during a blow-up is expected; it is reported via BlowupError
    with np.errstate(over="ignore", invalid="ignore"):
        while step < n_steps:
            nb = min(block, n_steps - step)
            for c, g in enumerate(gens):
                z_buf[c, :nb] = g.standard_normal((nb, nz, d))
            for k in range(nb):
                if scheme == "kinetic_exponential":
                    b = np.asarray(model.drift(x), dtype=float)
                    sz1 = _noise_apply(model, x, z_buf[:, k, 0])
                    sz2 = _noise_apply(model, x, z_buf[:, k, 1])
                    xn = x + me1 * y + wxb * b + l11 * sz1
                    y = decay * y + e1 * b + (l21 * sz1 + l22 * sz2)
                    x = xn
                elif scheme == "kinetic_euler":
                    b = np.asarray(model.drift(x), dtype=float)
                    sz = _noise_apply(model, x, z_buf[:, k, 0])
                    xn = x + dt * y
                    y = y + (dt / m) * (b - y) + (sqrt_dt / m) * sz
                    x = xn
                else:  # limit_euler
                    b = np.asarray(model.drift(x), dtype=float)
                    sz = _noise_apply(model, x, z_buf[:, k, 0])
                    x = x + dt * b + sqrt_dt * sz
                step += 1
                if ri < nrec and step == record_steps[ri]:
                    xs[ri] = x
                    if ys is not None:
                        ys[ri] = y
                    bad = ~np.isfinite(x).all(axis=1)
                    if bad.any():
                        c_bad = int(np.flatnonzero(bad)[0])
                        raise BlowupError(
                            f"non-finite state in chain {c_bad} at step {step} "
                            f"(t={step * dt:.6g}, scheme={scheme})"
                        )
                    ri += 1
    return xs, ys
