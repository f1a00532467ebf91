# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simulation backend.

Hot chain-stepping loops for the built-in model families, one Philox
stream per chain, OpenMP-parallel across chains.  Stream layout and
record semantics are contract-identical to ``_kernels_py.run_chains``;
see that module's docstring.
"""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from cython.parallel cimport prange
from libc.math cimport cos, exp, isfinite, sin, sqrt, tanh
from libc.stdint cimport int64_t, uint64_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

from ._expstep import exp_step_coeffs
from .exceptions import BlowupError

MAX_DIM = 4

SCHEME_KEXP = 1
SCHEME_KEULER = 2
SCHEME_LEULER = 3

_SCHEME_CODES = {
    "kinetic_exponential": SCHEME_KEXP,
    "kinetic_euler": SCHEME_KEULER,
    "limit_euler": SCHEME_LEULER,
}

# family ids mirror smallmass.models.FAMILY_*
DEF FAM_LINEAR = 1
DEF FAM_REFERENCE1D = 2
DEF FAM_WELL1D = 3
DEF FAM_CURL2D = 4
DEF FAM_ROTLINEAR2D = 5


cdef inline void _drift(int fam, const double* p, int d, const double* x, double* out) noexcept nogil:
    cdef int j
    if fam == FAM_LINEAR:
        for j in range(d):
            out[j] = -p[0] * x[j]
    elif fam == FAM_REFERENCE1D:
        out[0] = -x[0] + p[0] * cos(x[0])
    elif fam == FAM_WELL1D:
        out[0] = -x[0] - p[0] * tanh(x[0])
    elif fam == FAM_CURL2D:
        out[0] = -x[0] + p[0] * sin(x[1])
        out[1] = -x[1] + p[0] * cos(x[0])
    elif fam == FAM_ROTLINEAR2D:
        out[0] = -p[0] * x[0] + p[1] * x[1]
        out[1] = -p[1] * x[0] - p[0] * x[1]


cdef inline double _sigma(int fam, const double* p, const double* x) noexcept nogil:
    if fam == FAM_LINEAR:
        return p[1]
    elif fam == FAM_REFERENCE1D:
        return p[1] + p[2] / (1.0 + x[0] * x[0])
    elif fam == FAM_WELL1D:
        return p[1]
    elif fam == FAM_CURL2D:
        return p[1]
    elif fam == FAM_ROTLINEAR2D:
        return p[2]
    return 0.0


cdef int64_t _chain_run(
    bitgen_t* bg,
    int scheme,
    int fam,
    const double* p,
    int d,
    double m,
    double dt,
    # exponential-scheme constants (unused by the Euler schemes)
    double decay, double e1, double me1, double wxb,
    double l11, double l21, double l22,
    const int64_t* rec_steps,
    Py_ssize_t nrec,
    double* x,
    double* y,
    double* recx,
    double* recy,
    Py_ssize_t rec_stride,
) noexcept nogil:
    """Advance one chain to rec_steps[nrec-1]; returns 0 or the step of a
    non-finite record."""
    cdef double b[4]
    cdef double z1[4]
    cdef double z2[4]
    cdef double s, xn
    cdef double sqrt_dt = sqrt(dt)
    cdef int64_t step, nsteps = rec_steps[nrec - 1]
    cdef Py_ssize_t ri = 0
    cdef int j, ok
    for step in range(1, nsteps + 1):
        _drift(fam, p, d, x, b)
        s = _sigma(fam, p, x)
        for j in range(d):
            z1[j] = random_standard_normal(bg)
        if scheme == 1:  # kinetic exponential
            for j in range(d):
                z2[j] = random_standard_normal(bg)
            for j in range(d):
                xn = x[j] + me1 * y[j] + wxb * b[j] + l11 * s * z1[j]
                y[j] = decay * y[j] + e1 * b[j] + s * (l21 * z1[j] + l22 * z2[j])
                x[j] = xn
        elif scheme == 2:  # kinetic Euler-Maruyama
            for j in range(d):
                xn = x[j] + dt * y[j]
                y[j] = y[j] + (dt / m) * (b[j] - y[j]) + (sqrt_dt / m) * s * z1[j]
                x[j] = xn
        else:  # limit Euler-Maruyama
            for j in range(d):
                x[j] = x[j] + dt * b[j] + sqrt_dt * s * z1[j]
        if ri < nrec and step == rec_steps[ri]:
            ok = 1
            for j in range(d):
                recx[ri * rec_stride + j] = x[j]
                if recy != NULL:
                    recy[ri * rec_stride + j] = y[j]
                if not isfinite(x[j]):
                    ok = 0
            if not ok:
                return step
            ri += 1
    return 0


def run_chains(
    int family_id,
    params,
    str scheme,
    double m,
    double dt,
    record_steps,
    x0,
    y0,
    bitgens,
    bint record_velocity=False,
    int threads=1,
):
    """Integrate all chains; mirrors ``_kernels_py.run_chains``."""
    cdef int sch = _SCHEME_CODES[scheme]
    cdef cnp.ndarray[double, ndim=2, mode="c"] x = np.array(x0, dtype=np.float64, order="C")
    cdef Py_ssize_t C = x.shape[0]
    cdef int d = <int> x.shape[1]
    if d > MAX_DIM:
        raise ValueError(f"compiled kernel supports dimension <= {MAX_DIM}")
    cdef cnp.ndarray[double, ndim=2, mode="c"] yv
    kinetic = scheme != "limit_euler"
    if kinetic:
        yv = np.array(y0, dtype=np.float64, order="C")
    else:
        yv = np.zeros((C, d))

    cdef cnp.ndarray[int64_t, ndim=1, mode="c"] rec = np.asarray(record_steps, dtype=np.int64)
    cdef Py_ssize_t nrec = rec.shape[0]
    if nrec == 0 or rec[0] < 1 or np.any(np.diff(rec) <= 0):
        raise ValueError("record_steps must be ascending positive step counts")

    cdef double pbuf[3]
    cdef int np_ = len(params)
    if np_ > 3:
        raise ValueError("at most 3 family parameters supported")
    for i in range(np_):
        pbuf[i] = params[i]
    for i in range(np_, 3):
        pbuf[i] = 0.0

    cdef double decay = 0.0, e1 = 0.0, me1 = 0.0, wxb = 0.0
    cdef double l11 = 0.0, l21 = 0.0, l22 = 0.0
    if sch == SCHEME_KEXP:
        co = exp_step_coeffs(dt, m)
        decay, e1, me1, wxb = co.decay, co.e1, m * co.e1, co.wxb
        l11, l21, l22 = co.l11, co.l21, co.l22

    cdef cnp.ndarray[double, ndim=3, mode="c"] xs = np.empty((nrec, C, d))
    want_vel = bool(kinetic and record_velocity)
    cdef cnp.ndarray[double, ndim=3, mode="c"] ys = (
        np.empty((nrec, C, d)) if want_vel else np.empty((1, 1, 1))
    )
    cdef bint have_ys = want_vel

    # raw per-chain bitgen pointers; keep `bitgens` alive for the call
    cdef cnp.ndarray[uint64_t, ndim=1, mode="c"] ptrs = np.empty(C, dtype=np.uint64)
    for c in range(C):
        ptrs[c] = <uint64_t> <size_t> PyCapsule_GetPointer(bitgens[c].capsule, "BitGenerator")

    cdef cnp.ndarray[int64_t, ndim=1, mode="c"] status = np.zeros(C, dtype=np.int64)
    cdef Py_ssize_t rec_stride = C * d
    cdef double* xs_base = &xs[0, 0, 0]
    cdef double* ys_base = &ys[0, 0, 0] if have_ys else NULL
    cdef double* xbase = &x[0, 0]
    cdef double* ybase = &yv[0, 0]
    cdef int64_t* rec_base = &rec[0]
    cdef uint64_t* ptr_base = &ptrs[0]
    cdef int64_t* status_base = &status[0]
    cdef int fam = family_id
    cdef int nthreads = max(1, threads)
    cdef Py_ssize_t cc

    with nogil:
        for cc in prange(C, schedule="static", num_threads=nthreads):
            status_base[cc] = _chain_run(
                <bitgen_t*> <size_t> ptr_base[cc],
                sch, fam, pbuf, d, m, dt,
                decay, e1, me1, wxb, l11, l21, l22,
                rec_base, nrec,
                xbase + cc * d,
                ybase + cc * d,
                xs_base + cc * d,
                (ys_base + cc * d) if have_ys else NULL,
                rec_stride,
            )

    bad = np.flatnonzero(status)
    if bad.size:
        c0 = int(bad[0])
        raise BlowupError(
            f"non-finite state in chain {c0} at step {int(status[c0])} "
            f"(t={int(status[c0]) * dt:.6g}, scheme={scheme})"
        )
    return xs, (ys if want_vel else None)
