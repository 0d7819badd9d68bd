# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 stepper for the dressed-basis master equation.

Same contract as ``uscqed._rk4_py.propagate``. Matrices are row-major; BLAS is
column-major, so every product below is written for the transposed view.
"""
import numpy as np

from libc.math cimport sin, cos
from libc.string cimport memset
from scipy.linalg.cython_blas cimport zgemm


DEF SMALL = 24


cdef void _commutator(double complex* r, double complex* v, double complex* out, int d) noexcept nogil:
    # out = -i (v r - r v); column-major view sees r^T and v^T
    cdef Py_ssize_t i, j, k
    cdef double* o = <double*> out
    cdef double* rr = <double*> r
    cdef double* vv = <double*> v
    cdef double* orow
    cdef double* rrow
    cdef double* vrow
    cdef double vre, vim, rre, rim
    if d <= SMALL:
        # BLAS call overhead dominates at this size; real arithmetic on the
        # interleaved (re, im) layout lets the compiler vectorize the j loop
        memset(out, 0, d * d * sizeof(double complex))
        for i in range(d):
            orow = o + 2 * i * d
            for k in range(d):
                # -i v_ik and +i r_ik
                vre = vv[2 * (i * d + k) + 1]
                vim = -vv[2 * (i * d + k)]
                rre = -rr[2 * (i * d + k) + 1]
                rim = rr[2 * (i * d + k)]
                rrow = rr + 2 * k * d
                vrow = vv + 2 * k * d
                for j in range(d):
                    orow[2 * j] += vre * rrow[2 * j] - vim * rrow[2 * j + 1] + rre * vrow[2 * j] - rim * vrow[2 * j + 1]
                    orow[2 * j + 1] += vre * rrow[2 * j + 1] + vim * rrow[2 * j] + rre * vrow[2 * j + 1] + rim * vrow[2 * j]
        return
    cdef char n = b'N'
    cdef double complex a_left = -1j
    cdef double complex a_right = 1j
    cdef double complex zero = 0
    cdef double complex one = 1
    zgemm(&n, &n, &d, &d, &d, &a_left, r, &d, v, &d, &zero, out, &d)
    zgemm(&n, &n, &d, &d, &d, &a_right, v, &d, r, &d, &one, out, &d)


cdef void _rhs(double complex* rho, double complex* out, Py_ssize_t nb, int d,
               double complex* factor, double* rates, double complex* v, bint has_v) noexcept nogil:
    cdef Py_ssize_t b, i, j, k
    cdef Py_ssize_t dd = d * d
    cdef double complex* r
    cdef double complex* o
    cdef double complex feed
    for b in range(nb):
        r = rho + b * dd
        o = out + b * dd
        if has_v:
            _commutator(r, v, o, d)
        else:
            memset(o, 0, dd * sizeof(double complex))
        for i in range(dd):
            o[i] = o[i] + factor[i] * r[i]
        for j in range(d):
            feed = 0
            for k in range(j + 1, d):
                feed = feed + rates[j * d + k] * r[k * d + k]
            o[j * d + j] = o[j * d + j] + feed


cdef void _field(double complex* v, double complex* ops, double* amps, double* freqs,
                 int nc, int d, double t) noexcept nogil:
    cdef Py_ssize_t c, i
    cdef Py_ssize_t dd = d * d
    cdef double s
    memset(v, 0, dd * sizeof(double complex))
    for c in range(nc):
        s = amps[c] * sin(freqs[c] * t)
        for i in range(dd):
            v[i] = v[i] + s * ops[c * dd + i]


def propagate(double complex[:, :, ::1] rho, double[::1] energies, double[:, ::1] rates,
              double complex[:, :, ::1] ops, double[::1] amps, double[::1] freqs,
              double t0, double dt, Py_ssize_t n_steps,
              double complex[:, :, ::1] obs, double lock_freq):
    cdef int d = energies.shape[0]
    cdef Py_ssize_t nb = rho.shape[0]
    cdef Py_ssize_t dd = d * d
    cdef Py_ssize_t size = nb * dd
    cdef int nc = amps.shape[0]
    cdef Py_ssize_t nk = obs.shape[0]
    cdef bint has_v = nc > 0
    cdef Py_ssize_t step, i, j, b, k, m
    cdef double t, half = 0.5 * dt
    cdef double complex tr, ph

    decay = np.asarray(rates).sum(axis=0)
    e = np.asarray(energies)
    factor_arr = np.ascontiguousarray(
        -1j * (e[:, None] - e[None, :]) - 0.5 * (decay[:, None] + decay[None, :]), dtype=complex)
    cdef double complex[:, ::1] factor = factor_arr
    cdef double complex[:, :, ::1] acc = np.empty((nb, d, d), dtype=complex)
    cdef double complex[:, :, ::1] stage = np.empty((nb, d, d), dtype=complex)
    cdef double complex[:, :, ::1] tmp = np.empty((nb, d, d), dtype=complex)
    cdef double complex[:, ::1] v0 = np.zeros((d, d), dtype=complex)
    cdef double complex[:, ::1] vh = np.zeros((d, d), dtype=complex)
    cdef double complex[:, ::1] v1 = np.zeros((d, d), dtype=complex)
    sums_arr = np.zeros((nb, nk), dtype=complex)
    lock_arr = np.zeros((nb, nk), dtype=complex)
    cdef double complex[:, ::1] sums = sums_arr
    cdef double complex[:, ::1] lock = lock_arr

    cdef double complex* y = &rho[0, 0, 0]
    cdef double complex* pa = &acc[0, 0, 0]
    cdef double complex* ps = &stage[0, 0, 0]
    cdef double complex* pt = &tmp[0, 0, 0]
    cdef double complex* pf = &factor[0, 0]
    cdef double* pr = &rates[0, 0]
    cdef double complex* pv0 = &v0[0, 0]
    cdef double complex* pvh = &vh[0, 0]
    cdef double complex* pv1 = &v1[0, 0]
    cdef double complex* pops = NULL
    cdef double* pamps = NULL
    cdef double* pfreqs = NULL
    if has_v:
        pops = &ops[0, 0, 0]
        pamps = &amps[0]
        pfreqs = &freqs[0]

    with nogil:
        for step in range(n_steps):
            t = t0 + step * dt
            if nk > 0:
                ph = cos(lock_freq * t) + 1j * sin(lock_freq * t)
                for b in range(nb):
                    for k in range(nk):
                        tr = 0
                        for i in range(d):
                            for j in range(d):
                                tr = tr + rho[b, i, j] * obs[k, j, i]
                        sums[b, k] = sums[b, k] + tr
                        lock[b, k] = lock[b, k] + tr * ph
            if has_v:
                _field(pv0, pops, pamps, pfreqs, nc, d, t)
                _field(pvh, pops, pamps, pfreqs, nc, d, t + half)
                _field(pv1, pops, pamps, pfreqs, nc, d, t + dt)
            # k1
            _rhs(y, pa, nb, d, pf, pr, pv0, has_v)
            for m in range(size):
                pt[m] = y[m] + half * pa[m]
            # k2
            _rhs(pt, ps, nb, d, pf, pr, pvh, has_v)
            for m in range(size):
                pa[m] = pa[m] + 2.0 * ps[m]
                pt[m] = y[m] + half * ps[m]
            # k3
            _rhs(pt, ps, nb, d, pf, pr, pvh, has_v)
            for m in range(size):
                pa[m] = pa[m] + 2.0 * ps[m]
                pt[m] = y[m] + dt * ps[m]
            # k4
            _rhs(pt, ps, nb, d, pf, pr, pv1, has_v)
            for m in range(size):
                y[m] = y[m] + (dt / 6.0) * (pa[m] + ps[m])
    return sums_arr, lock_arr
