# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch backend: the per-point resolvent chain on raw LAPACK.

Same `chain_points` contract as kernels.reference, with the whole point loop
under `nogil` so chunks running on different Python threads scale across
cores.  Each call owns its scratch buffers, which keeps the function
re-entrant without locking.
"""

import numpy as np

from libc.math cimport sqrt, NAN
from scipy.linalg.cython_blas cimport zgemv
from scipy.linalg.cython_lapack cimport zgesv

ctypedef double complex zc


cdef inline void _assemble(zc* a, const zc* k0, const zc* kr_t, const zc* kl_t,
                           double kr, double kl, double delta, int level, int d) noexcept nogil:
    cdef Py_ssize_t i, m = (<Py_ssize_t>d) * d
    cdef zc shift = -1j * (level * delta)
    for i in range(m):
        a[i] = k0[i] + kr * kr_t[i] + kl * kl_t[i]
    for i in range(d):
        a[i * (d + 1)] += shift


cdef inline zc _dot(const zc* row, const zc* vec, int d) noexcept nogil:
    cdef zc acc = 0
    cdef int i
    for i in range(d):
        acc += row[i] * vec[i]
    return acc


def chain_points(
    zc[::1] k0_1, zc[::1] kr_1, zc[::1] kl_1,
    zc[::1] k0_2, zc[::1] kr_2, zc[::1] kl_2,
    zc[::1] k0_3, zc[::1] kr_3, zc[::1] kl_3,
    int d1, int d2, int d3,
    zc[::1] o_vac, zc[::1] o_cross, zc[::1] o_12, zc[::1] o_23,
    double[::1] deltas, double[::1] kappa_rs, double[::1] kappa_ls,
    int max_n, zc[:, ::1] out,
):
    cdef Py_ssize_t npts = deltas.shape[0]
    cdef int dmax = max(d1, max(d2, d3))
    a_buf = np.empty(<Py_ssize_t>dmax * dmax, dtype=np.complex128)
    x1_buf = np.empty(max(d1, 1), dtype=np.complex128)
    x2_buf = np.empty(max(d2, 1), dtype=np.complex128)
    x3_buf = np.empty(max(d3, 1), dtype=np.complex128)
    t1_buf = np.empty(max(d1, 1), dtype=np.complex128)
    t2_buf = np.empty(max(d2, 1), dtype=np.complex128)
    piv_buf = np.empty(max(dmax, 1), dtype=np.intc)
    cdef zc[::1] a = a_buf
    cdef zc[::1] x1 = x1_buf
    cdef zc[::1] x2 = x2_buf
    cdef zc[::1] x3 = x3_buf
    cdef zc[::1] t1 = t1_buf
    cdef zc[::1] t2 = t2_buf
    cdef int[::1] piv = piv_buf

    cdef Py_ssize_t ipt
    cdef int i, info, nrhs = 1, inc = 1
    cdef char no_trans = b'N', conj_trans = b'C'
    cdef zc one = 1, zero = 0, p
    cdef double kr, kl, dl

    with nogil:
        for ipt in range(npts):
            kr = kappa_rs[ipt]
            kl = kappa_ls[ipt]
            dl = deltas[ipt]
            out[ipt, 1] = 0
            out[ipt, 2] = 0

            _assemble(&a[0], &k0_1[0], &kr_1[0], &kl_1[0], kr, kl, dl, 1, d1)
            for i in range(d1):
                x1[i] = o_vac[i].real - 1j * o_vac[i].imag
            zgesv(&d1, &nrhs, &a[0], &d1, &piv[0], &x1[0], &d1, &info)
            if info != 0:
                out[ipt, 0] = NAN
                out[ipt, 1] = NAN
                out[ipt, 2] = NAN
                out[ipt, 3] = NAN
                continue
            out[ipt, 0] = kr * _dot(&o_vac[0], &x1[0], d1)
            out[ipt, 3] = sqrt(kr * kl) * _dot(&o_cross[0], &x1[0], d1)

            if max_n < 2 or d2 == 0:
                continue
            zgemv(&conj_trans, &d1, &d2, &one, &o_12[0], &d1, &x1[0], &inc, &zero, &x2[0], &inc)
            _assemble(&a[0], &k0_2[0], &kr_2[0], &kl_2[0], kr, kl, dl, 2, d2)
            zgesv(&d2, &nrhs, &a[0], &d2, &piv[0], &x2[0], &d2, &info)
            if info != 0:
                out[ipt, 1] = NAN
                out[ipt, 2] = NAN
                continue
            zgemv(&no_trans, &d1, &d2, &one, &o_12[0], &d1, &x2[0], &inc, &zero, &t1[0], &inc)
            out[ipt, 1] = kr * kr * _dot(&o_vac[0], &t1[0], d1)

            if max_n < 3 or d3 == 0:
                continue
            zgemv(&conj_trans, &d2, &d3, &one, &o_23[0], &d2, &x2[0], &inc, &zero, &x3[0], &inc)
            _assemble(&a[0], &k0_3[0], &kr_3[0], &kl_3[0], kr, kl, dl, 3, d3)
            zgesv(&d3, &nrhs, &a[0], &d3, &piv[0], &x3[0], &d3, &info)
            if info != 0:
                out[ipt, 2] = NAN
                continue
            zgemv(&no_trans, &d2, &d3, &one, &o_23[0], &d2, &x3[0], &inc, &zero, &t2[0], &inc)
            zgemv(&no_trans, &d1, &d2, &one, &o_12[0], &d1, &t2[0], &inc, &zero, &t1[0], &inc)
            out[ipt, 2] = kr * kr * kr * _dot(&o_vac[0], &t1[0], d1)
