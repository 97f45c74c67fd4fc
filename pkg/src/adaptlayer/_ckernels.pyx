# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled statevector kernels.

Every routine here has a line-for-line numpy twin in ``_pykernels``; the
two are kept interchangeable and are cross-checked by the test suite.
"""
import numpy as np


cdef inline int _parity(unsigned long long v) nogil:
    v ^= v >> 32
    v ^= v >> 16
    v ^= v >> 8
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return <int>(v & 1)


def rotate_pairs(double complex[:, ::1] state, const long long[::1] src,
                 const long long[::1] dst, const double[::1] sign,
                 double c, double s):
    """In-place exp(theta*T) on the rows of ``state`` (c=cos, s=sin)."""
    cdef Py_ssize_t i, j, n = src.shape[0], k = state.shape[1]
    cdef long long a_i, b_i
    cdef double ss
    cdef double complex a, b
    with nogil:
        for i in range(n):
            a_i = src[i]
            b_i = dst[i]
            ss = s * sign[i]
            for j in range(k):
                a = state[a_i, j]
                b = state[b_i, j]
                state[a_i, j] = c * a - ss * b
                state[b_i, j] = ss * a + c * b


def generator_apply(double complex[:, ::1] state, const long long[::1] src,
                    const long long[::1] dst, const double[::1] sign):
    """Return T @ state for a pair-map generator."""
    out_arr = np.zeros((state.shape[0], state.shape[1]), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, n = src.shape[0], k = state.shape[1]
    with nogil:
        for i in range(n):
            for j in range(k):
                out[dst[i], j] = sign[i] * state[src[i], j]
                out[src[i], j] = -sign[i] * state[dst[i], j]
    return out_arr


def generator_overlap(const double complex[::1] bra, const double complex[::1] ket,
                      const long long[::1] src, const long long[::1] dst,
                      const double[::1] sign):
    """Return <bra|T|ket>."""
    cdef Py_ssize_t i, n = src.shape[0]
    cdef double complex acc = 0
    cdef double complex bs, bd
    with nogil:
        for i in range(n):
            bs = bra[src[i]]
            bd = bra[dst[i]]
            acc = acc + sign[i] * (bd.conjugate() * ket[src[i]]
                                   - bs.conjugate() * ket[dst[i]])
    return acc


def pauli_sum_apply(const long long[::1] xmask, const long long[::1] zmask,
                    const double complex[::1] coef, const double complex[::1] state):
    """Return sum_k coef_k * X^x_k Z^z_k @ state (coef carries the Y phase)."""
    cdef Py_ssize_t dim = state.shape[0], nt = xmask.shape[0]
    out_arr = np.zeros(dim, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t t, y
    cdef unsigned long long xm, zm
    cdef double complex cf
    with nogil:
        for t in range(nt):
            xm = <unsigned long long>xmask[t]
            zm = <unsigned long long>zmask[t]
            cf = coef[t]
            for y in range(dim):
                if _parity(<unsigned long long>y & zm):
                    out[<Py_ssize_t>(y ^ xm)] = out[<Py_ssize_t>(y ^ xm)] - cf * state[y]
                else:
                    out[<Py_ssize_t>(y ^ xm)] = out[<Py_ssize_t>(y ^ xm)] + cf * state[y]
    return out_arr


def pauli_expectations(const long long[::1] xmask, const long long[::1] zmask,
                       const double complex[::1] phase, const double complex[::1] state):
    """Return the per-term <state|P_k|state> (unweighted, phase included)."""
    cdef Py_ssize_t dim = state.shape[0], nt = xmask.shape[0]
    out_arr = np.zeros(nt, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t t, y
    cdef unsigned long long xm, zm
    cdef double complex acc
    with nogil:
        for t in range(nt):
            xm = <unsigned long long>xmask[t]
            zm = <unsigned long long>zmask[t]
            acc = 0
            for y in range(dim):
                if _parity(<unsigned long long>y & zm):
                    acc = acc - state[<Py_ssize_t>(y ^ xm)].conjugate() * state[y]
                else:
                    acc = acc + state[<Py_ssize_t>(y ^ xm)].conjugate() * state[y]
            out[t] = phase[t] * acc
    return out_arr
