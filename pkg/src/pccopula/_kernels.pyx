# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: cosine/sine series summation and the GARCH(1,1) recursion."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, log, M_PI

cnp.import_array()


def cos_series(const double[:, ::1] theta, const double[:, ::1] cw,
               const double[:, ::1] sw):
    """Row-wise sums ``sum_k cw[r,k] cos(k theta)`` and ``sum_k sw[r,k] sin(k theta)``."""
    cdef Py_ssize_t m = theta.shape[0], n = theta.shape[1], K = cw.shape[1]
    cdef Py_ssize_t r, j, k
    cdef double c, s, ck, sk, tmp, acc_c, acc_s
    out_c = np.empty((m, n), dtype=np.float64)
    out_s = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] oc = out_c
    cdef double[:, ::1] os = out_s
    for r in range(m):
        for j in range(n):
            c = cos(theta[r, j])
            s = sin(theta[r, j])
            ck = 1.0
            sk = 0.0
            acc_c = cw[r, 0]
            acc_s = 0.0
            for k in range(1, K):
                tmp = ck * c - sk * s
                sk = sk * c + ck * s
                ck = tmp
                acc_c += cw[r, k] * ck
                acc_s += sw[r, k] * sk
            oc[r, j] = acc_c
            os[r, j] = acc_s
    return out_c, out_s


def garch_recursion(const double[::1] eps, double omega, double alpha,
                    double beta, double sigma2_0):
    """Conditional variances and the Gaussian negative log-likelihood."""
    cdef Py_ssize_t n = eps.shape[0], t
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] s2 = out
    cdef double nll = 0.0
    s2[0] = sigma2_0
    for t in range(1, n):
        s2[t] = omega + alpha * eps[t - 1] * eps[t - 1] + beta * s2[t - 1]
    for t in range(n):
        nll += 0.5 * (log(2.0 * M_PI) + log(s2[t]) + eps[t] * eps[t] / s2[t])
    return out, nll
