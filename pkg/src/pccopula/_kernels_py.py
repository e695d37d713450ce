"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np

_CHUNK = 1 << 16


def cos_series(theta, cw, sw):
    theta = np.asarray(theta, dtype=float)
    m, n = theta.shape
    k = np.arange(cw.shape[1], dtype=float)
    out_c = np.empty((m, n))
    out_s = np.empty((m, n))
    step = max(1, _CHUNK // max(1, cw.shape[1]))
    for r in range(m):
        for lo in range(0, n, step):
            arg = np.multiply.outer(theta[r, lo:lo + step], k)
            out_c[r, lo:lo + step] = np.cos(arg) @ cw[r]
            out_s[r, lo:lo + step] = np.sin(arg) @ sw[r]
    return out_c, out_s


def garch_recursion(eps, omega, alpha, beta, sigma2_0):
    eps = np.asarray(eps, dtype=float)
    n = eps.shape[0]
    s2 = np.empty(n)
    s2[0] = sigma2_0
    e2 = eps * eps
    for t in range(1, n):
        s2[t] = omega + alpha * e2[t - 1] + beta * s2[t - 1]
    nll = 0.5 * np.sum(np.log(2.0 * np.pi) + np.log(s2) + e2 / s2)
    return s2, float(nll)
