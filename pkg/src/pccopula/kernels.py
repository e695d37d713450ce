"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built at install time; otherwise
the pure-numpy versions are loaded. Setting ``PCCOPULA_PURE_PYTHON=1`` forces
the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("PCCOPULA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def use_backend(name):
    """Switch backend at runtime ("cython" or "python"); used by benchmarks and tests."""
    global _impl, BACKEND
    if name == "python":
        _impl, BACKEND = _kernels_py, "python"
    elif name == "cython":
        from . import _kernels as _compiled

        _impl, BACKEND = _compiled, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")


def cos_series(theta, cw, sw):
    """Evaluate cosine and sine series row by row.

    Parameters
    ----------
    theta : ndarray, shape (m, n)
        Angles, one row per series.
    cw, sw : ndarray, shape (m, K)
        Cosine and sine coefficients for ``k = 0..K-1`` (``sw[:, 0]`` is ignored).

    Returns
    -------
    (ndarray, ndarray)
        ``sum_k cw[r,k] cos(k theta[r])`` and ``sum_k sw[r,k] sin(k theta[r])``.
    """
    return _impl.cos_series(theta, cw, sw)


def garch_recursion(eps, omega, alpha, beta, sigma2_0):
    return _impl.garch_recursion(eps, float(omega), float(alpha), float(beta), float(sigma2_0))
