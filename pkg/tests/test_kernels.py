import numpy as np
import pytest

from pccopula import _kernels_py, kernels

try:
    from pccopula import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def _series_inputs(seed, m=3, n=257, k=65):
    rng = np.random.default_rng(seed)
    theta = np.ascontiguousarray(rng.uniform(0, np.pi, (m, n)))
    return theta, rng.standard_normal((m, k)), rng.standard_normal((m, k))


def test_python_cos_series_matches_direct_sum():
    theta, cw, sw = _series_inputs(0)
    c, s = _kernels_py.cos_series(theta, cw, sw)
    k = np.arange(cw.shape[1])
    ang = theta[:, :, None] * k
    np.testing.assert_allclose(c, np.einsum("rnk,rk->rn", np.cos(ang), cw), atol=1e-12)
    ref = np.einsum("rnk,rk->rn", np.sin(ang)[:, :, 1:], sw[:, 1:])
    np.testing.assert_allclose(s, ref, atol=1e-12)


@needs_compiled
@pytest.mark.parametrize("seed", range(3))
def test_backends_agree_on_cos_series(seed):
    theta, cw, sw = _series_inputs(seed)
    for a, b in zip(compiled.cos_series(theta, cw, sw), _kernels_py.cos_series(theta, cw, sw)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@needs_compiled
def test_backends_agree_on_garch_recursion():
    eps = np.random.default_rng(1).standard_normal(1000)
    a = compiled.garch_recursion(eps, 0.05, 0.08, 0.9, 2.5)
    b = _kernels_py.garch_recursion(eps, 0.05, 0.08, 0.9, 2.5)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-13)
    assert a[1] == pytest.approx(b[1], rel=1e-13)


def test_use_backend_switches_and_restores():
    before = kernels.BACKEND
    try:
        kernels.use_backend("python")
        assert kernels.BACKEND == "python"
        with pytest.raises(ValueError):
            kernels.use_backend("fortran")
    finally:
        kernels.use_backend(before)
    assert kernels.BACKEND == before
