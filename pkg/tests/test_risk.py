import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from conftest import equicorrelation
from pccopula.estimate import make_family
from pccopula.pcc import PccModel
from pccopula.risk import (ConfigError, DistressConfig, binomial_distress_test, distress_cube,
                           mdf, mdi_counts, mdr)


def test_mdr_counting():
    assert mdr(np.array([0.01, 0.1, 0.2]), 0.2) == 1.0
    assert mdr(np.array([0.3, 0.5, 0.9]), 0.2) == 0.0
    assert mdr(np.array([0.1, 0.5, 0.15, 0.9]), 0.2) == 0.5


def test_mdf_product_law_and_comonotone():
    rng = np.random.default_rng(0)
    u = rng.uniform(size=(400_000, 3))
    assert mdf(u, 0.3, 3) == pytest.approx(0.3 ** 3, abs=4 * np.sqrt(0.027 / 400_000))
    v = np.repeat(rng.uniform(size=(10_000, 1)), 5, axis=1)
    for k in range(1, 6):
        assert mdf(v, 0.2, k) == pytest.approx(np.mean(v[:, 0] <= 0.2))
    with pytest.raises(ValueError):
        mdi_counts(u, 0.2, 4)


@st.composite
def samples(draw):
    n = draw(st.integers(5, 60))
    d = draw(st.integers(2, 6))
    seed = draw(st.integers(0, 10_000))
    rho = draw(st.floats(0.0, 0.95))
    z = np.random.default_rng(seed).standard_normal((n, d))
    z = np.sqrt(rho) * z[:, :1] + np.sqrt(1 - rho) * z
    return stats.norm.cdf(z)


@given(samples())
def test_mdf_monotone_along_cube_axes(u):
    d = u.shape[1]
    qs = np.linspace(0.02, 0.5, 12)
    assert np.all(np.diff([mdf(u, q, d) for q in qs]) >= 0)
    assert np.all(np.diff([mdf(u, 0.2, k) for k in range(1, d + 1)]) <= 0)
    assert np.all(np.diff([mdf(u, 0.2, m, list(range(m))) for m in range(1, d + 1)]) <= 0)


@given(st.integers(1, 400), st.floats(1e-4, 0.9))
def test_binomial_p_value_decreasing_in_count(n, p):
    vals = [binomial_distress_test(c, n, p) for c in range(n + 1)]
    assert vals[0] == 1.0
    assert np.all(np.diff(vals) <= 1e-15)


@given(st.integers(1, 2000), st.floats(1e-6, 0.99), st.floats(0, 1))
def test_binomial_matches_scipy(n, p, frac):
    c = int(frac * n)
    ref = stats.binom.sf(c - 1, n, p)
    assert binomial_distress_test(c, n, p) == pytest.approx(ref, rel=1e-9, abs=1e-300)


def test_binomial_validation():
    with pytest.raises(ValueError):
        binomial_distress_test(5, 4, 0.5)
    with pytest.raises(ValueError):
        binomial_distress_test(1, 4, 1.5)
    assert binomial_distress_test(16, 1303, 0.0) == 0.0


def _model(d=6):
    return PccModel.from_correlation(equicorrelation(d, 0.45),
                                     make_family("skew-t1-td-1").spec((8.0, -0.8), d))


def _cfg(**kw):
    base = dict(q_grid=(0.05, 0.1, 0.2, 0.3), k_over_d_grid=(0.5, 0.75, 1.0), d_subsets="prefix",
                n_sim=20_000, n_boot=50)
    base.update(kw)
    return DistressConfig(**base)


def test_model_mdf_converges_with_simulation_size():
    m = _model()
    cfg = _cfg()
    cells = []
    for q in cfg.q_grid:
        cells.append((q, 6, None))
    for k in (3, 4, 5):
        cells.append((0.2, k, None))
    for size in range(2, 7):
        cells.append((0.2, size, list(range(size))))
    n = 100_000
    a = m.simulate(n, 1).u
    b = m.simulate(2 * n, 2).u
    ok = [abs(mdf(a, q, k, s) - mdf(b, q, k, s)) < 2 / np.sqrt(n) for q, k, s in cells]
    assert np.mean(ok) >= 0.95


def test_distress_config_validation():
    with pytest.raises(ConfigError):
        DistressConfig(q_grid=(0.1, 0.05, 0.2))
    with pytest.raises(ConfigError):
        DistressConfig(q_grid=(0.1, 0.6))
    with pytest.raises(ConfigError):
        DistressConfig(k_over_d_grid=())
    with pytest.raises(ConfigError):
        DistressConfig(d_subsets=[[0, 1], [2, 3]]).subsets(4)
    with pytest.raises(ConfigError):
        DistressConfig(d_subsets="alphabetical").subsets(4)
    u = _model(4).simulate(200, 0)
    with pytest.raises(ConfigError):
        distress_cube(u, {}, DistressConfig(n_boot=0))


def test_distress_report_invariants_and_csv():
    m = _model()
    u = m.simulate(1500, 5)
    rep = distress_cube(u, {"m": m}, _cfg(), seed=3)
    for r in rep.rows:
        assert 0 <= r["mdf"] <= 1
        if r["model"] == "empirical":
            assert isinstance(r["count"], int) and 0 <= r["count"] <= rep.n
            assert r["band_lo"] <= r["band_hi"]
        else:
            assert 0 <= r["p_value"] <= 1
    q_axis = [r["mdf"] for r in rep.rows if r["axis"] == "q" and r["model"] == "empirical"]
    d_axis = [r["mdf"] for r in rep.rows if r["axis"] == "d" and r["model"] == "m"]
    assert np.all(np.diff(q_axis) >= 0) and np.all(np.diff(d_axis) <= 0)
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert len(rows) == len(rep.rows)
    for parsed, r in zip(rows, rep.rows):
        assert float(parsed["mdf"]) == r["mdf"]
    assert json.loads(rep.to_json())["n"] == 1500
    assert len(rep.tests) == 4


def test_distress_cube_deterministic():
    m = _model(4)
    u = m.simulate(500, 1)
    cfg = _cfg(n_sim=5000, n_boot=20)
    assert distress_cube(u, {"m": m}, cfg, seed=9).to_csv() == \
        distress_cube(u, {"m": m}, cfg, seed=9).to_csv()
