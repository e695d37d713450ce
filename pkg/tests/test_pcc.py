import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from conftest import equicorrelation, random_correlation
from pccopula.dist import GroupDef, GroupSpec, sample_generators
from pccopula.estimate import make_family
from pccopula.pcc import (CopulaSample, ModelError, PccModel, eigen_decompose, psd_project,
                          sign_convention)


def gaussian_copula_logpdf(u, rho):
    z = special.ndtri(u)
    d = rho.shape[0]
    return stats.multivariate_normal(np.zeros(d), rho).logpdf(z) - stats.norm.logpdf(z).sum(axis=1)


def gauss_model(rho):
    return PccModel.from_correlation(rho, make_family("gauss").spec((), rho.shape[0]))


# -- correlation helpers -----------------------------------------------------


@given(st.integers(2, 12), st.integers(0, 10_000))
def test_psd_projection_idempotent(d, seed):
    rho = random_correlation(d, seed)
    np.testing.assert_allclose(psd_project(rho), rho, atol=1e-12)
    once = psd_project(rho + 0.3 * np.random.default_rng(seed).standard_normal((d, d)))
    np.testing.assert_allclose(psd_project(once), once, atol=1e-12)


@given(st.integers(2, 10), st.integers(0, 10_000))
def test_psd_projection_output_is_correlation(d, seed):
    m = np.random.default_rng(seed).uniform(-1, 1, (d, d))
    r = psd_project(m)
    np.testing.assert_array_equal(r, r.T)
    np.testing.assert_allclose(np.diag(r), 1.0)
    assert np.linalg.eigvalsh(r).min() > -1e-12


@given(st.integers(2, 15), st.integers(0, 10_000))
def test_eigen_decompose_invariants(d, seed):
    rho = random_correlation(d, seed)
    W, lam = eigen_decompose(rho)
    assert lam.sum() == pytest.approx(d)
    assert np.all(np.diff(lam) <= 1e-12)
    np.testing.assert_allclose(W.T @ W, np.eye(d), atol=1e-10)
    np.testing.assert_allclose((W * lam) @ W.T, rho, atol=1e-10)
    for j in range(d):
        a = np.abs(W[:, j])
        # magnitudes equal to rounding count as ties, resolved by the first index
        assert W[np.flatnonzero(a >= a.max() * (1 - 1e-12))[0], j] > 0


def test_sign_convention_ties_pick_first_index():
    W = np.array([[-1.0, 1.0], [1.0, 1.0]]) / np.sqrt(2)
    out = sign_convention(W)
    assert out[0, 0] > 0 and out[0, 1] > 0


# -- Gaussian oracle ---------------------------------------------------------------


@pytest.mark.parametrize("d", [2, 5, 20])
def test_gaussian_oracle_density(d):
    rho = random_correlation(d, d)
    m = gauss_model(rho)
    u = m.simulate(1000, 11).u
    ll, total, diag = m.copula_log_density(u)
    np.testing.assert_allclose(ll, gaussian_copula_logpdf(u, rho), atol=1e-6)
    assert total == pytest.approx(ll.sum())
    assert diag["clipped"] == 0


def test_gaussian_oracle_cf_and_joint_density():
    rho = random_correlation(4, 2)
    m = gauss_model(rho)
    t = np.random.default_rng(0).standard_normal((20, 4))
    np.testing.assert_allclose(m.cf(t), np.exp(-0.5 * np.einsum("ni,ij,nj->n", t, rho, t)),
                               atol=1e-12)
    y = np.random.default_rng(1).standard_normal((20, 4))
    np.testing.assert_allclose(m.logpdf_Y(y), stats.multivariate_normal(np.zeros(4), rho).logpdf(y),
                               atol=1e-10)


def test_gaussian_oracle_simulation():
    rho = random_correlation(5, 4)
    u = gauss_model(rho).simulate(200_000, 5).u
    # uniform margins and normal-scores correlation
    for j in range(5):
        assert stats.kstest(u[:, j], "uniform").pvalue > 1e-3
    z = special.ndtri(u)
    np.testing.assert_allclose(np.corrcoef(z.T), rho, atol=0.01)


# -- density integrates to one ---------------------------------------------------


def _integrate_copula_d2(model, n=601, lim=9.0):
    # u = Phi(z) keeps the corner singularities integrable on a uniform grid
    z = np.linspace(-lim, lim, n)
    z1, z2 = np.meshgrid(z, z, indexing="ij")
    u = special.ndtr(np.column_stack([z1.ravel(), z2.ravel()]))
    ll, _, _ = model.copula_log_density(u)
    f = np.exp(ll + stats.norm.logpdf(z1.ravel()) + stats.norm.logpdf(z2.ravel())).reshape(n, n)
    return integrate.simpson(integrate.simpson(f, x=z, axis=1), x=z)


@pytest.mark.parametrize("family,theta", [("hb-n", (2.0, -1.0)), ("hb-n", (3.0, 0.0)),
                                          ("skew-t", (6.0, -0.4)), ("skew-t1-td-1", (8.0, 0.5))])
def test_copula_density_integrates_to_one(family, theta):
    m = PccModel.from_correlation(equicorrelation(2, 0.5), make_family(family).spec(theta, 2))
    assert _integrate_copula_d2(m) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("family,theta", [("hb-n", (2.0, -1.0)), ("skew-t1-t1", (7.0, -0.6)),
                                          ("t", (5.0,))])
def test_exchangeable_when_second_generator_symmetric(family, theta):
    m = PccModel.from_correlation(equicorrelation(2, 0.4), make_family(family).spec(theta, 2))
    u = np.random.default_rng(2).uniform(0.001, 0.999, (500, 2))
    a, _, _ = m.copula_log_density(u)
    b, _, _ = m.copula_log_density(u[:, ::-1])
    np.testing.assert_allclose(a, b, atol=1e-10)


# -- round trips ----------------------------------------------------------------


@pytest.mark.parametrize("family,theta", [("hb-n", (3.0, -1.0)), ("skew-t1-td-1", (9.0, -1.0))])
def test_simulate_then_implied_scores_recovers_generator_moments(family, theta):
    rho = random_correlation(4, 9)
    m = PccModel.from_correlation(rho, make_family(family).spec(theta, 4))
    n = 100_000
    _, p = m.implied_normal_scores(m.simulate(n, 3))
    mean_se = np.sqrt(m.lambdas / n)
    assert np.all(np.abs(p.mean(axis=0)) < 3 * mean_se)
    var_se = np.sqrt(np.var(p ** 2, axis=0) / n)
    assert np.all(np.abs(p.var(axis=0) - m.lambdas) < 3 * var_se)


def test_simulation_deterministic_in_seed():
    m = PccModel.from_correlation(random_correlation(3, 1), make_family("hb-n").spec((2.5, -0.5), 3))
    a = m.simulate(70_000, 42).u  # spans two simulation blocks
    b = m.simulate(70_000, 42).u
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, m.simulate(70_000, 43).u)


def test_serialization_round_trip():
    m = PccModel.from_correlation(random_correlation(4, 5),
                                  make_family("skew-t1-t1").spec((7.0, -0.5), 4))
    doc = json.loads(json.dumps(m.to_dict()))
    m2 = PccModel.from_dict(doc)
    u = m.simulate(200, 1).u
    np.testing.assert_array_equal(m.copula_log_density(u)[0], m2.copula_log_density(u)[0])
    with pytest.raises(ModelError):
        PccModel.from_dict({"format": "pcc-model", "d": 4})
    with pytest.raises(ModelError):
        PccModel.from_dict({"format": "something-else"})


def test_model_validation():
    spec = make_family("gauss").spec((), 3)
    with pytest.raises(ModelError):
        PccModel(np.eye(2), np.ones(2), spec)
    with pytest.raises(ModelError):
        PccModel(np.ones((3, 3)), np.ones(3), spec)
    m = PccModel(np.eye(3), np.ones(3), spec)
    with pytest.raises(ModelError):
        m.copula_log_density(np.full((2, 2), 0.5))
    with pytest.raises(ValueError):
        CopulaSample(np.array([[0.0, 0.5]]))


def test_auto_cos_config_resolves_cf_tail():
    spec = GroupSpec((GroupDef("skewt", (0,), {"nu": 5.0, "gamma": -0.5}),
                      GroupDef("tblock", (1, 2), {"nu": 5.0})))
    m = PccModel.from_correlation(random_correlation(3, 2), spec)
    assert m.cos.b >= 15
    tN = m.cos.frequencies()[-1:]
    assert np.max(np.abs(np.exp(m.log_marginal_cf(tN)))) < 1e-13


def test_marginals_have_unit_variance_and_zero_mean():
    m = PccModel.from_correlation(random_correlation(3, 3), make_family("hb2-n").spec(
        (3.0, -1.0, 4.0, 1.0), 3))
    g = m.tables.grid
    for i in range(3):
        f = m.tables.pdf[i]
        assert integrate.simpson(g * f, x=g) == pytest.approx(0.0, abs=1e-6)
        assert integrate.simpson(g * g * f, x=g) == pytest.approx(1.0, abs=1e-5)


def test_sample_generators_rows_match_model_simulation():
    m = PccModel.from_correlation(random_correlation(3, 4), make_family("hb-n").spec((2.5, 0.3), 3))
    p = sample_generators(m.spec, m.lambdas, 1000, 0)
    assert p.shape == (1000, 3)
    np.testing.assert_allclose(p.var(axis=0), m.lambdas, rtol=0.2)
