import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from pccopula.dist import (GhParams, GroupDef, GroupSpec, Hyperbolic, InfeasibleSkewnessError,
                           NormalBlock, ParameterError, SkewTGroup, TBlock, gh_cf,
                           hyperbolic_cf, hyperbolic_logpdf, hyperbolic_match_moments,
                           hyperbolic_variance_bounds, log_bessel_k, sample_generators,
                           skewt1_cf, skewt1_match_moments)


@st.composite
def hyperbolic_args(draw):
    alpha = draw(st.floats(0.3, 5.0))
    beta = draw(st.floats(-0.7, 0.7)) * alpha
    floor = hyperbolic_variance_bounds(alpha, beta)
    var = floor * draw(st.floats(1.1, 6.0))
    return alpha, beta, var


@st.composite
def skewt_args(draw):
    nu = draw(st.floats(4.5, 60.0))
    var = draw(st.floats(0.5, 30.0))
    # keep sigma11 > 0
    gmax = np.sqrt(0.9 * var * (nu - 2) ** 2 * (nu - 4) / (2 * nu * nu))
    gamma = draw(st.floats(-1.0, 1.0)) * gmax
    return nu, var, gamma


def _generators():
    return [
        NormalBlock([1.5, 0.3]),
        Hyperbolic(1.2, -0.4, 3.0),
        SkewTGroup(7.0, [2.0, 0.5], gamma=-0.6),
        SkewTGroup(5.0, [1.0]),
        TBlock(6.0, [2.5, 0.7]),
    ]


# -- oracles -----------------------------------------------------------------


def test_log_bessel_k_matches_scipy():
    from scipy import special

    z = np.array([1e-3, 0.1, 1.0, 10.0, 200.0])
    for order in (0.5, 1.0, 2.5, 7.0):
        np.testing.assert_allclose(log_bessel_k(order, z), np.log(special.kv(order, z)), rtol=1e-12)
    # large arguments stay finite where kv underflows
    assert np.isfinite(log_bessel_k(1.0, np.array([5000.0]))).all()


def test_hyperbolic_pdf_matches_scipy_genhyperbolic():
    p = hyperbolic_match_moments(1.3, 0.4, 2.5)
    delta = np.sqrt(p.chi)
    ref = stats.genhyperbolic(1.0, p.alpha * delta, p.beta * delta, loc=p.mu, scale=delta)
    x = np.linspace(-8, 8, 41)
    np.testing.assert_allclose(np.exp(hyperbolic_logpdf(x, p)), ref.pdf(x), rtol=1e-9, atol=1e-14)
    assert abs(ref.mean()) < 1e-8
    assert ref.var() == pytest.approx(2.5, rel=1e-7)


def test_hyperbolic_cf_is_gh_with_lambda_one():
    p = hyperbolic_match_moments(2.0, -0.5, 1.5)
    gh = GhParams(1.0, p.chi, p.psi, [p.mu], [p.beta], [[1.0]])
    t = np.linspace(-6, 6, 25)
    np.testing.assert_allclose(hyperbolic_cf(t, p), gh_cf(t[:, None], gh), rtol=1e-10, atol=1e-14)


def test_skewt_cf_is_gh_limit():
    p = skewt1_match_moments(9.0, -0.8, 2.0)
    gh = GhParams(-4.5, 9.0, 0.0, [p.mu1], [p.gamma1], [[p.sigma11]])
    t = np.linspace(-5, 5, 21)
    np.testing.assert_allclose(skewt1_cf(t, p), gh_cf(t[:, None], gh), rtol=1e-10, atol=1e-14)


def test_symmetric_t_logpdf_matches_scipy():
    nu, var = 6.0, 2.5
    g = TBlock(nu, [var])
    x = np.linspace(-6, 6, 13)
    ref = stats.t(nu, scale=np.sqrt(var * (nu - 2) / nu)).logpdf(x)
    np.testing.assert_allclose(g.logpdf(x[:, None]), ref, rtol=1e-12)
    np.testing.assert_allclose(SkewTGroup(nu, [var]).logpdf(x[:, None]), ref, rtol=1e-12)


def test_t_cf_matches_numeric_fourier():
    g = TBlock(5.0, [1.7])
    for s in (0.3, 1.0, 2.5):
        # symmetric density: 2 * int_0^inf cos(sx) f(x) dx by the Fourier-weighted rule
        val = 2 * integrate.quad(lambda x: np.exp(g.logpdf(np.array([[x]])))[0], 0, np.inf,
                                 weight="cos", wvar=s)[0]
        assert np.exp(g.log_cf(np.array([s]))).real == pytest.approx(val, abs=1e-9)


# -- validation ----------------------------------------------------------------


def test_parameter_errors():
    with pytest.raises(ParameterError):
        hyperbolic_match_moments(1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        skewt1_match_moments(4.0, 0.1, 1.0)
    with pytest.raises(InfeasibleSkewnessError):
        skewt1_match_moments(5.0, 5.0, 1.0)
    with pytest.raises(ParameterError):
        TBlock(2.0, [1.0])


def test_hyperbolic_variance_floor_is_infeasible():
    floor = hyperbolic_variance_bounds(1.0, 0.0)
    with pytest.raises(ArithmeticError):
        hyperbolic_match_moments(1.0, 0.0, 0.9 * floor)
    hyperbolic_match_moments(1.0, 0.0, 1.1 * floor)


def test_group_spec_must_partition():
    with pytest.raises(ParameterError):
        GroupSpec((GroupDef("normal", (0, 2)),))
    with pytest.raises(ParameterError):
        GroupDef("hyperbolic", (0, 1), {"alpha": 1, "beta": 0})
    spec = GroupSpec((GroupDef("hyperbolic", (0,), {"alpha": 1.0, "beta": 0.2}),
                      GroupDef("normal", (1, 2))))
    assert GroupSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ParameterError):
        spec.build([1.0, 1.0])


def test_sample_generators_deterministic_and_independent_groups():
    spec = GroupSpec((GroupDef("skewt", (0,), {"nu": 8.0, "gamma": -0.5}),
                      GroupDef("tblock", (1, 2), {"nu": 6.0})))
    lam = np.array([1.8, 0.8, 0.4])
    a = sample_generators(spec, lam, 5000, 7)
    b = sample_generators(spec, lam, 5000, 7)
    c = sample_generators(spec, lam, 5000, 8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    np.testing.assert_allclose(a.var(axis=0), lam, rtol=0.15)
    assert abs(np.corrcoef(a.T)[0, 1]) < 0.05


# -- invariants ------------------------------------------------------------------


@pytest.mark.parametrize("gen", _generators(), ids=lambda g: type(g).__name__)
def test_cf_basic_properties(gen):
    rng = np.random.default_rng(1)
    s = rng.standard_normal((50, gen.dim)) * 3
    assert np.exp(gen.log_cf(np.zeros(gen.dim))) == pytest.approx(1.0, abs=1e-12)
    phi = np.exp(gen.log_cf(s))
    assert np.all(np.abs(phi) <= 1 + 1e-12)
    np.testing.assert_allclose(np.exp(gen.log_cf(-s)), np.conj(phi), atol=1e-12)


@given(hyperbolic_args(), st.floats(-20, 20))
def test_hyperbolic_cf_properties(args, t):
    g = Hyperbolic(*args)
    phi = np.exp(g.log_cf(np.array([t])))
    assert abs(phi) <= 1 + 1e-12
    assert np.exp(g.log_cf(np.array([-t]))) == pytest.approx(np.conj(phi), abs=1e-12)
    assert np.exp(g.log_cf(np.array([0.0]))) == pytest.approx(1.0, abs=1e-12)


@given(skewt_args(), st.floats(-20, 20))
def test_skewt_cf_properties(args, t):
    nu, var, gamma = args
    g = SkewTGroup(nu, [var], gamma)
    phi = np.exp(g.log_cf(np.array([t])))
    assert abs(phi) <= 1 + 1e-12
    assert np.exp(g.log_cf(np.array([-t]))) == pytest.approx(np.conj(phi), abs=1e-12)
    assert np.exp(g.log_cf(np.array([0.0]))) == pytest.approx(1.0, abs=1e-12)


def _moments(logpdf, centre_scale):
    # whole-line quadrature split at the origin; the tails matter at 1e-6
    def m(k):
        f = lambda x: x ** k * np.exp(logpdf(np.array([x])))[0]  # noqa: E731
        pts = (-centre_scale, 0.0, centre_scale)
        total = 0.0
        for lo, hi in zip((-np.inf,) + pts, pts + (np.inf,)):
            total += integrate.quad(f, lo, hi, limit=500, epsabs=1e-12, epsrel=1e-10)[0]
        return total
    return m(0), m(1), m(2)


@given(hyperbolic_args())
def test_hyperbolic_moment_matching(args):
    g = Hyperbolic(*args)
    m0, m1, m2 = _moments(g.logpdf, np.sqrt(args[2]))
    assert m0 == pytest.approx(1.0, abs=1e-8)
    assert abs(m1) < 1e-8
    assert abs(m2 - m1 ** 2 - args[2]) < 1e-6


@given(skewt_args())
def test_skewt_moment_matching(args):
    nu, var, gamma = args
    g = SkewTGroup(nu, [var], gamma)
    m0, m1, m2 = _moments(g.logpdf, np.sqrt(var))
    assert m0 == pytest.approx(1.0, abs=1e-8)
    assert abs(m1) < 1e-8
    assert abs(m2 - m1 ** 2 - var) < 1e-6


@given(st.floats(0.3, 5.0), st.floats(1.01, 5.0), st.floats(4.5, 60.0))
def test_zero_skew_gives_symmetric_pdf(alpha, factor, nu):
    x = np.linspace(0.01, 10, 60)
    g = Hyperbolic(alpha, 0.0, factor * hyperbolic_variance_bounds(alpha, 0.0))
    np.testing.assert_allclose(np.exp(g.logpdf(x)), np.exp(g.logpdf(-x)), atol=1e-10)
    t = SkewTGroup(nu, [1.3], 0.0)
    np.testing.assert_allclose(np.exp(t.logpdf(x[:, None])), np.exp(t.logpdf(-x[:, None])),
                               atol=1e-10)


def _grid_cdf(gen, lo, hi, n=40001):
    x = np.linspace(lo, hi, n)
    pdf = np.exp(gen.logpdf(x[:, None]))
    cdf = integrate.cumulative_trapezoid(pdf, x, initial=0.0)
    return x, cdf / cdf[-1]


@pytest.mark.parametrize("gen", [Hyperbolic(1.2, -0.4, 3.0), Hyperbolic(0.8, 0.5, 12.0),
                                 SkewTGroup(7.0, [2.0], gamma=-0.6), SkewTGroup(5.0, [1.0]),
                                 TBlock(6.0, [2.5]), NormalBlock([0.7])],
                         ids=lambda g: type(g).__name__)
def test_sampler_matches_pdf(gen):
    draws = gen.sample(100_000, np.random.default_rng(3))[:, 0]
    sd = np.sqrt(gen.variances[0])
    x, cdf = _grid_cdf(gen, -60 * sd, 60 * sd)
    ks = stats.kstest(draws, lambda v: np.interp(v, x, cdf)).statistic
    assert ks < 0.01
