"""Estimation of principal component copulas.

Two estimators are provided:

* :func:`fit_gmm_hybrid` -- correlations by the moment condition
  ``E[F_i^{-1}(U_i) F_j^{-1}(U_j)] = rho_ij`` and shape parameters by maximum
  likelihood, iterated to a fixed point.
* :func:`fit_mle` -- joint maximum likelihood over a parsimonious correlation
  parameterization and the shape parameters.

Named copula families map a short shape vector to a generator
:class:`~pccopula.dist.GroupSpec` for any dimension.
"""

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .dist import GroupDef, GroupSpec, ParameterError
from .pcc import CopulaSample, PccModel, eigen_decompose, psd_project

log = logging.getLogger(__name__)


class DegenerateMarginError(ValueError):
    """A data column is constant (or otherwise cannot be ranked)."""


class NonConvergenceWarning(RuntimeWarning):
    pass


# --------------------------------------------------------------------------
# Families


@dataclass(frozen=True)
class Family:
    """A named copula family with a small shape-parameter vector."""

    name: str
    param_names: tuple
    lower: tuple
    upper: tuple
    _build: object = field(repr=False)
    _init: object = field(repr=False)

    @property
    def k(self):
        return len(self.param_names)

    def spec(self, theta, d):
        return self._build(np.asarray(theta, dtype=float), int(d))

    def init(self, lambdas):
        return np.asarray(self._init(np.asarray(lambdas, dtype=float)), dtype=float)

    def feasible(self, theta, lambdas):
        """Cheap domain check before building a model."""
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < np.asarray(self.lower)) or np.any(theta > np.asarray(self.upper)):
            return False
        try:
            self.spec(theta, len(lambdas)).build(np.maximum(lambdas, 1e-10))
        except (ParameterError, ArithmeticError):
            return False
        return True


def _rest(d, start=1):
    return tuple(range(start, d))


def _hb_init(lam):
    a = 3.0 / np.sqrt(lam)
    return a, -0.2 * a


def _nu1(nu, link):
    return 2.0 * nu if link == "tail" else nu


def make_family(name, tail_link="equal"):
    """Look up a family by name.

    ``tail_link`` controls how the single DoF parameter is shared between a
    skewed first generator and t generators: ``"equal"`` uses the same value,
    ``"tail"`` sets the first generator's DoF to twice the others so the power
    tails coincide.
    """
    if tail_link not in ("equal", "tail"):
        raise ValueError("tail_link must be 'equal' or 'tail'")
    if name == "gauss":
        return Family("gauss", (), (), (),
                      lambda th, d: GroupSpec((GroupDef("normal", range(d)),)),
                      lambda lam: ())
    if name == "t":
        return Family("t", ("nu",), (2.2,), (300.0,),
                      lambda th, d: GroupSpec((GroupDef("skewt", range(d), {"nu": th[0]}),)),
                      lambda lam: (10.0,))
    if name == "skew-t":
        return Family("skew-t", ("nu", "gamma"), (4.2, -20.0), (300.0, 20.0),
                      lambda th, d: GroupSpec((GroupDef("skewt", range(d),
                                                        {"nu": th[0], "gamma": th[1]}),)),
                      lambda lam: (10.0, -0.3))
    if name == "hb-n":
        return Family("hb-n", ("alpha", "beta"), (1e-3, -50.0), (50.0, 50.0),
                      lambda th, d: GroupSpec((
                          GroupDef("hyperbolic", (0,), {"alpha": th[0], "beta": th[1]}),
                          GroupDef("normal", _rest(d)))),
                      lambda lam: _hb_init(lam[0]))
    if name == "hb2-n":
        return Family("hb2-n", ("alpha1", "beta1", "alpha2", "beta2"),
                      (1e-3, -50.0, 1e-3, -50.0), (50.0, 50.0, 50.0, 50.0),
                      lambda th, d: GroupSpec((
                          GroupDef("hyperbolic", (0,), {"alpha": th[0], "beta": th[1]}),
                          GroupDef("hyperbolic", (1,), {"alpha": th[2], "beta": th[3]}),
                          GroupDef("normal", _rest(d, 2)))),
                      lambda lam: _hb_init(lam[0]) + _hb_init(lam[1]))
    if name == "skew-t1-t1":
        return Family("skew-t1-t1", ("nu", "gamma"), (4.2, -20.0), (300.0, 20.0),
                      lambda th, d: GroupSpec((
                          GroupDef("skewt", (0,), {"nu": _nu1(th[0], tail_link), "gamma": th[1]}),
                          GroupDef("tblock", _rest(d), {"nu": th[0]}))),
                      lambda lam: (10.0, -0.3))
    if name == "skew-t1-td-1":
        return Family("skew-t1-td-1", ("nu", "gamma"), (4.2, -20.0), (300.0, 20.0),
                      lambda th, d: GroupSpec((
                          GroupDef("skewt", (0,), {"nu": _nu1(th[0], tail_link), "gamma": th[1]}),
                          GroupDef("skewt", _rest(d), {"nu": th[0]}))),
                      lambda lam: (10.0, -0.3))
    raise ValueError(f"unknown copula family {name!r}")


FAMILY_NAMES = ("gauss", "t", "skew-t", "hb-n", "hb2-n", "skew-t1-t1", "skew-t1-td-1")


# --------------------------------------------------------------------------
# Data preparation


def ranks_to_pseudo_obs(x):
    """Pseudo-observations ``rank(x) / (n + 1)`` per column (average ranks for ties)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected an n x d data matrix")
    if np.isnan(x).any():
        raise ValueError("data contain NaNs")
    const = np.flatnonzero(np.ptp(x, axis=0) == 0)
    if const.size:
        raise DegenerateMarginError(f"constant column(s) {const.tolist()}")
    n = x.shape[0]
    return CopulaSample(stats.rankdata(x, axis=0) / (n + 1), "ranked-historical")


def _u(sample):
    return sample.u if isinstance(sample, CopulaSample) else np.asarray(sample, dtype=float)


def moment_correlation(y):
    """Uncentred second-moment matrix of ``y`` rescaled to unit diagonal."""
    m = y.T @ y / y.shape[0]
    m = 0.5 * (m + m.T)
    s = np.sqrt(np.diag(m))
    return m / np.outer(s, s)


def init_normal_scores(u):
    """Correlation of the normal scores ``Phi^-1(u)`` and its eigendecomposition."""
    z = special.ndtri(_u(u))
    rho = psd_project(moment_correlation(z))
    W, lam = eigen_decompose(rho)
    return rho, W, lam


# --------------------------------------------------------------------------
# Results


@dataclass
class FitConfig:
    method: str = "gmm"
    max_iter: int = 10
    corr_tol: float = 1e-4
    shape_tol: float = 1e-3
    max_evals: int = 400
    xatol: float = 1e-3
    fatol: float = 1e-6
    n_grid: int = 4096
    n_boot: int = 100
    tail_link: str = "equal"
    grad_tol: float = 1e-3

    def __post_init__(self):
        if self.max_iter < 1 or self.corr_tol <= 0 or self.shape_tol <= 0:
            raise ValueError("need max_iter >= 1 and positive tolerances")
        if self.method not in ("gmm", "mle"):
            raise ValueError("method must be 'gmm' or 'mle'")


@dataclass
class FitResult:
    model: PccModel
    family: str
    theta: dict
    loglik: float
    n: int
    k: int
    method: str
    iterations: int = 0
    converged: bool = True
    trace: list = field(default_factory=list)
    corr_params: dict = field(default_factory=dict)
    bootstrap_sd: dict = None

    @property
    def aic(self):
        return 2 * self.k - 2 * self.loglik

    @property
    def bic(self):
        return self.k * math.log(self.n) - 2 * self.loglik

    def to_dict(self):
        out = {
            "family": self.family,
            "method": self.method,
            "theta": self.theta,
            "loglik": self.loglik,
            "n": self.n,
            "k": self.k,
            "aic": self.aic,
            "bic": self.bic,
            "iterations": self.iterations,
            "converged": self.converged,
            "trace": self.trace,
            "eigenvalues": self.model.lambdas.tolist(),
        }
        if self.corr_params:
            out["corr_params"] = self.corr_params
        if self.bootstrap_sd is not None:
            out["bootstrap_sd"] = self.bootstrap_sd
        return out


# --------------------------------------------------------------------------
# Likelihood pieces

_PENALTY = 1e10


def _loglik(u, W, lam, family, theta, n_grid, cos=None, exact=False):
    try:
        spec = family.spec(theta, len(lam))
        model = PccModel(W, lam, spec, cos=cos, n_grid=n_grid)
        _, total, _ = model.copula_log_density(u, exact=exact)
    except (ParameterError, ArithmeticError):
        return -np.inf, None
    if not np.isfinite(total):
        return -np.inf, None
    return total, model


def _shape_mle(u, W, lam, family, theta0, cfg, warm=False):
    """Maximise the likelihood over the shape vector with ``W`` and ``lam`` frozen.

    Bounded Nelder-Mead, restarted once from the first optimum, then polished
    with finite-difference Newton steps. With ``warm`` (a starting point from
    a previous, nearby problem) Newton steps are tried first and the simplex
    only runs if they fail. The COS configuration is fixed at the starting
    point so the objective is smooth.
    """
    n = u.shape[0]
    theta0 = np.asarray(theta0, dtype=float)
    if not family.feasible(theta0, lam):
        theta0, warm = family.init(lam), False
    spec0 = family.spec(theta0, len(lam))
    cos = PccModel(W, lam, spec0, n_grid=cfg.n_grid).cos

    def obj(th):
        if not family.feasible(th, lam):
            return _PENALTY
        ll, _ = _loglik(u, W, lam, family, th, cfg.n_grid, cos)
        return -ll / n if np.isfinite(ll) else _PENALTY

    if warm:
        x, ok = _newton(obj, theta0, family, n, steps=8)
        log.debug("warm newton %s -> %s (%s)", theta0, x, ok)
        if ok:
            return x, True

    bounds = list(zip(family.lower, family.upper))
    x, ok = theta0, True
    for _ in range(2):
        step = np.maximum(0.1 * np.abs(x), 0.05)
        simplex = np.vstack([x] + [x + np.eye(len(x))[i] * step[i] for i in range(len(x))])
        simplex = np.clip(simplex, np.asarray(family.lower), np.asarray(family.upper))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(obj, x, method="Nelder-Mead", bounds=bounds,
                                    options={"maxfev": cfg.max_evals, "xatol": cfg.xatol,
                                             "fatol": cfg.fatol, "initial_simplex": simplex})
        moved = np.max(np.abs(res.x - x)) if res.success else np.inf
        x, ok = res.x, res.success
        if moved < cfg.xatol * 10:
            break
    x, _ = _newton(obj, x, family, n)
    return x, ok


def _newton(obj, x, family, n, steps=4, h=1e-3, tol=1e-5, gtol=None):
    """Finite-difference Newton steps on the per-observation objective.

    Returns ``(x, converged)``; converged means the Newton decrement of the
    total log-likelihood, ``n g' H^-1 g``, fell below ``tol`` (or, with
    ``gtol``, every component of the total gradient ``n g`` is below it). An
    indefinite Hessian is shifted to be positive definite and rejected steps
    are halved up to four times.
    """
    k = len(x)
    x = np.asarray(x, dtype=float)
    lo, hi = np.asarray(family.lower), np.asarray(family.upper)
    f0 = obj(x)
    if f0 >= _PENALTY:
        return x, False
    e = np.eye(k) * h
    for _ in range(steps):
        fp = np.array([obj(x + e[i]) for i in range(k)])
        fm = np.array([obj(x - e[i]) for i in range(k)])
        if np.any(fp >= _PENALTY) or np.any(fm >= _PENALTY):
            return x, False
        g = (fp - fm) / (2 * h)
        H = np.empty((k, k))
        for i in range(k):
            H[i, i] = (fp[i] - 2 * f0 + fm[i]) / h ** 2
            for j in range(i + 1, k):
                H[i, j] = H[j, i] = (obj(x + e[i] + e[j]) - obj(x + e[i] - e[j])
                                     - obj(x - e[i] + e[j]) + obj(x - e[i] - e[j])) / (4 * h * h)
        ev = np.linalg.eigvalsh(H)
        pd = ev.min() > 0
        if not pd:
            H = H + (abs(ev.min()) + 1e-3 * max(abs(ev.max()), 1.0)) * np.eye(k)
        step = np.linalg.solve(H, g)
        done = np.max(np.abs(n * g)) < gtol if gtol is not None else n * (g @ step) < tol
        if pd and done:
            return x, True
        for _ in range(5):
            xn = np.clip(x - step, lo, hi)
            fn = obj(xn)
            if fn <= f0:
                break
            step = 0.5 * step
        else:
            # at the noise floor a tiny rejected step still means convergence
            return x, bool(pd and np.max(np.abs(step)) < 1e-4)
        x, f0 = xn, fn
    return x, False


def _exact_polish(u, W, lam, family, theta, cfg):
    """Newton steps on the exact-path likelihood until ``|d ell / d theta| < cfg.grad_tol``.

    The table path used inside the optimizers carries about 1e-9 interpolation
    noise per row, too much for a gradient test on the total log-likelihood.
    Returns ``(theta, cos)`` with the COS configuration held fixed during the
    polish.
    """
    n = u.shape[0]
    cos = PccModel(W, lam, family.spec(theta, len(lam)), n_grid=cfg.n_grid).cos

    def obj(th):
        if not family.feasible(th, lam):
            return _PENALTY
        ll, _ = _loglik(u, W, lam, family, th, cfg.n_grid, cos, exact=True)
        return -ll / n if np.isfinite(ll) else _PENALTY

    x, ok = _newton(obj, theta, family, n, steps=4, h=1e-4, gtol=cfg.grad_tol)
    if not ok:
        log.info("exact polish stopped before |grad| < %g at %s", cfg.grad_tol, x)
    return x, cos


def _corr_step(u, model):
    y, _ = model.tables.inverse(u, exact=False)
    return psd_project(moment_correlation(y))


def fit_gmm_hybrid(u, family, cfg=None):
    """Iterative moment/likelihood estimator.

    Starting from the normal-scores correlation (and shape parameters fitted
    by ML on it), each iteration (a) re-estimates the correlation from the
    quantiles implied by the previous iterate, (b) redoes the PCA and (c) refits
    the shape parameters by ML with the correlation frozen. Stops once both
    the Frobenius change of the correlation and the shape change fall below
    their tolerances, or after ``cfg.max_iter`` iterations.
    """
    cfg = cfg or FitConfig()
    if isinstance(family, str):
        family = make_family(family, cfg.tail_link)
    u = _u(u)
    n, d = u.shape
    rho, W, lam = init_normal_scores(u)
    theta = family.init(lam)
    if family.k:
        theta, _ = _shape_mle(u, W, lam, family, theta, cfg)
    trace = [{"iteration": 0, "frobenius": None, "theta": theta.tolist(),
              "lambda_head": lam[:3].tolist()}]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        model = PccModel(W, lam, family.spec(theta, d), n_grid=cfg.n_grid)
        rho_new = _corr_step(u, model)
        W, lam = eigen_decompose(rho_new)
        delta = float(np.linalg.norm(rho_new - rho))
        theta_new = theta
        if family.k:
            theta_new, _ = _shape_mle(u, W, lam, family, theta, cfg, warm=True)
        dshape = float(np.max(np.abs(theta_new - theta))) if family.k else 0.0
        rho, theta = rho_new, theta_new
        trace.append({"iteration": it, "frobenius": delta, "shape_change": dshape,
                      "theta": theta.tolist(), "lambda_head": lam[:3].tolist()})
        log.info("gmm iteration %d: frobenius %.3g, shape %s", it, delta, theta)
        if delta < cfg.corr_tol and dshape < cfg.shape_tol:
            converged = True
            break
    cos = None
    if family.k:
        theta, cos = _exact_polish(u, W, lam, family, theta, cfg)
    ll, model = _loglik(u, W, lam, family, theta, cfg.n_grid, cos, exact=True)
    if model is None:
        raise ArithmeticError("final model has an infeasible parameter combination")
    trace[-1]["loglik"] = ll
    return FitResult(model, family.name, dict(zip(family.param_names, theta.tolist())),
                     float(ll), n, family.k, "gmm", it, converged, trace)


def fit_shape_only(u, family, W, lambdas, cfg=None, theta0=None):
    """Shape-parameter MLE with eigenvectors and eigenvalues held fixed."""
    cfg = cfg or FitConfig()
    if isinstance(family, str):
        family = make_family(family, cfg.tail_link)
    u = _u(u)
    theta0 = family.init(lambdas) if theta0 is None else np.asarray(theta0, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    theta, ok = _shape_mle(u, W, lambdas, family, theta0, cfg)
    cos = None
    if family.k:
        theta, cos = _exact_polish(u, W, lambdas, family, theta, cfg)
    ll, model = _loglik(u, W, lambdas, family, theta, cfg.n_grid, cos, exact=True)
    return FitResult(model, family.name, dict(zip(family.param_names, theta.tolist())),
                     float(ll), u.shape[0], family.k, "mle-shape", 1, bool(ok))


# --------------------------------------------------------------------------
# Structured correlation parameterizations for full MLE


def _sigmoid(x):
    return 0.5 * (1 + np.tanh(0.5 * x))


class Equicorrelation:
    name = "equicorrelation"

    def __init__(self, d):
        self.d = d
        self.lo = -1.0 / (d - 1)
        self.size = 1

    def matrix(self, x):
        r = self.lo + (1 - self.lo) * _sigmoid(x[0])
        m = np.full((self.d, self.d), r)
        np.fill_diagonal(m, 1.0)
        return m

    def init(self, rho):
        r = (rho.sum() - self.d) / (self.d * (self.d - 1))
        p = np.clip((r - self.lo) / (1 - self.lo), 1e-6, 1 - 1e-6)
        return np.array([np.log(p / (1 - p))])

    def describe(self, x):
        return {"rho": float(self.matrix(x)[0, 1])}


class TwoFactor:
    """``rho_ij = xi_i xi_j + g_i g_j`` with ``xi_i^2 + g_i^2 < 1``."""

    name = "two-factor"

    def __init__(self, d):
        self.d = d
        self.size = 2 * d

    def loadings(self, x):
        r = np.tanh(np.hypot(x[: self.d], x[self.d:]))
        ang = np.arctan2(x[self.d:], x[: self.d])
        return r * np.cos(ang), r * np.sin(ang)

    def matrix(self, x):
        xi, g = self.loadings(x)
        m = np.outer(xi, xi) + np.outer(g, g)
        np.fill_diagonal(m, 1.0)
        return m

    def init(self, rho):
        # principal-axis factoring: refit two factors with communalities on the diagonal
        m = np.array(rho, dtype=float)
        for _ in range(200):
            vals, vecs = np.linalg.eigh(m)
            load = vecs[:, -2:][:, ::-1] * np.sqrt(np.maximum(vals[-2:][::-1], 0.0))
            h = np.minimum((load ** 2).sum(axis=1), 0.999)
            if np.max(np.abs(h - np.diag(m))) < 1e-12:
                break
            np.fill_diagonal(m, h)
        r = np.minimum(np.hypot(load[:, 0], load[:, 1]), 0.99)
        ang = np.arctan2(load[:, 1], load[:, 0])
        s = np.arctanh(r)
        return np.concatenate([s * np.cos(ang), s * np.sin(ang)])

    def describe(self, x):
        xi, g = self.loadings(x)
        return {"xi": xi.tolist(), "gamma": g.tolist()}


class FreeCorrelation:
    """Unrestricted lower triangle (``tanh`` per entry, then PSD projection); small ``d`` only."""

    name = "free"

    def __init__(self, d):
        self.d = d
        self.tri = np.tril_indices(d, -1)
        self.size = len(self.tri[0])

    def matrix(self, x):
        m = np.eye(self.d)
        m[self.tri] = np.tanh(x)
        m = m + m.T - np.eye(self.d)
        return psd_project(m)

    def init(self, rho):
        return np.arctanh(np.clip(rho[self.tri], -0.999, 0.999))

    def describe(self, x):
        return {"rho_lower": self.matrix(x)[self.tri].tolist()}


PARAMETERIZATIONS = {"equicorrelation": Equicorrelation, "two-factor": TwoFactor,
                     "free": FreeCorrelation}


def fit_mle(u, family, parameterization="free", cfg=None):
    """Joint ML over correlation parameters and shape parameters.

    After every correlation update the matrix is eigendecomposed again and the
    marginal tables are rebuilt (both happen inside the model constructor).
    Uses L-BFGS-B with finite-difference gradients.
    """
    cfg = cfg or FitConfig(method="mle")
    if isinstance(family, str):
        family = make_family(family, cfg.tail_link)
    u = _u(u)
    n, d = u.shape
    par = PARAMETERIZATIONS[parameterization](d) if isinstance(parameterization, str) \
        else parameterization
    rho0, _, lam0 = init_normal_scores(u)
    xc0 = par.init(rho0)
    th0 = family.init(lam0)
    if family.k and not family.feasible(th0, lam0):
        th0 = family.init(lam0)

    def unpack(x):
        return x[: par.size], x[par.size:]

    best = {"f": np.inf, "x": None}

    def obj(x):
        xc, th = unpack(x)
        W, lam = eigen_decompose(par.matrix(xc))
        if family.k and not family.feasible(th, lam):
            return _PENALTY
        ll, _ = _loglik(u, W, lam, family, th, cfg.n_grid)
        f = -ll / n if np.isfinite(ll) else _PENALTY
        if f < best["f"]:
            best.update(f=f, x=x.copy())
        return f

    x0 = np.concatenate([xc0, th0])
    bounds = [(None, None)] * par.size + list(zip(family.lower, family.upper))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = optimize.minimize(obj, x0, method="L-BFGS-B", bounds=bounds,
                                options={"maxfun": cfg.max_evals * max(1, len(x0)),
                                         "ftol": 1e-12, "gtol": 1e-7})
    x = res.x if res.fun <= best["f"] else best["x"]
    xc, th = unpack(x)
    W, lam = eigen_decompose(par.matrix(xc))
    ll, model = _loglik(u, W, lam, family, th, cfg.n_grid, exact=True)
    return FitResult(model, family.name, dict(zip(family.param_names, np.asarray(th).tolist())),
                     float(ll), n, family.k, "mle", int(res.nit), bool(res.success),
                     corr_params=par.describe(xc))


def fit(u, family, cfg=None, parameterization="free"):
    cfg = cfg or FitConfig()
    if cfg.method == "mle":
        return fit_mle(u, family, parameterization, cfg)
    return fit_gmm_hybrid(u, family, cfg)


# --------------------------------------------------------------------------
# Bootstrap and model comparison


def _result_params(res):
    out = dict(res.theta)
    lam = res.model.lambdas
    out["lambda1"] = float(lam[0])
    if lam.shape[0] > 1:
        out["lambda2"] = float(lam[1])
    if res.corr_params and "rho" in res.corr_params:
        out["rho"] = res.corr_params["rho"]
    return out


def _boot_one(args):
    x, recipe, ss = args
    rng = np.random.default_rng(ss)
    idx = rng.integers(0, x.shape[0], x.shape[0])
    try:
        u = ranks_to_pseudo_obs(x[idx])
        return _result_params(recipe(u))
    except (ArithmeticError, ValueError) as exc:
        log.warning("bootstrap replicate failed: %s", exc)
        return None


def bootstrap_se(x, recipe, n_boot=100, seed=0, n_jobs=1):
    """Bootstrap standard deviations of fitted parameters.

    Rows of the filtered returns ``x`` are resampled with replacement, re-ranked
    and re-fitted with ``recipe(u) -> FitResult``. Replicates use seeds spawned
    from ``seed`` so results do not depend on ``n_jobs``.

    Returns
    -------
    dict
        ``{"sd": {param: sd}, "replicates": [...], "failed": count}``
    """
    if n_boot < 10:
        raise ValueError("need at least 10 bootstrap replicates")
    x = np.asarray(x, dtype=float)
    seeds = np.random.SeedSequence(seed).spawn(int(n_boot))
    jobs = [(x, recipe, s) for s in seeds]
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as ex:
            reps = list(ex.map(_boot_one, jobs))
    else:
        reps = [_boot_one(j) for j in jobs]
    good = [r for r in reps if r is not None]
    keys = good[0].keys() if good else []
    sd = {k: float(np.std([r[k] for r in good], ddof=1)) for k in keys}
    return {"sd": sd, "replicates": good, "failed": len(reps) - len(good)}


def information_criteria(fits):
    """AIC/BIC table with differences to the first fit.

    Only shape parameters are counted; correlation parameters are treated
    identically across the compared models.
    """
    if not fits:
        return []
    n = fits[0].n
    if any(f.n != n for f in fits):
        raise ValueError("fits were estimated on different sample sizes")
    base = fits[0]
    rows = []
    for f in fits:
        rows.append({"family": f.family, "k": f.k, "loglik": f.loglik, "aic": f.aic,
                     "bic": f.bic, "delta_aic": f.aic - base.aic, "delta_bic": f.bic - base.bic})
    return rows
