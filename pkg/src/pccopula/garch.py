"""AR(1)-GARCH(1,1) filtering of return series.

Model::

    r_t       = delta + phi r_{t-1} + eps_t
    eps_t     = sigma_t z_t
    sigma_t^2 = omega + alpha eps_{t-1}^2 + beta sigma_{t-1}^2

Parameters are estimated by Gaussian quasi-maximum likelihood; the
devolatized residuals ``eps_t / sigma_t`` are the input to copula estimation.
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize, special

from . import kernels
from .dist import as_seed_sequence

log = logging.getLogger(__name__)

MIN_LENGTH = 200


class GarchError(ArithmeticError):
    """Fit failed or produced a non-stationary variance process."""


@dataclass(frozen=True)
class GarchFit:
    delta: float
    phi: float
    omega: float
    alpha_g: float
    beta_g: float
    nll: float = float("nan")
    n: int = 0
    se: dict = None
    init: str = "unconditional"

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.alpha_g < 0 or self.beta_g < 0:
            raise ValueError("alpha_g and beta_g must be nonnegative")
        if not self.alpha_g + self.beta_g < 1:
            raise ValueError("alpha_g + beta_g must be < 1 for covariance stationarity")

    @property
    def persistence(self):
        return self.alpha_g + self.beta_g

    @property
    def unconditional_variance(self):
        return self.omega / (1 - self.persistence)

    def to_dict(self):
        return asdict(self)


def _ar_residuals(r, delta, phi):
    return r[1:] - delta - phi * r[:-1]


def _sigma2_0(eps, omega, alpha, beta, init):
    if init == "unconditional":
        return omega / (1 - alpha - beta)
    return float(np.mean(eps * eps))


def _nll(r, delta, phi, omega, alpha, beta, init):
    eps = _ar_residuals(r, delta, phi)
    _, nll = kernels.garch_recursion(eps, omega, alpha, beta, _sigma2_0(eps, omega, alpha, beta, init))
    return nll


def _unpack(x):
    """Unconstrained vector -> (delta, phi, omega, alpha, beta)."""
    delta = x[0]
    phi = np.tanh(x[1])
    omega = np.exp(x[2])
    p = special.expit(x[3])
    s = special.expit(x[4])
    return delta, phi, omega, p * s, p * (1 - s)


def _pack(delta, phi, omega, alpha, beta):
    p = min(max(alpha + beta, 1e-6), 1 - 1e-6)
    s = min(max(alpha / p, 1e-6), 1 - 1e-6)
    return np.array([delta, np.arctanh(np.clip(phi, -0.99, 0.99)), np.log(omega),
                     special.logit(p), special.logit(s)])


def _check_series(r):
    r = np.asarray(r, dtype=float)
    if r.ndim != 1:
        raise ValueError("expected a 1-D return series")
    if r.shape[0] < MIN_LENGTH:
        raise ValueError(f"need at least {MIN_LENGTH} observations, got {r.shape[0]}")
    if not np.all(np.isfinite(r)):
        raise ValueError("return series contains NaN or infinite values")
    if np.ptp(r) == 0:
        raise ValueError("return series is constant")
    return r


def fit_ar_garch(r, init="unconditional", with_se=True):
    """Gaussian QML fit of the AR(1)-GARCH(1,1) model.

    Parameters
    ----------
    r : array_like
        Return series, at least 200 observations.
    init : {"unconditional", "sample"}
        Start of the variance recursion: ``omega / (1 - alpha - beta)`` or the
        sample variance of the AR residuals.
    with_se : bool
        Attach standard errors from the inverse numerical Hessian.

    Returns
    -------
    GarchFit
    """
    r = _check_series(r)
    if init not in ("unconditional", "sample"):
        raise ValueError("init must be 'unconditional' or 'sample'")
    scale = float(np.std(r))
    z = r / scale
    rho1 = float(np.corrcoef(z[1:], z[:-1])[0, 1])
    x0 = _pack(float(np.mean(z)) * (1 - rho1), rho1, 0.05, 0.05, 0.9)

    def f(x):
        val = _nll(z, *_unpack(x), init)
        return val if np.isfinite(val) else 1e300

    best = None
    for start in (x0, _pack(float(np.mean(z)), 0.0, 0.9, 0.02, 0.05)):
        res = optimize.minimize(f, start, method="L-BFGS-B",
                                options={"maxiter": 2000, "ftol": 1e-14, "gtol": 1e-8})
        if best is None or res.fun < best.fun:
            best = res
    if not np.isfinite(best.fun) or best.fun >= 1e299:
        raise GarchError(f"QML failed: {best.message}")
    gnorm = float(np.max(np.abs(best.jac))) if best.jac is not None else np.inf
    if not best.success and gnorm > 1e-3 * len(z):
        raise GarchError(f"QML did not converge ({best.message}); max |grad| = {gnorm:.3g}")
    delta, phi, omega, alpha, beta = _unpack(best.x)
    if not alpha + beta < 1:
        raise GarchError(f"non-stationary fit: alpha + beta = {alpha + beta:.6f}")
    # back to the original scale
    delta, omega = delta * scale, omega * scale ** 2
    nll = _nll(r, delta, phi, omega, alpha, beta, init)
    se = _standard_errors(r, (delta, phi, omega, alpha, beta), init) if with_se else None
    return GarchFit(float(delta), float(phi), float(omega), float(alpha), float(beta),
                    float(nll), int(r.shape[0]), se, init)


def _standard_errors(r, params, init):
    names = ("delta", "phi", "omega", "alpha_g", "beta_g")
    p = np.array(params, dtype=float)
    h = np.maximum(np.abs(p), 1e-3) * 1e-4

    def f(q):
        d, ph, om, a, b = q
        if om <= 0 or a < 0 or b < 0 or a + b >= 1:
            return np.nan
        return _nll(r, d, ph, om, a, b, init)

    k = len(p)
    H = np.empty((k, k))
    f0 = f(p)
    for i in range(k):
        for j in range(i, k):
            ei, ej = np.eye(k)[i] * h[i], np.eye(k)[j] * h[j]
            if i == j:
                H[i, i] = (f(p + ei) - 2 * f0 + f(p - ei)) / h[i] ** 2
            else:
                H[i, j] = H[j, i] = (f(p + ei + ej) - f(p + ei - ej) - f(p - ei + ej)
                                     + f(p - ei - ej)) / (4 * h[i] * h[j])
    try:
        cov = np.linalg.inv(H)
        sd = np.sqrt(np.where(np.diag(cov) > 0, np.diag(cov), np.nan))
    except np.linalg.LinAlgError:
        sd = np.full(k, np.nan)
    return {n: float(s) for n, s in zip(names, sd)}


def conditional_variance(r, fit):
    r = np.asarray(r, dtype=float)
    eps = _ar_residuals(r, fit.delta, fit.phi)
    s2, _ = kernels.garch_recursion(eps, fit.omega, fit.alpha_g, fit.beta_g,
                                    _sigma2_0(eps, fit.omega, fit.alpha_g, fit.beta_g, fit.init))
    return eps, s2


def filter_residuals(r, fit):
    """Devolatized residuals ``eps_t / sigma_t``; length ``n - 1``."""
    eps, s2 = conditional_variance(r, fit)
    return eps / np.sqrt(s2)


def fit_and_filter(returns, init="unconditional"):
    """Fit every column of an ``n x d`` return matrix; returns ``(fits, residuals)``."""
    returns = np.asarray(returns, dtype=float)
    fits = [fit_ar_garch(returns[:, i], init=init) for i in range(returns.shape[1])]
    x = np.column_stack([filter_residuals(returns[:, i], f) for i, f in enumerate(fits)])
    return fits, x


def log_returns(prices):
    prices = np.asarray(prices, dtype=float)
    if np.any(prices <= 0):
        raise ValueError("prices must be positive")
    return np.diff(np.log(prices), axis=0)


def simulate_ar_garch(n, delta, phi, omega, alpha, beta, seed=0, burn=500):
    """Simulate ``n`` returns with Gaussian innovations (after ``burn`` discarded steps)."""
    if not alpha + beta < 1:
        raise ValueError("need alpha + beta < 1")
    rng = np.random.default_rng(as_seed_sequence(seed))
    m = n + burn
    z = rng.standard_normal(m)
    r = np.empty(m)
    s2 = omega / (1 - alpha - beta)
    r_prev = delta / (1 - phi)
    eps_prev = 0.0
    for t in range(m):
        s2 = omega + alpha * eps_prev ** 2 + beta * s2
        eps_prev = np.sqrt(s2) * z[t]
        r[t] = delta + phi * r_prev + eps_prev
        r_prev = r[t]
    return r[burn:]


def ljung_box(x, lags=10):
    """Ljung-Box Q statistic and chi-square p-value."""
    from scipy import stats

    x = np.asarray(x, dtype=float) - np.mean(x)
    n = x.shape[0]
    denom = np.sum(x * x)
    acf = np.array([np.sum(x[k:] * x[:-k]) / denom for k in range(1, lags + 1)])
    q = n * (n + 2) * np.sum(acf ** 2 / (n - np.arange(1, lags + 1)))
    return float(q), float(stats.chi2.sf(q, lags))
