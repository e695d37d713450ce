"""Tail dependence of principal component copulas.

Analytic coefficients for the hyperbolic-normal model, a numeric limit of
``C(q, q) / q`` by direct integration over the generators, and Monte Carlo
estimates of the conditional probability of joint quantile exceedance.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .dist import NormalBlock
from .pcc import CopulaSample, ModelError, PccModel

DEFAULT_Q_SEQUENCE = tuple(10.0 ** -k for k in range(5, 13))
LINEAR_Q_SEQUENCE = (0.02, 0.01, 0.005, 0.0025)


class UnreliableEstimateWarning(RuntimeWarning):
    """Fewer than 10 expected exceedances behind a CPJQE estimate."""


@dataclass(frozen=True)
class TailCoefficients:
    eta_lower: float
    eta_upper: float
    method: str = "analytic"

    def __post_init__(self):
        for v in (self.eta_lower, self.eta_upper):
            if not 0.0 <= v <= 1.0:
                raise ValueError("tail coefficients must lie in [0, 1]")
        if self.method not in ("analytic", "numeric-limit", "monte-carlo"):
            raise ValueError(f"unknown method {self.method!r}")


def hb_n_tail_coeffs(alpha1, beta1, lambda2):
    """Tail dependence of the bivariate hyperbolic-normal copula.

    ``eta_l = 2 Phi(-(alpha1 + beta1) sqrt(lambda2))`` and
    ``eta_u = 2 Phi(-(alpha1 - beta1) sqrt(lambda2))``.
    """
    if not alpha1 > abs(beta1):
        raise ValueError("need alpha1 > |beta1|")
    if not lambda2 > 0:
        raise ValueError("need lambda2 > 0")
    s = np.sqrt(lambda2)
    return TailCoefficients(float(2 * special.ndtr(-(alpha1 + beta1) * s)),
                            float(2 * special.ndtr(-(alpha1 - beta1) * s)), "analytic")


# --------------------------------------------------------------------------
# Numeric limit


def _bvn_cdf(h, k, r):
    """Standard bivariate normal CDF via Owen's T (vectorized in ``h``, ``k``)."""
    h, k = np.broadcast_arrays(np.asarray(h, float), np.asarray(k, float))
    s = np.sqrt(1 - r * r)
    with np.errstate(divide="ignore", invalid="ignore"):
        ah = np.where(h != 0, (k - r * h) / (h * s), np.inf)
        ak = np.where(k != 0, (h - r * k) / (k * s), np.inf)
    th = np.where(h != 0, special.owens_t(h, np.where(np.isfinite(ah), ah, 0)), 0.0)
    tk = np.where(k != 0, special.owens_t(k, np.where(np.isfinite(ak), ak, 0)), 0.0)
    # Owen's T with infinite second argument
    th = np.where(h == 0, 0.25 * np.sign(k - r * h), th)
    tk = np.where(k == 0, 0.25 * np.sign(h - r * k), tk)
    beta = np.where((h * k < 0) | ((h * k == 0) & (h + k < 0)), 0.5, 0.0)
    return 0.5 * (special.ndtr(h) + special.ndtr(k)) - th - tk - beta


class _PairIntegrator:
    """``P(Y_i <= a, Y_j <= b)`` by integrating out one scalar non-normal generator.

    All other generators must be normal, so given the scalar generator value
    the remaining part of ``(Y_i, Y_j)`` is (possibly degenerate) bivariate
    normal.
    """

    def __init__(self, model, i, j):
        scal = [(idx, g) for idx, g in model.generators if not isinstance(g, NormalBlock)]
        if len(scal) != 1 or len(scal[0][0]) != 1:
            raise ModelError("numeric tail limit needs exactly one scalar non-normal "
                             "generator with all others normal; use mc_cpjqe otherwise")
        (idx, gen), = scal
        k = int(idx[0])
        self.gen = gen
        W = model.W
        self.wi, self.wj = W[i, k], W[j, k]
        var = np.where(np.arange(model.d) == k, 0.0, model.lambdas)
        self.si = np.sqrt(np.sum(W[i] ** 2 * var))
        self.sj = np.sqrt(np.sum(W[j] ** 2 * var))
        self.c = np.sum(W[i] * W[j] * var)
        self.sd = np.sqrt(model.lambdas[k])
        self.grid, self.dens = self._support()

    def _support(self, n=40001):
        lo, hi = -40 * self.sd, 40 * self.sd
        x = np.linspace(lo, hi, 4001)
        lp = self.gen.logpdf(x[:, None])
        keep = x[lp > lp.max() - 80]
        x = np.linspace(keep[0], keep[-1], n)
        return x, np.exp(self.gen.logpdf(x[:, None]))

    def cdf(self, a, b, sign=1.0):
        """``P(sign Y_i <= a, sign Y_j <= b)``."""
        p = self.grid
        if np.isinf(b):
            inner = special.ndtr((a - sign * self.wi * p) / self.si)
            return float(integrate.simpson(self.dens * inner, x=p))
        ra = a - sign * self.wi * p
        rb = b - sign * self.wj * p
        if self.si < 1e-12 or self.sj < 1e-12:
            raise ModelError("pair has no normal component")
        r = self.c / (self.si * self.sj)
        if abs(r) > 1 - 1e-10:
            # degenerate: N_j = r * (s_j/s_i) N_i
            za, zb = ra / self.si, rb / self.sj
            if r > 0:
                inner = special.ndtr(np.minimum(za, zb))
            else:
                inner = np.maximum(special.ndtr(za) - special.ndtr(-zb), 0.0)
        else:
            inner = _bvn_cdf(ra / self.si, rb / self.sj, r)
        return float(integrate.simpson(self.dens * np.clip(inner, 0, 1), x=p))


@dataclass
class TailLimit:
    eta: float
    q: np.ndarray
    values: np.ndarray
    quantiles: np.ndarray
    truncated: bool = False

    def as_coefficient(self):
        return float(np.clip(self.eta, 0.0, 1.0))


def _pair_quantile(integ, q, sign, guess):
    """Marginal quantile of ``sign * Y_i`` at level ``q`` from the integrator itself."""
    def f(y):
        with np.errstate(divide="ignore"):
            return np.log(max(integ.cdf(y, np.inf, sign=sign), 1e-300)) - np.log(q)

    lo, hi = guess - 1.0, guess + 1.0
    for _ in range(60):
        if f(lo) < 0:
            break
        lo -= 2 * (hi - lo)
    for _ in range(60):
        if f(hi) > 0:
            break
        hi += 2 * (hi - lo)
    return optimize.brentq(f, lo, hi, xtol=1e-12, rtol=1e-13)


def numeric_tail_limit(model, i=0, j=1, q_sequence=DEFAULT_Q_SEQUENCE, tail="lower",
                       extrapolation="quantile"):
    """Extrapolated limit of ``C(q, q) / q`` (or its upper-tail analogue) as ``q -> 0``.

    The joint probability is computed by integrating the scalar non-normal
    generator against the exact normal probability of the rest. Quantiles are
    solved from the same integrator, so the ratio is consistent deep in the tail.

    The ratio approaches its limit algebraically in the marginal quantile
    ``y_q`` (roughly like ``1 / y_q^2``), far too slowly for an extrapolation
    linear in ``q``. The default ``extrapolation="quantile"`` fits a quadratic
    in ``1 / |y_q|``; ``"linear-q"`` fits a straight line in ``q``.

    Returns
    -------
    TailLimit
        With the extrapolated value, the evaluated ``q``, the raw ratios and
        quantiles; ``truncated`` is set when some ``q`` had to be dropped.
    """
    q = np.asarray(q_sequence, dtype=float)
    if q.ndim != 1 or q.size < 2 or np.any(q <= 0) or np.any(q > 0.05) or np.any(np.diff(q) >= 0):
        raise ValueError("q_sequence must be decreasing values in (0, 0.05], at least two")
    if tail not in ("lower", "upper"):
        raise ValueError("tail must be 'lower' or 'upper'")
    if extrapolation not in ("quantile", "linear-q"):
        raise ValueError("extrapolation must be 'quantile' or 'linear-q'")
    sign = 1.0 if tail == "lower" else -1.0
    integ_i = _PairIntegrator(model, i, j)
    integ_j = _PairIntegrator(model, j, i)
    vals, used, ys = [], [], []
    for qk in q:
        try:
            level = qk if tail == "lower" else 1 - qk
            gi = sign * float(model.marginal(i).inverse_cdf(np.array([level]))[0])
            gj = sign * float(model.marginal(j).inverse_cdf(np.array([level]))[0])
            a = _pair_quantile(integ_i, qk, sign, gi)
            b = _pair_quantile(integ_j, qk, sign, gj)
            v = integ_i.cdf(a, b, sign=sign) / qk
        except (ValueError, RuntimeError):
            break
        if not np.isfinite(v):
            break
        vals.append(v)
        used.append(qk)
        ys.append(a)
    used, vals, ys = np.array(used), np.array(vals), np.array(ys)
    truncated = used.size < q.size
    if extrapolation == "linear-q":
        if used.size < 2:
            raise ArithmeticError("tail integration failed for all but one quantile")
        icept = np.polyfit(used, vals, 1)[1]
    else:
        if used.size < 4:
            raise ArithmeticError("quantile extrapolation needs at least four usable levels")
        icept = np.polyfit(1.0 / np.abs(ys), vals, 2)[-1]
    return TailLimit(float(icept), used, vals, ys, truncated)


# --------------------------------------------------------------------------
# CPJQE


def mc_cpjqe(source, q, n_sim=1_000_000, seed=0, upper=False):
    """Conditional probability of joint quantile exceedance, all pairs.

    ``eta[i, j] = (1 / (n q)) sum_t 1{u_i <= q, u_j <= q}``. ``source`` is a
    :class:`CopulaSample` (or array) or a :class:`PccModel`, which is first
    simulated with ``n_sim`` rows. With ``upper`` the events are ``u > 1 - q``.
    """
    if not 0 < q <= 0.5:
        raise ValueError("q must lie in (0, 0.5]")
    if isinstance(source, PccModel):
        u = source.simulate(n_sim, seed).u
    elif isinstance(source, CopulaSample):
        u = source.u
    else:
        u = np.asarray(source, dtype=float)
    n = u.shape[0]
    if n * q < 10:
        warnings.warn(f"n*q = {n * q:.3g} < 10: CPJQE estimate is unreliable",
                      UnreliableEstimateWarning, stacklevel=2)
    ind = (u > 1 - q) if upper else (u <= q)
    ind = ind.astype(np.float64)
    counts = ind.T @ ind
    counts = np.round(0.5 * (counts + counts.T))
    return counts / (n * q)


def cpjqe_curve(source, i, j, q_grid, n_sim=1_000_000, seed=0):
    """Pairwise CPJQE over a grid of quantiles (lower tail), for plotting."""
    if isinstance(source, PccModel):
        u = source.simulate(n_sim, seed).u[:, [i, j]]
    else:
        u = (source.u if isinstance(source, CopulaSample) else np.asarray(source))[:, [i, j]]
    n = u.shape[0]
    out = []
    for q in q_grid:
        both = np.count_nonzero((u[:, 0] <= q) & (u[:, 1] <= q))
        out.append(both / (n * q))
    return np.array(out)
