"""Generator distributions for principal component copulas.

Each generator group is a small immutable object exposing ``logpdf``, ``cf``,
``log_marginal_cf`` (the group CF evaluated along ``t * w_i`` for every row
``w_i`` of a loading block, vectorised over margins) and ``sample``.

Families
--------
NormalBlock
    Independent normals with given variances.
Hyperbolic
    Univariate hyperbolic law, moment matched to mean zero and a target variance.
SkewTGroup
    Joint (GH skew) t law sharing one inverse-gamma mixing variable; skewness
    is only allowed on the first coordinate so the covariance stays diagonal.
TBlock
    Independent univariate t laws with a common degrees-of-freedom parameter.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special


class ParameterError(ValueError):
    """Raised for parameters outside a distribution's domain."""


class InfeasibleSkewnessError(ParameterError):
    """Raised when moment matching a skew t gives a non-positive dispersion."""


# --------------------------------------------------------------------------
# Bessel helpers


def _log_kve_asymptotic(order, z):
    """``log(K_order(z) e^z)`` for large ``|z|``, two terms of the Hankel expansion."""
    mu = 4.0 * order * order
    return 0.5 * np.log(np.pi / (2 * z)) + np.log1p((mu - 1) / (8 * z)
                                                    + (mu - 1) * (mu - 9) / (128 * z * z))


def _log_kve(order, z):
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        val = np.log(special.kve(order, z))
    # kve returns nan beyond |z| ~ 1e9
    big = ~np.isfinite(val) & (np.abs(z) > 1e3)
    if np.any(big):
        val = np.where(big, _log_kve_asymptotic(order, np.where(big, z, 1e3)), val)
    return val


def log_bessel_k(order, z):
    """``log K_order(z)`` for real or complex ``z`` (principal branch) via ``kve``."""
    z = np.asarray(z)
    return _log_kve(order, z) - z


def log_zk(a, z):
    """``log(z**a K_a(z))`` for ``a > 0``, continuous through ``z = 0``.

    At ``z = 0`` the limit ``log(Gamma(a) 2**(a-1))`` is used; the same limit
    replaces values where ``kve`` over- or underflows for tiny ``|z|``.
    """
    z = np.asarray(z)
    limit = special.gammaln(a) + (a - 1.0) * np.log(2.0)
    out = np.full(z.shape, limit, dtype=np.result_type(z.dtype, float))
    nz = np.abs(z) > 0
    if np.any(nz):
        zz = z[nz]
        with np.errstate(divide="ignore", invalid="ignore"):
            val = a * np.log(zz) + _log_kve(a, zz) - zz
        bad = ~np.isfinite(val)
        if np.any(bad):
            val = np.where(bad, limit, val)
        out[nz] = val
    return out


# --------------------------------------------------------------------------
# Hyperbolic


@dataclass(frozen=True)
class HyperbolicParams:
    alpha: float
    beta: float
    chi: float
    mu: float

    def __post_init__(self):
        if not (self.alpha > abs(self.beta)):
            raise ParameterError(f"need alpha > |beta|, got alpha={self.alpha}, beta={self.beta}")
        if not self.chi > 0:
            raise ParameterError(f"need chi > 0, got {self.chi}")

    @property
    def psi(self):
        return self.alpha**2 - self.beta**2


def _hyperbolic_moments(alpha, beta, chi):
    """Mean offset ``E[X] - mu`` and variance of the hyperbolic law."""
    psi = alpha**2 - beta**2
    om = np.sqrt(chi * psi)
    k1 = special.kve(1, om)
    ew = np.sqrt(chi / psi) * special.kve(2, om) / k1
    ew2 = (chi / psi) * special.kve(3, om) / k1
    return beta * ew, ew + beta**2 * (ew2 - ew**2)


def hyperbolic_pdf(x, p):
    """Density of the hyperbolic law with parameters ``p`` (HyperbolicParams)."""
    return np.exp(hyperbolic_logpdf(x, p))


def hyperbolic_logpdf(x, p):
    x = np.asarray(x, dtype=float)
    psi = p.psi
    om = np.sqrt(p.chi * psi)
    lognorm = 0.5 * np.log(psi / p.chi) - np.log(2 * p.alpha) - log_bessel_k(1, om)
    dx = x - p.mu
    return lognorm - p.alpha * np.sqrt(p.chi + dx * dx) + p.beta * dx


def hyperbolic_variance_bounds(alpha, beta):
    """Smallest attainable variance (the ``chi -> 0`` limit) for given tail parameters."""
    psi = alpha**2 - beta**2
    return 2.0 / psi + 4.0 * beta**2 / psi**2


def hyperbolic_match_moments(alpha, beta, target_var, chi_bounds=(1e-8, 1e8)):
    """Hyperbolic parameters with mean zero and variance ``target_var``.

    The variance increases monotonically in ``chi``, so ``chi`` is found by a
    bracketing root search on ``log chi``; ``mu`` then removes the mean.

    Raises
    ------
    ParameterError
        If ``alpha <= |beta|`` or ``target_var <= 0``.
    ArithmeticError
        If ``target_var`` is not bracketed by the variances at ``chi_bounds``
        (for small variances: below the Laplace-type floor ``2/psi + 4 beta^2/psi^2``).
    """
    if not alpha > abs(beta):
        raise ParameterError(f"need alpha > |beta|, got alpha={alpha}, beta={beta}")
    if not target_var > 0:
        raise ParameterError("target variance must be positive")

    def g(logchi):
        return np.log(_hyperbolic_moments(alpha, beta, np.exp(logchi))[1]) - np.log(target_var)

    lo, hi = np.log(chi_bounds[0]), np.log(chi_bounds[1])
    glo, ghi = g(lo), g(hi)
    if not (glo < 0 < ghi):
        raise ArithmeticError(
            f"variance {target_var} not attainable for alpha={alpha}, beta={beta} "
            f"(minimum {hyperbolic_variance_bounds(alpha, beta):.6g})"
        )
    logchi = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-13, maxiter=500)
    chi = float(np.exp(logchi))
    shift, _ = _hyperbolic_moments(alpha, beta, chi)
    return HyperbolicParams(float(alpha), float(beta), chi, float(-shift))


def hyperbolic_log_cf(t, p):
    t = np.asarray(t, dtype=float)
    psi = p.psi
    q = psi + t * t - 2j * p.beta * t
    om = np.sqrt(p.chi * psi)
    return (1j * t * p.mu + 0.5 * (np.log(psi) - np.log(q))
            + log_bessel_k(1, np.sqrt(p.chi * q)) - log_bessel_k(1, om))


def hyperbolic_cf(t, p):
    return np.exp(hyperbolic_log_cf(t, p))


# --------------------------------------------------------------------------
# Generalised hyperbolic characteristic function


@dataclass(frozen=True)
class GhParams:
    lam: float
    chi: float
    psi: float
    mu: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "sigma", sigma)
        d = mu.shape[0]
        if gamma.shape != (d,) or sigma.shape != (d, d):
            raise ParameterError("inconsistent GH parameter dimensions")
        if not np.allclose(sigma, sigma.T):
            raise ParameterError("Sigma must be symmetric")
        if np.linalg.eigvalsh(sigma).min() <= 0:
            raise ParameterError("Sigma must be positive definite")
        if self.chi <= 0 or self.psi < 0:
            raise ParameterError("need chi > 0 and psi >= 0")
        if self.psi == 0 and self.lam >= 0:
            raise ParameterError("psi = 0 requires lambda < 0 (skew t limit)")


def gh_cf(t, p):
    """Characteristic function of the multivariate GH law.

    ``t`` has shape ``(..., d)``. With ``psi == 0`` the skew t limit
    ``2^(1-a)/Gamma(a) z^a K_a(z)``, ``a = -lambda``, is evaluated directly.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        t = t[None]
    tst = np.einsum("...i,ij,...j->...", t, p.sigma, t)
    tg = t @ p.gamma
    loc = 1j * (t @ p.mu)
    q = p.psi + tst - 2j * tg
    if p.psi == 0:
        a = -p.lam
        z = np.sqrt(p.chi * q)
        return np.exp(loc + (1 - a) * np.log(2.0) - special.gammaln(a) + log_zk(a, z))
    om = np.sqrt(p.chi * p.psi)
    lam = p.lam
    val = (loc + 0.5 * lam * (np.log(p.psi) - np.log(q))
           + log_bessel_k(lam, np.sqrt(p.chi * q)) - log_bessel_k(lam, om))
    return np.exp(val)


# --------------------------------------------------------------------------
# Skew t


@dataclass(frozen=True)
class SkewT1Params:
    nu: float
    lambda_var: float
    gamma1: float
    mu1: float
    sigma11: float


def skewt1_match_moments(nu, gamma1, target_var):
    """Location and dispersion giving a GH skew t with mean 0 and variance ``target_var``."""
    if not nu > 4:
        raise ParameterError(f"skew t generator needs nu > 4, got {nu}")
    if not target_var > 0:
        raise ParameterError("target variance must be positive")
    mu1 = -nu * gamma1 / (nu - 2)
    s11 = (nu - 2) / nu * target_var - 2 * nu / ((nu - 2) * (nu - 4)) * gamma1**2
    if not s11 > 0:
        raise InfeasibleSkewnessError(
            f"skewness gamma={gamma1} too large for nu={nu}, variance={target_var}"
        )
    return SkewT1Params(float(nu), float(target_var), float(gamma1), float(mu1), float(s11))


def t_dispersion(nu, variances):
    """Diagonal dispersion ``(nu-2) Lambda / nu`` of a t law with given variances."""
    return (nu - 2) / nu * np.asarray(variances, dtype=float)


def _log_t_cf_const(a):
    return (1 - a) * np.log(2.0) - special.gammaln(a)


def skewt1_cf(t, p):
    """CF of the univariate moment-matched GH skew t (exact ``psi -> 0`` form)."""
    t = np.asarray(t, dtype=float)
    a = p.nu / 2
    q = p.sigma11 * t * t - 2j * p.gamma1 * t
    z = np.sqrt(p.nu * q)
    return np.exp(1j * t * p.mu1 + _log_t_cf_const(a) + log_zk(a, z))


# --------------------------------------------------------------------------
# Generator groups


def _as_var(v):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if np.any(v <= 0):
        raise ParameterError("generator variances must be positive")
    return v


@dataclass(frozen=True, eq=False)
class NormalBlock:
    """Independent centred normals with variances ``variances``."""

    variances: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "variances", _as_var(self.variances))

    @property
    def dim(self):
        return self.variances.shape[0]

    def logpdf(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        v = self.variances
        return -0.5 * (np.sum(x * x / v, axis=1) + np.sum(np.log(2 * np.pi * v)))

    def log_cf(self, s):
        s = np.asarray(s, dtype=float)
        return -0.5 * np.sum(s * s * self.variances, axis=-1) + 0j

    def log_marginal_cf(self, t, w):
        q = (w * w) @ self.variances
        return -0.5 * np.multiply.outer(q, np.asarray(t) ** 2) + 0j

    def sample(self, n, rng):
        return rng.standard_normal((n, self.dim)) * np.sqrt(self.variances)

    def tail(self):
        return None


@dataclass(frozen=True, eq=False)
class Hyperbolic:
    """Scalar hyperbolic generator HB(alpha, beta, variance)."""

    alpha: float
    beta: float
    variance: float
    params: HyperbolicParams = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "params",
                           hyperbolic_match_moments(self.alpha, self.beta, self.variance))

    dim = 1

    @property
    def variances(self):
        return np.array([self.variance])

    def logpdf(self, x):
        return hyperbolic_logpdf(np.asarray(x, dtype=float).reshape(-1), self.params)

    def log_cf(self, s):
        s = np.asarray(s, dtype=float)
        return hyperbolic_log_cf(s[..., 0], self.params)

    def log_marginal_cf(self, t, w):
        return hyperbolic_log_cf(np.multiply.outer(w[:, 0], np.asarray(t)), self.params)

    def sample(self, n, rng):
        p = self.params
        scale = np.sqrt(p.chi / p.psi)
        b = np.sqrt(p.chi * p.psi)
        from scipy.stats import geninvgauss

        mix = scale * geninvgauss.rvs(1.0, b, size=n, random_state=rng)
        z = rng.standard_normal(n)
        return (p.mu + p.beta * mix + np.sqrt(mix) * z)[:, None]

    def tail(self):
        return ("exp", self.alpha - abs(self.beta))


@dataclass(frozen=True, eq=False)
class SkewTGroup:
    """Multivariate t sharing one IG(nu/2, nu/2) mixing variable.

    ``gamma`` skews the first coordinate only; with ``gamma = 0`` this is the
    (diagonal) multivariate t. Means are zero and variances equal ``variances``.
    """

    nu: float
    variances: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        v = _as_var(self.variances)
        object.__setattr__(self, "variances", v)
        nu, g = float(self.nu), float(self.gamma)
        if g != 0.0:
            p1 = skewt1_match_moments(nu, g, v[0])
            s = t_dispersion(nu, v)
            s[0] = p1.sigma11
            mu1 = p1.mu1
        else:
            if not nu > 2:
                raise ParameterError(f"t generator needs nu > 2, got {nu}")
            s = t_dispersion(nu, v)
            mu1 = 0.0
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "mu1", float(mu1))

    @property
    def dim(self):
        return self.variances.shape[0]

    def logpdf(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        nu, d, s = float(self.nu), self.dim, self.sigma
        dx = x.copy()
        dx[:, 0] -= self.mu1
        q = np.sum(dx * dx / s, axis=1)
        a = 0.5 * (nu + d)
        logc = ((1 - a) * np.log(2.0) - special.gammaln(nu / 2)
                - 0.5 * d * np.log(np.pi * nu) - 0.5 * np.sum(np.log(s)))
        g = self.gamma
        if g == 0.0:
            kz = special.gammaln(a) + (a - 1) * np.log(2.0)
            skew = 0.0
        else:
            gsg = g * g / s[0]
            kz = log_zk(a, np.sqrt((nu + q) * gsg))
            skew = dx[:, 0] * g / s[0]
        return logc + kz + skew - a * np.log1p(q / nu)

    def log_cf(self, s):
        s = np.asarray(s, dtype=float)
        nu = float(self.nu)
        q = np.sum(s * s * self.sigma, axis=-1) - 2j * self.gamma * s[..., 0]
        a = nu / 2
        return 1j * s[..., 0] * self.mu1 + _log_t_cf_const(a) + log_zk(a, np.sqrt(nu * q))

    def log_marginal_cf(self, t, w):
        t = np.asarray(t, dtype=float)
        nu = float(self.nu)
        qi = (w * w) @ self.sigma
        wi = w[:, 0]
        tt = np.multiply.outer(np.ones_like(qi), t)
        q = np.multiply.outer(qi, t * t) - 2j * self.gamma * np.multiply.outer(wi, t)
        a = nu / 2
        return 1j * tt * (wi * self.mu1)[:, None] + _log_t_cf_const(a) + log_zk(a, np.sqrt(nu * q))

    def sample(self, n, rng):
        nu = float(self.nu)
        v = 1.0 / rng.gamma(nu / 2, 2.0 / nu, size=n)
        z = rng.standard_normal((n, self.dim)) * np.sqrt(self.sigma)
        x = np.sqrt(v)[:, None] * z
        x[:, 0] += self.mu1 + self.gamma * v
        return x

    def tail(self):
        return ("power", float(self.nu) / 2 if self.gamma != 0 else float(self.nu))


@dataclass(frozen=True, eq=False)
class TBlock:
    """Independent univariate t generators sharing ``nu``."""

    nu: float
    variances: np.ndarray

    def __post_init__(self):
        v = _as_var(self.variances)
        if not float(self.nu) > 2:
            raise ParameterError(f"t generator needs nu > 2, got {self.nu}")
        object.__setattr__(self, "variances", v)
        object.__setattr__(self, "sigma", t_dispersion(float(self.nu), v))

    @property
    def dim(self):
        return self.variances.shape[0]

    def logpdf(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        nu, s = float(self.nu), self.sigma
        c = (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
             - 0.5 * np.log(np.pi * nu * s))
        return np.sum(c - 0.5 * (nu + 1) * np.log1p(x * x / (nu * s)), axis=1)

    def _log_cf_abs(self, s_abs, sigma):
        nu = float(self.nu)
        a = nu / 2
        return _log_t_cf_const(a) + log_zk(a, np.sqrt(nu * sigma) * s_abs)

    def log_cf(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        return np.sum(self._log_cf_abs(s, self.sigma), axis=-1) + 0j

    def log_marginal_cf(self, t, w):
        t = np.abs(np.asarray(t, dtype=float))
        # (d, N, dim) block; fine for the dimensions used here
        arg = np.abs(w)[:, None, :] * t[None, :, None]
        return np.sum(self._log_cf_abs(arg, self.sigma), axis=-1) + 0j

    def sample(self, n, rng):
        nu = float(self.nu)
        v = 1.0 / rng.gamma(nu / 2, 2.0 / nu, size=(n, self.dim))
        return np.sqrt(v * self.sigma) * rng.standard_normal((n, self.dim))

    def tail(self):
        return ("power", float(self.nu))


GENERATOR_KINDS = {
    "normal": NormalBlock,
    "hyperbolic": Hyperbolic,
    "skewt": SkewTGroup,
    "tblock": TBlock,
}


# --------------------------------------------------------------------------
# Group structure


@dataclass(frozen=True)
class GroupDef:
    """One independent generator group: a kind, its PC indices and shape parameters."""

    kind: str
    indices: tuple
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ParameterError(f"unknown generator kind {self.kind!r}")
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "params", {k: float(v) for k, v in dict(self.params).items()})
        if len(self.indices) == 0:
            raise ParameterError("empty generator group")
        if self.kind == "hyperbolic" and len(self.indices) != 1:
            raise ParameterError("hyperbolic generators are univariate")

    def build(self, lambdas):
        v = np.asarray(lambdas, dtype=float)[list(self.indices)]
        p = self.params
        if self.kind == "normal":
            return NormalBlock(v)
        if self.kind == "hyperbolic":
            return Hyperbolic(p["alpha"], p["beta"], float(v[0]))
        if self.kind == "skewt":
            return SkewTGroup(p["nu"], v, p.get("gamma", 0.0))
        return TBlock(p["nu"], v)


@dataclass(frozen=True)
class GroupSpec:
    """Partition of the ``d`` generators into independent groups."""

    groups: tuple

    def __post_init__(self):
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        idx = sorted(i for g in groups for i in g.indices)
        if idx != list(range(len(idx))):
            raise ParameterError("group index sets must be disjoint and cover 0..d-1")

    @property
    def d(self):
        return sum(len(g.indices) for g in self.groups)

    @property
    def kind(self):
        dims = [len(g.indices) for g in self.groups]
        if all(k == 1 for k in dims) or all(
                g.kind in ("normal", "tblock") or len(g.indices) == 1 for g in self.groups):
            return "IndependentScalars"
        if (len(self.groups) == 2 and self.groups[0].indices == (0,)
                and self.groups[1].kind == "skewt"):
            return "FirstPlusJointT"
        return "CustomGroups"

    def build(self, lambdas):
        """Instantiate ``[(indices, generator), ...]`` for eigenvalues ``lambdas``."""
        lambdas = np.asarray(lambdas, dtype=float)
        if lambdas.shape != (self.d,):
            raise ParameterError(f"spec has d={self.d} but {lambdas.shape[0]} eigenvalues given")
        return [(np.array(g.indices), g.build(lambdas)) for g in self.groups]

    def max_power_tail(self):
        """Smallest tail index among power-tailed groups, or ``inf``."""
        out = np.inf
        for g in self.groups:
            if g.kind in ("skewt", "tblock"):
                out = min(out, g.params["nu"])
        return out

    def to_dict(self):
        return {"groups": [{"kind": g.kind, "indices": list(g.indices), "params": dict(g.params)}
                           for g in self.groups]}

    @classmethod
    def from_dict(cls, obj):
        return cls(tuple(GroupDef(g["kind"], tuple(g["indices"]), g.get("params", {}))
                         for g in obj["groups"]))


def as_seed_sequence(seed):
    """A fresh ``SeedSequence`` from an int, ``None`` or an existing sequence.

    Existing sequences are copied so spawning never mutates the caller's object
    and repeated calls with the same seed give the same streams.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    return np.random.SeedSequence(seed)


def sample_generators(spec, eigenvalues, n, seed):
    """Draw ``n`` rows of generator values P (``n x d``).

    Each group gets its own child stream of ``numpy.random.SeedSequence(seed)``,
    so groups are independent and the output is reproducible.
    """
    built = spec.build(eigenvalues)
    root = as_seed_sequence(seed)
    seeds = root.spawn(len(built))
    out = np.empty((int(n), spec.d))
    for (idx, gen), ss in zip(built, seeds):
        out[:, idx] = gen.sample(int(n), np.random.default_rng(ss))
    return out
