"""Principal component copula models.

A model is ``Y = W P``: ``W`` holds the eigenvectors of the correlation matrix
of ``Y`` and the generators ``P`` are uncorrelated with variances equal to the
eigenvalues. The generators are split into independent groups (see
:class:`pccopula.dist.GroupSpec`), so the CF of ``Y`` is a product of group CFs
and the joint density is a product of group densities at ``W' y``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import __version__
from .dist import GroupSpec, as_seed_sequence, sample_generators
from .transform import CDF_EPS, CosConfig, MarginalTables

SIM_BLOCK = 1 << 16
MIN_EIGENVALUE = 1e-10


class ModelError(ValueError):
    """Inconsistent model inputs or a corrupt serialized model."""


# --------------------------------------------------------------------------
# Correlation helpers


def sign_convention(W):
    """Flip columns so that the entry of largest magnitude is positive (first one on ties)."""
    W = np.array(W, dtype=float)
    a = np.abs(W)
    for j in range(W.shape[1]):
        col = a[:, j]
        i = int(np.flatnonzero(col >= col.max() * (1 - 1e-12))[0])
        if W[i, j] < 0:
            W[:, j] = -W[:, j]
    return W


def eigen_decompose(rho):
    """Eigenvectors and eigenvalues of a correlation matrix, descending.

    Eigenvalues are floored at zero and rescaled to sum to ``d``; columns follow
    :func:`sign_convention`.
    """
    rho = np.asarray(rho, dtype=float)
    rho = 0.5 * (rho + rho.T)
    vals, vecs = np.linalg.eigh(rho)
    order = np.argsort(vals, kind="stable")[::-1]
    vals, vecs = vals[order], vecs[:, order]
    vals = np.maximum(vals, 0.0)
    vals *= rho.shape[0] / vals.sum()
    return sign_convention(vecs), vals


def psd_project(m):
    """Nearest-by-clipping valid correlation matrix: symmetrize, floor eigenvalues, unit diagonal."""
    m = 0.5 * (np.asarray(m, dtype=float) + np.asarray(m, dtype=float).T)
    vals, vecs = np.linalg.eigh(m)
    if vals.min() >= 0:
        out = m
    else:
        # a tiny positive floor keeps every diagonal entry strictly positive
        floor = 1e-10 * max(vals.max(), 1.0)
        out = (vecs * np.maximum(vals, floor)) @ vecs.T
    s = np.sqrt(np.diag(out))
    out = out / np.outer(s, s)
    np.fill_diagonal(out, 1.0)
    return 0.5 * (out + out.T)


# --------------------------------------------------------------------------
# Samples


@dataclass(frozen=True, eq=False)
class CopulaSample:
    """Pseudo-copula observations ``u`` (n x d) strictly inside the unit cube."""

    u: np.ndarray
    source: str = "simulated"

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 2:
            raise ValueError("copula sample must be a 2-D array")
        if not (np.all(u > 0) and np.all(u < 1)):
            raise ValueError("copula observations must lie strictly in (0, 1)")
        if self.source not in ("ranked-historical", "simulated"):
            raise ValueError(f"unknown sample source {self.source!r}")
        object.__setattr__(self, "u", u)

    @property
    def n(self):
        return self.u.shape[0]

    @property
    def d(self):
        return self.u.shape[1]


def _as_u(u):
    return u.u if isinstance(u, CopulaSample) else np.atleast_2d(np.asarray(u, dtype=float))


# --------------------------------------------------------------------------
# Model


def auto_cos_config(spec, generators, W, base=10.0, tol=1e-13, max_terms=2048):
    """Choose the COS truncation interval and number of terms for a model.

    The interval is ``[-10, 10]``, widened to ``+-15`` when a power tail with
    index below 6 is present and further for slowly decaying exponential tails
    (hyperbolic generators with large loadings). The term count starts at 100
    and doubles until every marginal CF is below ``tol`` at the last frequency.
    """
    half = base
    if spec.max_power_tail() < 6 or any(
            g.kind == "skewt" and g.params.get("gamma", 0) != 0 and g.params["nu"] < 12
            for g in spec.groups):
        half = 15.0
    for idx, gen in generators:
        t = gen.tail()
        if t and t[0] == "exp":
            w = np.abs(W[:, idx]).max()
            half = max(half, min(60.0, 28.0 * w / t[1]))
    n = 100
    while True:
        cfg = CosConfig(-half, half, n)
        tN = np.array([n * np.pi / cfg.width])
        lcf = sum(gen.log_marginal_cf(tN, W[:, idx]) for idx, gen in generators)
        if np.max(np.real(lcf)) < np.log(tol) or n >= max_terms:
            return cfg
        n *= 2


class PccModel:
    """A principal component copula with tabulated margins.

    Parameters
    ----------
    W : ndarray (d, d)
        Orthogonal eigenvector matrix (columns are PC loadings).
    lambdas : ndarray (d,)
        Generator variances (eigenvalues), summing to ``d``.
    spec : GroupSpec
        Generator groups and shape parameters.
    cos : CosConfig, optional
        Truncation and expansion length; chosen by :func:`auto_cos_config` if omitted.
    n_grid : int
        Points in each marginal table.
    """

    def __init__(self, W, lambdas, spec, cos=None, n_grid=4096):
        W = np.asarray(W, dtype=float)
        lam = np.asarray(lambdas, dtype=float)
        d = lam.shape[0]
        if W.shape != (d, d) or spec.d != d:
            raise ModelError("W, eigenvalues and generator spec disagree on the dimension")
        if np.max(np.abs(W.T @ W - np.eye(d))) > 1e-8:
            raise ModelError("W must be orthogonal")
        if np.any(lam < 0):
            raise ModelError("eigenvalues must be nonnegative")
        self.W = W
        self.lambdas = lam
        self.spec = spec
        self.n_grid = int(n_grid)
        self.generators = spec.build(np.maximum(lam, MIN_EIGENVALUE))
        self.cos = cos if cos is not None else auto_cos_config(spec, self.generators, W)
        self._tables = None

    @classmethod
    def from_correlation(cls, rho, spec, cos=None, n_grid=4096):
        W, lam = eigen_decompose(rho)
        return cls(W, lam, spec, cos=cos, n_grid=n_grid)

    @property
    def d(self):
        return self.lambdas.shape[0]

    @property
    def rho(self):
        r = (self.W * self.lambdas) @ self.W.T
        s = np.sqrt(np.diag(r))
        r = r / np.outer(s, s)
        np.fill_diagonal(r, 1.0)
        return r

    # -- characteristic functions ------------------------------------------

    def log_marginal_cf(self, t):
        """``log phi_{Y_i}(t)`` for all margins, shape (d, len(t))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((self.d, t.shape[0]), dtype=complex)
        for idx, gen in self.generators:
            out += gen.log_marginal_cf(t, self.W[:, idx])
        return out

    def cf(self, t):
        """Joint CF ``phi_Y(t)`` for ``t`` of shape (..., d)."""
        t = np.asarray(t, dtype=float)
        s = t @ self.W
        out = np.zeros(s.shape[:-1], dtype=complex)
        for idx, gen in self.generators:
            out = out + gen.log_cf(s[..., idx])
        return np.exp(out)

    # -- densities -----------------------------------------------------------

    @property
    def tables(self):
        if self._tables is None:
            lcf = self.log_marginal_cf(self.cos.frequencies())
            self._tables = MarginalTables.from_cf_values(np.exp(lcf), self.cos, self.n_grid)
        return self._tables

    def marginal(self, i):
        return self.tables.table(i)

    def logpdf_Y(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        p = y @ self.W
        out = np.zeros(y.shape[0])
        for idx, gen in self.generators:
            out += gen.logpdf(p[:, idx])
        return out

    def copula_log_density(self, u, newton_steps=1, exact=True):
        """Per-row copula log-density, its compensated total and diagnostics.

        ``exact=False`` takes quantiles and marginal densities from the
        interpolated tables instead of the COS series (used inside optimizers).
        """
        u = _as_u(u)
        if u.shape[1] != self.d:
            raise ModelError(f"sample has {u.shape[1]} columns, model has d={self.d}")
        y, f = self.tables.inverse(u, newton_steps=newton_steps, exact=exact)
        with np.errstate(divide="ignore"):
            ll = self.logpdf_Y(y) - np.sum(np.log(np.maximum(f, 1e-300)), axis=1)
        clipped = int(np.sum((u <= CDF_EPS) | (u >= 1 - CDF_EPS)
                             | (y <= self.cos.a) | (y >= self.cos.b)))
        return ll, math.fsum(ll), {"clipped": clipped}

    # -- simulation ----------------------------------------------------------

    def simulate(self, n, seed):
        """Simulate ``n`` copula observations; row blocks use derived seeds."""
        n = int(n)
        nblocks = max(1, -(-n // SIM_BLOCK))
        root = as_seed_sequence(seed)
        seeds = root.spawn(nblocks)
        u = np.empty((n, self.d))
        for b, ss in enumerate(seeds):
            lo, hi = b * SIM_BLOCK, min(n, (b + 1) * SIM_BLOCK)
            p = sample_generators(self.spec, np.maximum(self.lambdas, MIN_EIGENVALUE), hi - lo, ss)
            u[lo:hi] = self.tables.cdf_values(p @ self.W.T)
        return CopulaSample(u, "simulated")

    def implied_normal_scores(self, u, gaussian=False):
        """Implied ``Y`` (inverse margins, or ``Phi^-1`` if ``gaussian``) and ``P = W' Y``."""
        u = _as_u(u)
        if gaussian:
            y = special.ndtri(u)
        else:
            y, _ = self.tables.inverse(u)
        return y, y @ self.W

    # -- serialization -------------------------------------------------------

    def to_dict(self):
        return {
            "format": "pcc-model",
            "version": __version__,
            "d": self.d,
            "rho": self.rho.ravel().tolist(),
            "lambdas": self.lambdas.tolist(),
            "W": self.W.ravel().tolist(),
            "spec": self.spec.to_dict(),
            "cos": {"a": self.cos.a, "b": self.cos.b, "n_terms": self.cos.n_terms},
            "n_grid": self.n_grid,
        }

    @classmethod
    def from_dict(cls, obj):
        try:
            if obj.get("format") != "pcc-model":
                raise ModelError("not a pcc-model document")
            d = int(obj["d"])
            W = np.array(obj["W"], dtype=float).reshape(d, d)
            lam = np.array(obj["lambdas"], dtype=float)
            spec = GroupSpec.from_dict(obj["spec"])
            cos = CosConfig(**obj["cos"])
            return cls(W, lam, spec, cos=cos, n_grid=obj.get("n_grid", 4096))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"invalid model document: {exc}") from exc


# module-level forms of the model operations


def cf_of_Y(model, t):
    return model.cf(t)


def joint_density_Y(model, y):
    return np.exp(model.logpdf_Y(y))


def copula_log_density(model, u):
    return model.copula_log_density(u)


def simulate(model, n, seed):
    return model.simulate(n, seed)


def implied_normal_scores(model, u, gaussian=False):
    return model.implied_normal_scores(u, gaussian=gaussian)
