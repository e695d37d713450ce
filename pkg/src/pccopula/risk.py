"""Systemic-risk metrics on the market distress cube.

The market distress ratio (MDR) of a row is the fraction of margins at or
below the quantile ``q``; the distress indicator (MDI) flags rows with
``MDR >= k/d``; the distress frequency (MDF) is the time average of MDI. The
cube spans three axes: quantile ``q`` (all margins in distress), market
fraction ``k/d`` at fixed ``q``, and market dimension (nested subsets).
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .dist import as_seed_sequence
from .pcc import CopulaSample, PccModel

TABLE_CELLS = ((0.15, 1.0), (0.2, 1.0), (0.15, 0.9), (0.2, 0.9))


class ConfigError(ValueError):
    """Invalid distress-cube configuration."""


def _u(x):
    return x.u if isinstance(x, CopulaSample) else np.asarray(x, dtype=float)


def mdr(u_row, q):
    """Fraction of entries of ``u_row`` at or below ``q`` (row-wise for 2-D input)."""
    u = np.asarray(u_row, dtype=float)
    return np.mean(u <= q, axis=-1)


def _k_of(frac, d):
    return max(1, int(math.ceil(frac * d - 1e-9)))


def mdi_counts(u, q, k, subset=None):
    """Number of rows with at least ``k`` margins of ``subset`` at or below ``q``."""
    u = _u(u)
    if subset is not None:
        u = u[:, list(subset)]
    if not 1 <= k <= u.shape[1]:
        raise ValueError("k must lie in 1..|subset|")
    return int(np.count_nonzero(np.count_nonzero(u <= q, axis=1) >= k))


def mdf(u, q, k, subset=None):
    """Distress frequency ``(1/n) sum_t 1{MDR_t >= k / |subset|}``."""
    u = _u(u)
    return mdi_counts(u, q, k, subset) / u.shape[0]


def binomial_distress_test(count, n, p_model):
    """One-sided p-value ``P[Bin(n, p_model) >= count]`` by a log-space tail sum."""
    count, n = int(count), int(n)
    if not 0 <= count <= n:
        raise ValueError("need 0 <= count <= n")
    if not 0.0 <= p_model <= 1.0:
        raise ValueError("p_model must be a probability")
    if count == 0:
        return 1.0
    if p_model == 0.0:
        return 0.0
    if p_model == 1.0:
        return 1.0
    j = np.arange(count, n + 1)
    logpmf = (special.gammaln(n + 1) - special.gammaln(j + 1) - special.gammaln(n - j + 1)
              + j * math.log(p_model) + (n - j) * math.log1p(-p_model))
    return float(min(1.0, math.exp(special.logsumexp(logpmf))))


# --------------------------------------------------------------------------
# Cube


def _strictly_monotone(x):
    d = np.diff(np.asarray(x, dtype=float))
    return bool(np.all(d > 0) or np.all(d < 0))


@dataclass
class DistressConfig:
    """Axes of the distress cube and simulation settings.

    ``d_subsets`` lists nested index subsets for the dimension axis, or is
    ``"prefix"`` for subsets ``[0..m)`` of the column order, ``m = 2..d``. The
    dimension axis needs one of the two; ``None`` is a configuration error.
    """

    q_grid: tuple = (0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2, 0.25, 0.3)
    k_over_d_grid: tuple = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    q_fixed: float = 0.2
    d_subsets: list = None
    cells: tuple = TABLE_CELLS
    n_sim: int = 1_000_000
    n_boot: int = 1000
    band: tuple = (5.0, 95.0)

    def __post_init__(self):
        if not len(self.q_grid) or not len(self.k_over_d_grid):
            raise ConfigError("grids must be nonempty")
        if len(self.q_grid) > 1 and not _strictly_monotone(self.q_grid):
            raise ConfigError("q_grid must be strictly monotone")
        if len(self.k_over_d_grid) > 1 and not _strictly_monotone(self.k_over_d_grid):
            raise ConfigError("k_over_d_grid must be strictly monotone")
        qs = list(self.q_grid) + [self.q_fixed] + [c[0] for c in self.cells]
        if any(not 0 < q <= 0.5 for q in qs):
            raise ConfigError("quantiles must lie in (0, 0.5]")
        ks = list(self.k_over_d_grid) + [c[1] for c in self.cells]
        if any(not 0 < k <= 1 for k in ks):
            raise ConfigError("k/d fractions must lie in (0, 1]")
        if self.n_sim < 1 or self.n_boot < 0:
            raise ConfigError("n_sim must be positive and n_boot nonnegative")

    def subsets(self, d):
        if self.d_subsets is None:
            raise ConfigError("the dimension axis needs d_subsets (nested index lists or 'prefix')")
        if isinstance(self.d_subsets, str):
            if self.d_subsets != "prefix":
                raise ConfigError(f"unknown d_subsets ordering {self.d_subsets!r}")
            return [list(range(m)) for m in range(2, d + 1)]
        subs = [list(map(int, s)) for s in self.d_subsets]
        for s in subs:
            if not s or min(s) < 0 or max(s) >= d or len(set(s)) != len(s):
                raise ConfigError("d_subsets entries must be distinct column indices < d")
        for a, b in zip(subs, subs[1:]):
            if not set(a) < set(b):
                raise ConfigError("d_subsets must be strictly nested")
        return subs


@dataclass
class DistressReport:
    """All cube cells for the empirical sample and each model.

    ``rows`` holds one dict per (axis, q, k, d, model) with ``mdf``, ``count``
    (historic MDI count, empirical rows only), ``p_value`` (model rows) and
    ``band_lo``/``band_hi`` (empirical rows, bootstrap percentiles).
    """

    n: int
    rows: list = field(default_factory=list)
    tests: list = field(default_factory=list)

    FIELDS = ("axis", "q", "k", "d", "model", "mdf", "count", "p_value", "band_lo", "band_hi")

    def to_csv(self, path_or_buf=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.FIELDS)
        for r in self.rows:
            w.writerow([_fmt(r.get(f)) for f in self.FIELDS])
        text = buf.getvalue()
        if path_or_buf is not None:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self):
        return {"n": self.n, "cells": self.rows, "tests": self.tests}

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _cells(cfg, d):
    full = list(range(d))
    out = []
    for q in cfg.q_grid:
        out.append(("q", q, d, full))
    for f in cfg.k_over_d_grid:
        out.append(("k", cfg.q_fixed, _k_of(f, d), full))
    for s in cfg.subsets(d):
        out.append(("d", cfg.q_fixed, len(s), s))
    return out


def _model_sample(model, n_sim, ss):
    if isinstance(model, PccModel):
        return model.simulate(n_sim, ss).u
    return _u(model)


def distress_cube(u_hist, models, cfg=None, seed=0, x_hist=None):
    """Empirical and model distress frequencies over the cube, with tests and bands.

    Parameters
    ----------
    u_hist : CopulaSample or ndarray (n, d)
        Historic pseudo-observations.
    models : dict
        Name -> :class:`PccModel` (simulated with ``cfg.n_sim`` rows) or a
        precomputed sample.
    cfg : DistressConfig
    seed : int
        Root seed; model simulations and bootstrap replicates use spawned seeds.
    x_hist : ndarray (n, d), optional
        Filtered returns behind ``u_hist``. When given, bootstrap replicates
        resample rows of ``x_hist`` and re-rank; otherwise rows of ``u_hist``
        are resampled.
    """
    cfg = cfg or DistressConfig()
    u = _u(u_hist)
    n, d = u.shape
    cells = _cells(cfg, d)
    root = as_seed_sequence(seed)
    ss_models, ss_boot = root.spawn(2)
    model_ss = dict(zip(models, ss_models.spawn(len(models))))
    sims = {}
    for name, m in models.items():
        s = _model_sample(m, cfg.n_sim, model_ss[name])
        if s.shape[1] != d:
            raise ValueError(f"model {name!r} has dimension {s.shape[1]}, data has {d}")
        sims[name] = s

    boot = _bootstrap_mdf(u, x_hist, cells, cfg, ss_boot)
    report = DistressReport(n)
    for ci, (axis, q, k, sub) in enumerate(cells):
        cnt = mdi_counts(u, q, k, sub)
        lo, hi = (np.percentile(boot[:, ci], cfg.band) if boot.size else (None, None))
        report.rows.append({"axis": axis, "q": float(q), "k": int(k), "d": len(sub),
                            "model": "empirical", "mdf": cnt / n, "count": cnt,
                            "p_value": None,
                            "band_lo": None if lo is None else float(lo),
                            "band_hi": None if hi is None else float(hi)})
        for name, s in sims.items():
            p = mdf(s, q, k, sub)
            report.rows.append({"axis": axis, "q": float(q), "k": int(k), "d": len(sub),
                                "model": name, "mdf": p, "count": None,
                                "p_value": binomial_distress_test(cnt, n, p),
                                "band_lo": None, "band_hi": None})
    for q, frac in cfg.cells:
        k = _k_of(frac, d)
        cnt = mdi_counts(u, q, k)
        row = {"q": float(q), "k_over_d": float(frac), "k": k, "count": cnt, "p_values": {}}
        for name, s in sims.items():
            row["p_values"][name] = binomial_distress_test(cnt, n, mdf(s, q, k))
        report.tests.append(row)
    return report


def _bootstrap_mdf(u, x_hist, cells, cfg, ss):
    if cfg.n_boot == 0:
        return np.empty((0, len(cells)))
    from scipy import stats

    n = u.shape[0]
    out = np.empty((cfg.n_boot, len(cells)))
    for b, s in enumerate(ss.spawn(cfg.n_boot)):
        idx = np.random.default_rng(s).integers(0, n, n)
        if x_hist is not None:
            ub = stats.rankdata(np.asarray(x_hist)[idx], axis=0) / (n + 1)
        else:
            ub = u[idx]
        for ci, (_, q, k, sub) in enumerate(cells):
            out[b, ci] = mdf(ub, q, k, sub)
    return out
