"""Command-line interface: ``pcc <verb> ...``.

Verbs
-----
filter     returns/prices CSV -> residuals.csv, garch_params.json
fit        residuals CSV -> model.json, fit_report.json
simulate   model.json -> sample.csv
tail       model.json or sample CSV -> tail.json, cpjqe.csv
risk       residuals/sample CSV + models -> distress_report.csv/json, cpjqe.csv
report     fit reports -> information-criteria table

Exit codes: 0 success, 2 configuration error, 3 data error, 4 non-convergence.
"""

import argparse
import contextlib
import csv
import datetime as _dt
import functools
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .estimate import (FAMILY_NAMES, DegenerateMarginError, FitConfig, bootstrap_se, fit,
                       information_criteria, make_family, ranks_to_pseudo_obs)
from .garch import GarchError, fit_ar_garch, filter_residuals, log_returns
from .pcc import CopulaSample, ModelError, PccModel
from .risk import ConfigError, DistressConfig, distress_cube
from .taildep import cpjqe_curve, hb_n_tail_coeffs, numeric_tail_limit

log = logging.getLogger("pccopula")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NONCONVERGED = 0, 2, 3, 4

CLI_FAMILIES = FAMILY_NAMES


class CliError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def config_error(msg):
    return CliError(msg, EXIT_CONFIG)


def data_error(msg):
    return CliError(msg, EXIT_DATA)


# --------------------------------------------------------------------------
# CSV / JSON helpers


def _fmt(v):
    return repr(float(v))


def read_table(path, date_column="auto"):
    """Read a header CSV of numbers, optionally with a leading ISO-8601 date column.

    Returns ``(dates or None, column names, ndarray)``. All unparseable cells
    are collected and reported together.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise data_error(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise data_error(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    has_date = header[0].lower() in ("date", "time", "timestamp") if date_column == "auto" \
        else bool(date_column)
    start = 1 if has_date else 0
    names = header[start:]
    if not names:
        raise data_error(f"{path}: no data columns")
    errors, dates, data = [], [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            errors.append(f"line {ln}: expected {len(header)} fields, got {len(row)}")
            continue
        if has_date:
            try:
                _dt.date.fromisoformat(row[0].strip()[:10])
            except ValueError:
                errors.append(f"line {ln}, column {header[0]!r}: bad date {row[0]!r}")
            dates.append(row[0].strip())
        vals = []
        for name, cell in zip(names, row[start:]):
            try:
                v = float(cell)
                if not np.isfinite(v):
                    raise ValueError
            except ValueError:
                errors.append(f"line {ln}, column {name!r}: cannot parse {cell!r}")
                v = np.nan
            vals.append(v)
        data.append(vals)
    if errors:
        shown = "\n  ".join(errors[:20])
        more = f"\n  ... {len(errors) - 20} more" if len(errors) > 20 else ""
        raise data_error(f"{path}: {len(errors)} bad cell(s)\n  {shown}{more}")
    if not data:
        raise data_error(f"{path}: no data rows")
    return (dates if has_date else None), names, np.array(data, dtype=float)


def write_table(path, names, data, dates=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((["date"] if dates is not None else []) + list(names))
        for t, row in enumerate(np.asarray(data)):
            w.writerow(([dates[t]] if dates is not None else []) + [_fmt(v) for v in row])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise data_error(f"cannot read JSON {path}: {exc}") from exc


def load_config(path):
    """Read a TOML or JSON run configuration (chosen by file extension)."""
    if path is None:
        return {}
    try:
        if str(path).endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            with open(path, "rb") as fh:
                cfg = tomllib.load(fh)
        else:
            with open(path) as fh:
                cfg = json.load(fh)
    except OSError as exc:
        raise config_error(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise config_error(f"invalid config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise config_error("config must be a table/object")
    return cfg


def load_model(path):
    obj = read_json(path)
    try:
        return PccModel.from_dict(obj), obj
    except ModelError as exc:
        raise data_error(f"{path}: {exc}") from exc


def _select_columns(names, data, columns):
    if not columns:
        return names, data
    idx = []
    for c in columns:
        if c not in names:
            raise config_error(f"column {c!r} not in data (have {names})")
        idx.append(names.index(c))
    return [names[i] for i in idx], data[:, idx]


# --------------------------------------------------------------------------
# Verbs


def cmd_filter(args, cfg):
    dates, names, data = read_table(args.input)
    names, data = _select_columns(names, data, cfg.get("columns"))
    if args.prices or cfg.get("prices", False):
        try:
            data = log_returns(data)
        except ValueError as exc:
            raise data_error(str(exc)) from exc
        dates = dates[1:] if dates is not None else None
    const = [n for n, c in zip(names, data.T) if np.ptp(c) == 0]
    if const:
        raise data_error(f"degenerate margin: constant column(s) {const}")
    init = cfg.get("garch_init", args.garch_init)
    params, resid = {}, []
    for name, col in zip(names, data.T):
        try:
            f = fit_ar_garch(col, init=init)
        except (GarchError, ValueError) as exc:
            raise data_error(f"column {name!r}: {exc}") from exc
        params[name] = f.to_dict()
        resid.append(filter_residuals(col, f))
    x = np.column_stack(resid)
    out = args.out_dir
    write_table(os.path.join(out, "residuals.csv"), names, x,
                dates[1:] if dates is not None else None)
    write_json(os.path.join(out, "garch_params.json"), params)
    log.info("filtered %d series, %d residual rows", len(names), x.shape[0])
    return EXIT_OK


def _fit_config(args, cfg):
    fc = dict(cfg.get("fit", {}))
    if args.method:
        fc["method"] = args.method
    if args.tail_link:
        fc["tail_link"] = args.tail_link
    try:
        return FitConfig(**fc)
    except TypeError as exc:
        raise config_error(f"unknown fit option: {exc}") from exc
    except ValueError as exc:
        raise config_error(str(exc)) from exc


def cmd_fit(args, cfg):
    spec_name = args.spec or cfg.get("spec", "gauss")
    if spec_name not in CLI_FAMILIES:
        raise config_error(f"unknown spec {spec_name!r}; choose from {', '.join(CLI_FAMILIES)}")
    fcfg = _fit_config(args, cfg)
    _, names, x = read_table(args.input)
    names, x = _select_columns(names, x, cfg.get("columns"))
    try:
        u = ranks_to_pseudo_obs(x)
    except DegenerateMarginError as exc:
        raise data_error(f"degenerate margin: {exc}") from exc
    family = make_family(spec_name, fcfg.tail_link)
    param = args.parameterization or cfg.get("parameterization", "free")
    try:
        res = fit(u, family, fcfg, parameterization=param)
    except (ArithmeticError, ModelError) as exc:
        raise CliError(f"estimation failed: {exc}", EXIT_NONCONVERGED) from exc
    n_boot = args.bootstrap if args.bootstrap is not None else cfg.get("bootstrap", 0)
    if n_boot:
        recipe = functools.partial(fit, family=spec_name, cfg=fcfg, parameterization=param)
        bs = bootstrap_se(x, recipe, n_boot=n_boot, seed=args.seed, n_jobs=args.threads or 1)
        res.bootstrap_sd = bs["sd"]
        res.trace.append({"bootstrap_failed": bs["failed"], "bootstrap_n": n_boot})
    model_doc = res.model.to_dict()
    model_doc.update({"family": spec_name, "theta": res.theta, "columns": names,
                      "tail_link": fcfg.tail_link})
    write_json(os.path.join(args.out_dir, "model.json"), model_doc)
    report = res.to_dict()
    report.update({"columns": names, "config": {k: getattr(fcfg, k) for k in fcfg.__dataclass_fields__},
                   "version": __version__, "input": os.path.basename(args.input)})
    write_json(os.path.join(args.out_dir, "fit_report.json"), report)
    log.info("%s: loglik %.3f after %d iteration(s), converged=%s", spec_name, res.loglik,
             res.iterations, res.converged)
    if not res.converged and not args.allow_nonconverged:
        log.error("estimation did not converge (use --allow-nonconverged to accept)")
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_simulate(args, cfg):
    model, doc = load_model(args.model)
    n = args.n if args.n is not None else cfg.get("n", None)
    if n is None or int(n) < 1:
        raise config_error("simulate needs a positive -n")
    s = model.simulate(int(n), args.seed)
    names = doc.get("columns") or [f"u{i + 1}" for i in range(model.d)]
    write_table(os.path.join(args.out_dir, "sample.csv"), names, s.u)
    return EXIT_OK


def _load_u(path):
    """Pseudo-observations from a sample CSV (values in (0,1)) or ranked residuals."""
    _, names, data = read_table(path)
    if np.all((data > 0) & (data < 1)) and not np.any(np.ptp(data, axis=0) == 0):
        return names, CopulaSample(data, "simulated"), None
    try:
        return names, ranks_to_pseudo_obs(data), data
    except DegenerateMarginError as exc:
        raise data_error(f"degenerate margin: {exc}") from exc


def _q_list(s, default):
    if s is None:
        return list(default)
    try:
        return [float(v) for v in s.split(",")]
    except ValueError as exc:
        raise config_error(f"bad quantile list {s!r}") from exc


def _write_cpjqe(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "i", "j", "q", "eta"])
        for src, i, j, q, eta in rows:
            w.writerow([src, i, j, _fmt(q), _fmt(eta)])


def cmd_tail(args, cfg):
    qs = _q_list(args.q, cfg.get("tail_q", (0.01, 0.025, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)))
    i, j = args.pair
    out = {}
    rows = []
    if args.input.endswith(".json"):
        model, doc = load_model(args.input)
        if not (0 <= i < model.d and 0 <= j < model.d and i != j):
            raise config_error("pair indices out of range")
        if doc.get("family") == "hb-n" and model.d == 2:
            th = doc["theta"]
            tc = hb_n_tail_coeffs(th["alpha"], th["beta"], model.lambdas[1])
            out["analytic"] = {"eta_lower": tc.eta_lower, "eta_upper": tc.eta_upper}
        try:
            lo = numeric_tail_limit(model, i, j)
            up = numeric_tail_limit(model, i, j, tail="upper")
            out["numeric_limit"] = {"eta_lower": lo.eta, "eta_upper": up.eta,
                                    "q": lo.q.tolist(), "lower_sequence": lo.values.tolist(),
                                    "upper_sequence": up.values.tolist(),
                                    "truncated": bool(lo.truncated or up.truncated)}
        except ModelError as exc:
            out["numeric_limit"] = {"skipped": str(exc)}
        curve = cpjqe_curve(model, i, j, qs, n_sim=args.n_sim, seed=args.seed)
        src = "model"
    else:
        _, u, _ = _load_u(args.input)
        if not (0 <= i < u.d and 0 <= j < u.d and i != j):
            raise config_error("pair indices out of range")
        curve = cpjqe_curve(u, i, j, qs)
        src = "sample"
    rows += [(src, i, j, q, e) for q, e in zip(qs, curve)]
    out["cpjqe"] = {"i": i, "j": j, "q": qs, "eta": curve.tolist(), "source": src}
    write_json(os.path.join(args.out_dir, "tail.json"), out)
    _write_cpjqe(os.path.join(args.out_dir, "cpjqe.csv"), rows)
    return EXIT_OK


def _distress_config(cfg, args):
    dc = dict(cfg.get("distress", {}))
    if args.n_sim is not None:
        dc["n_sim"] = args.n_sim
    if args.n_boot is not None:
        dc["n_boot"] = args.n_boot
    if args.d_subsets is not None:
        if args.d_subsets == "prefix":
            dc["d_subsets"] = "prefix"
        else:
            try:
                dc["d_subsets"] = json.loads(args.d_subsets)
            except ValueError as exc:
                raise config_error(f"--d-subsets must be 'prefix' or a JSON list: {exc}") from exc
    for key in ("q_grid", "k_over_d_grid", "cells"):
        if key in dc:
            dc[key] = tuple(tuple(c) if isinstance(c, list) else c for c in dc[key])
    try:
        return DistressConfig(**dc)
    except TypeError as exc:
        raise config_error(f"unknown distress option: {exc}") from exc
    except ConfigError as exc:
        raise config_error(str(exc)) from exc


def cmd_risk(args, cfg):
    dcfg = _distress_config(cfg, args)
    names, u, x = _load_u(args.input)
    models = {}
    specs = list(args.model or []) + [f"{k}={v}" for k, v in cfg.get("models", {}).items()]
    for spec in specs:
        if "=" not in spec:
            raise config_error(f"--model expects NAME=PATH, got {spec!r}")
        name, path = spec.split("=", 1)
        m, _ = load_model(path)
        if m.d != u.d:
            raise data_error(f"model {name!r} has d={m.d}, data has d={u.d}")
        models[name] = m
    try:
        rep = distress_cube(u, models, dcfg, seed=args.seed, x_hist=x)
    except ConfigError as exc:
        raise config_error(str(exc)) from exc
    except ValueError as exc:
        raise data_error(str(exc)) from exc
    rep.to_csv(os.path.join(args.out_dir, "distress_report.csv"))
    rep.to_json(os.path.join(args.out_dir, "distress_report.json"))
    qs = list(dcfg.q_grid)
    i, j = args.pair
    rows = [("empirical", i, j, q, e) for q, e in zip(qs, cpjqe_curve(u, i, j, qs))]
    root = np.random.SeedSequence(args.seed)
    for (name, m), ss in zip(models.items(), root.spawn(len(models))):
        rows += [(name, i, j, q, e) for q, e in
                 zip(qs, cpjqe_curve(m, i, j, qs, n_sim=dcfg.n_sim, seed=ss))]
    _write_cpjqe(os.path.join(args.out_dir, "cpjqe.csv"), rows)
    for t in rep.tests:
        log.info("cell q=%.3g k/d=%.3g count=%d p=%s", t["q"], t["k_over_d"], t["count"],
                 {k: round(v, 4) for k, v in t["p_values"].items()})
    return EXIT_OK


class _Fit:
    def __init__(self, d):
        self.family, self.k, self.loglik, self.n = d["family"], d["k"], d["loglik"], d["n"]
        self.aic, self.bic = d["aic"], d["bic"]


def cmd_report(args, cfg):
    fits = [_Fit(read_json(p)) for p in args.reports]
    try:
        rows = information_criteria(fits)
    except ValueError as exc:
        raise data_error(str(exc)) from exc
    cols = ("family", "k", "loglik", "aic", "bic", "delta_aic", "delta_bic")
    with open(os.path.join(args.out_dir, "report.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r[c] if isinstance(r[c], (str, int)) else _fmt(r[c]) for c in cols])
    write_json(os.path.join(args.out_dir, "report.json"), rows)
    width = max(len(r["family"]) for r in rows)
    print(f"{'family':<{width}}  k  {'loglik':>12} {'dAIC':>10} {'dBIC':>10}")
    for r in rows:
        print(f"{r['family']:<{width}}  {r['k']}  {r['loglik']:12.2f} {r['delta_aic']:10.2f} "
              f"{r['delta_bic']:10.2f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run configuration")
    common.add_argument("--seed", type=int, default=None, help="root random seed (default 0)")
    common.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    common.add_argument("--out-dir", default=None, help="output directory (default .)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="pcc", description="Principal component copulas.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    f = sub.add_parser("filter", parents=[common], help="AR(1)-GARCH(1,1) filter returns")
    f.add_argument("input")
    f.add_argument("--prices", action="store_true", help="input holds prices; use log returns")
    f.add_argument("--garch-init", choices=("unconditional", "sample"), default="unconditional")

    g = sub.add_parser("fit", parents=[common], help="estimate a copula")
    g.add_argument("input")
    g.add_argument("--spec", choices=CLI_FAMILIES)
    g.add_argument("--method", choices=("gmm", "mle"))
    g.add_argument("--parameterization", choices=("free", "equicorrelation", "two-factor"))
    g.add_argument("--tail-link", choices=("equal", "tail"))
    g.add_argument("--bootstrap", type=int, default=None, help="bootstrap replicates for SEs")
    g.add_argument("--allow-nonconverged", action="store_true")

    s = sub.add_parser("simulate", parents=[common], help="simulate copula observations")
    s.add_argument("model")
    s.add_argument("-n", type=int, default=None)

    t = sub.add_parser("tail", parents=[common], help="tail dependence and CPJQE")
    t.add_argument("input", help="model.json or sample/residual CSV")
    t.add_argument("--pair", type=int, nargs=2, default=(0, 1))
    t.add_argument("--q", help="comma-separated quantiles for the CPJQE curve")
    t.add_argument("--n-sim", type=int, default=1_000_000)

    r = sub.add_parser("risk", parents=[common], help="market distress cube and binomial tests")
    r.add_argument("input", help="residual CSV (ranked) or sample CSV")
    r.add_argument("--model", action="append", help="NAME=model.json (repeatable)")
    r.add_argument("--pair", type=int, nargs=2, default=(0, 1))
    r.add_argument("--n-sim", type=int, default=None)
    r.add_argument("--n-boot", type=int, default=None)
    r.add_argument("--d-subsets", default=None,
                   help="dimension-axis ordering: 'prefix' or a JSON list of nested index lists")

    c = sub.add_parser("report", parents=[common], help="compare fit reports (AIC/BIC)")
    c.add_argument("reports", nargs="+")
    return p


VERBS = {"filter": cmd_filter, "fit": cmd_fit, "simulate": cmd_simulate, "tail": cmd_tail,
         "risk": cmd_risk, "report": cmd_report}


def _threads(n):
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2) if args.verbose
                        else logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        if args.seed is None:
            args.seed = int(cfg.get("seed", 0))
        if args.threads is None:
            args.threads = cfg.get("threads")
        if args.out_dir is None:
            args.out_dir = cfg.get("out_dir", ".")
        os.makedirs(args.out_dir, exist_ok=True)
        with _threads(args.threads):
            return VERBS[args.verb](args, cfg)
    except CliError as exc:
        log.error("%s", exc)
        return exc.code
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
