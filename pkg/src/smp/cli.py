"""Command-line entry point ``smp``.

Subcommands::

    smp experiment run --config <path> [--replicates-override N] [--out <path>]
    smp fit --model <name> --lambda <v> --data <csv> --out <json>
    smp predict --params <json> --train <csv> --queries <csv> [--estimator smp|plugin]

SMP predictions refit the model on the training set augmented by each query,
so ``predict`` needs the training data and not only the fitted parameters.
Pass it with ``--train`` or embed it at fit time with ``--embed-train``.

Exit codes: 0 success, 1 operational error, 2 a reported bound is violated.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import gaussian as gs
from . import logistic as lg
from .errors import DataError, MissingTrainingData, SeparationError, SMPError
from .experiment import load_config, run_experiment, summary_table, write_results
from .numerics import sigmoid

FIT_MODELS = ("linear", "ridge_linear", "logistic", "logistic_ridge")
PARAMS_SCHEMA = 1


# ---------------------------------------------------------------- CSV data


def read_matrix(path, require_y: bool):
    """Read ``x1..xd[,y]`` columns; errors report the 1-based file row."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        has_y = bool(header) and header[-1] == "y"
        xcols = header[:-1] if has_y else header
        if require_y and not has_y:
            raise DataError(f"{path}: row 1: last column must be 'y'")
        if xcols != [f"x{j}" for j in range(1, len(xcols) + 1)]:
            raise DataError(f"{path}: row 1: expected columns x1..xd{',y' if require_y else ''}, got {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}: row {lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                rows.append([float(v) for v in rec])
            except ValueError as exc:
                raise DataError(f"{path}: row {lineno}: {exc}") from None
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    if not np.all(np.isfinite(data)):
        bad = int(np.argwhere(~np.isfinite(data))[0, 0]) + 2
        raise DataError(f"{path}: row {bad}: non-finite value")
    d = len(xcols)
    # contiguous copies: strided views change the BLAS summation order
    X = np.ascontiguousarray(data[:, :d])
    y = np.ascontiguousarray(data[:, d]) if has_y else None
    return X, y


def _check_labels(y, path):
    bad = np.flatnonzero((y != 1.0) & (y != -1.0))
    if bad.size:
        raise DataError(f"{path}: row {int(bad[0]) + 2}: logistic labels must be -1 or 1")


def _f(v):
    return format(float(v), ".17g")


# ---------------------------------------------------------------- fit / predict


def fit_params(model: str, lam: float, X, y) -> dict:
    """Fit ``model`` and return the JSON-serializable parameter record."""
    n, d = X.shape
    if model in ("ridge_linear", "logistic_ridge") and not lam > 0:
        raise ValueError(f"model {model!r} needs --lambda > 0")
    if model in ("linear", "logistic") and lam != 0:
        raise ValueError(f"model {model!r} is unpenalized; drop --lambda or use the ridge variant")
    if model == "linear":
        fit = gs.ols_fit(X, y)
        resid = y - X @ fit.theta
        diag = {"rss": float(resid @ resid), "logdet_gram": fit.gram.logdet()}
    elif model == "ridge_linear":
        fit = gs.ridge_fit(X, y, lam)
        resid = y - X @ fit.theta
        diag = {"rss": float(resid @ resid)}
    else:
        Z = lg.as_z(X, y)
        fit = lg.mle_fit(Z) if model == "logistic" else lg.newton_fit(Z, lam)
        diag = {"iterations": int(fit.iterations), "grad_norm": float(fit.grad_norm),
                "objective": float(lg.logistic_objective(fit.theta, Z, lam)[0])}
    return {
        "schema": PARAMS_SCHEMA, "model": model, "lambda": float(lam), "n": int(n), "d": int(d),
        "theta": [float(t) for t in fit.theta], "diagnostics": diag,
    }


def predict_rows(params: dict, queries, estimator: str = "smp", train=None):
    """Per-query predictions as ``(column names, rows)``.

    ``train`` is ``(X, y)``; SMP predictions raise
    :class:`MissingTrainingData` without it.
    """
    model, lam = params["model"], float(params["lambda"])
    theta = np.asarray(params["theta"], dtype=float)
    if queries.shape[1] != theta.size:
        raise DataError(f"queries have {queries.shape[1]} columns, parameters have d = {theta.size}")
    if estimator == "smp":
        if train is None:
            raise MissingTrainingData(
                "SMP predictions refit on the training set: pass --train or fit with --embed-train"
            )
        X, y = train
        if model == "linear":
            pred = gs.linear_smp_predict(gs.ols_fit(X, y), queries)
        elif model == "ridge_linear":
            pred = gs.ridge_smp_predict(X, y, lam, queries)
        else:
            pred = lg.LogisticSMP(lg.as_z(X, y), lam).predict(queries)
    elif estimator == "plugin":
        if model in ("linear", "ridge_linear"):
            pred = gs.ScalarGaussianPredictive(queries @ theta, np.ones(queries.shape[0]))
        else:
            pred = lg.BernoulliPredictive(sigmoid(queries @ theta))
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    if model in ("linear", "ridge_linear"):
        cols = ["mean", "variance"]
        vals = np.column_stack([np.atleast_1d(pred.mean), np.atleast_1d(pred.variance)])
    else:
        cols = ["p_plus"]
        vals = np.atleast_1d(pred.p_plus)[:, None]
    return cols, vals


# ---------------------------------------------------------------- commands


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def cmd_experiment_run(args) -> int:
    cfg = load_config(args.config)
    rows = run_experiment(cfg, replicates=args.replicates_override)
    out = args.out or cfg.out
    if out in (None, "-"):
        write_results(rows, cfg, sys.stdout)
        sys.stderr.write(summary_table(rows))
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            write_results(rows, cfg, fh)
        sys.stdout.write(summary_table(rows))
    return 0 if all(r.bound_satisfied for r in rows) else 2


def cmd_fit(args) -> int:
    X, y = read_matrix(args.data, require_y=True)
    if args.model.startswith("logistic"):
        _check_labels(y, args.data)
    params = fit_params(args.model, args.lam, X, y)
    if args.embed_train:
        params["train"] = {"X": X.tolist(), "y": y.tolist()}
    fh = _open_out(args.out)
    try:
        json.dump(params, fh, indent=2)
        fh.write("\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_predict(args) -> int:
    params = json.loads(Path(args.params).read_text())
    if params.get("schema") != PARAMS_SCHEMA or params.get("model") not in FIT_MODELS:
        raise DataError(f"{args.params}: not a parameter file of schema {PARAMS_SCHEMA}")
    queries, _ = read_matrix(args.queries, require_y=False)
    train = None
    if args.train is not None:
        train = read_matrix(args.train, require_y=True)
    elif "train" in params:
        t = params["train"]
        train = (np.asarray(t["X"], dtype=float).reshape(len(t["y"]), -1), np.asarray(t["y"], dtype=float))
    cols, vals = predict_rows(params, queries, args.estimator, train)
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        d = queries.shape[1]
        w.writerow([f"x{j}" for j in range(1, d + 1)] + cols)
        for q, v in zip(queries, vals):
            w.writerow([_f(t) for t in q] + [_f(t) for t in v])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smp", description="Sample minmax predictors: experiments and ad-hoc fits.")
    sub = p.add_subparsers(dest="command", required=True)

    exp = sub.add_parser("experiment", help="Monte Carlo experiments")
    exp_sub = exp.add_subparsers(dest="action", required=True)
    run = exp_sub.add_parser("run", help="run a JSON experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--replicates-override", type=int, default=None)
    run.add_argument("--out", default=None, help="results CSV (default: config 'out', else stdout)")
    run.set_defaults(func=cmd_experiment_run)

    fit = sub.add_parser("fit", help="fit a conditional model to x1..xd,y CSV data")
    fit.add_argument("--model", required=True, choices=FIT_MODELS)
    fit.add_argument("--lambda", dest="lam", type=float, default=0.0)
    fit.add_argument("--data", required=True)
    fit.add_argument("--out", default=None)
    fit.add_argument("--embed-train", action="store_true", help="store the training data in the JSON")
    fit.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="predict from a fitted parameter file")
    pr.add_argument("--params", required=True)
    pr.add_argument("--train", default=None, help="training CSV; required for SMP predictions")
    pr.add_argument("--queries", required=True)
    pr.add_argument("--estimator", choices=("smp", "plugin"), default="smp")
    pr.add_argument("--out", default=None)
    pr.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SeparationError as exc:
        cert = ", ".join(_f(c) for c in np.atleast_1d(exc.certificate))
        print(f"smp: error: {exc}; separating direction theta = [{cert}]", file=sys.stderr)
        return 1
    except (SMPError, ValueError, OSError) as exc:
        print(f"smp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
