"""Command-line interface.

Exit codes: 0 success or ACCEPT, 1 REJECT (``test`` only), 2 input error,
3 resource error (a finite source ran out before the test finished).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .bounds import dominating_term, required_survey_size, survey_size_terms
from .core import HypothesisClass, KernelSpec, SurveyDataset
from .data import (EmpiricalResample, GaussianLinearSpec, NormalizationParams, check_bounds,
                   load_csv, make_rng)
from .exceptions import InputError, ResourceError
from .experiments import (CsvSubgroup, ExperimentPlan, PRESETS, SyntheticSweep,
                          reconstruction_baseline, loglog_slope, required_n, run_experiment)
from .metrics import dist_monte_carlo, residual_response_correlation
from .solvers import SolverConfig, empirical_loss, fit
from .tester import TesterConfig, check_survey_size, run_sequential_test

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_REJECT, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3

logger = logging.getLogger("surverify")


# --- argument parsing ----------------------------------------------------------

def _floats(text):
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _global_options(parser, suppress):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--seed", type=int, help="base random seed (default 0)",
                        **(kw or {"default": 0}))
    parser.add_argument("--config", help="TOML file with plan and solver fields",
                        **(kw or {"default": None}))
    parser.add_argument("--output-dir", help="directory for artifacts",
                        **(kw or {"default": None}))
    parser.add_argument("--trace", action="store_true",
                        help="include full loss trajectories / per-trial reports",
                        **(kw or {"default": False}))
    parser.add_argument("--format", choices=("json", "csv"), help="stdout format",
                        **(kw or {"default": "json"}))
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress",
                        **(kw or {"default": False}))


def _class_options(p):
    p.add_argument("--class", dest="hclass", default="ridge",
                   help="hypothesis class: lasso|l1, ridge|l2, sparse, kernel")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--sparsity", type=int, default=None)
    p.add_argument("--kernel", default="rbf", choices=("rbf", "polynomial", "linear"))
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=2)


def _solver_options(p):
    p.add_argument("--max-iters", type=int, default=SolverConfig.max_iters)
    p.add_argument("--objective-tol", type=float, default=SolverConfig.objective_tol)
    p.add_argument("--power-iters", type=int, default=SolverConfig.power_iters)
    p.add_argument("--fixed-step", type=float, default=None)


def _data_options(p, *names):
    for name in names:
        p.add_argument(f"--{name}", required=True, help=f"{name} CSV file")
    p.add_argument("--response", required=True, help="response column name")
    p.add_argument("--normalize", action="store_true",
                   help="min-max scale to [-1, 1] (fitted on all files together)")
    p.add_argument("--keep-non-numeric", action="store_true",
                   help="fail on non-numeric columns instead of dropping them")
    p.add_argument("--bounds", choices=("strict", "warn", "off"), default="warn")


def _tester_options(p):
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--survey-size-policy", choices=("strict", "warn", "off"), default="warn")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)

    parser = argparse.ArgumentParser(prog="surverify",
                                     description="Sequential credibility testing of surveys.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit a model on a CSV")
    _data_options(p, "data")
    _class_options(p)
    _solver_options(p)
    p.add_argument("--model-out", help="write the fitted model JSON here")

    p = sub.add_parser("test", parents=[common], help="run the sequential test")
    _data_options(p, "survey", "population")
    _class_options(p)
    _solver_options(p)
    _tester_options(p)
    p.add_argument("--without-replacement", action="store_true",
                   help="stream population rows without replacement (finite source)")

    p = sub.add_parser("samplesize", parents=[common], help="required survey size")
    _class_options(p)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--r-squared", type=float, default=None,
                   help="override the kernel bound sup K(x, x)")

    p = sub.add_parser("fdd", parents=[common], help="estimate the FDD between two CSVs")
    _data_options(p, "survey", "population")
    _class_options(p)
    _solver_options(p)
    p.add_argument("--n", type=int, default=100000, help="Monte Carlo draws")

    p = sub.add_parser("diagnose", parents=[common], help="assumption diagnostics")
    _data_options(p, "data")
    _class_options(p)
    _solver_options(p)
    _tester_options(p)

    p = sub.add_parser("experiment", parents=[common], help="run an experiment plan")
    esub = p.add_subparsers(dest="experiment", required=True)
    e = esub.add_parser("synth", parents=[common], help="synthetic mu sweep")
    e.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    e.add_argument("--d", type=int)
    e.add_argument("--survey-m", type=int)
    e.add_argument("--mu-grid", type=_floats)
    e.add_argument("--coeff-var", type=float)
    e.add_argument("--noise-variance", type=float)
    e.add_argument("--class", dest="hypothesis")
    e.add_argument("--radius", type=float)
    e.add_argument("--sparsity", type=int)
    e.add_argument("--epsilon", type=float)
    e.add_argument("--delta", type=float)
    e.add_argument("--trials", type=int)
    e.add_argument("--survey-size-policy", choices=("strict", "warn", "off"))
    _solver_options(e)
    e = esub.add_parser("csv", parents=[common], help="subgroup experiment on a CSV")
    e.add_argument("--path", "--data", dest="path")
    e.add_argument("--response", dest="response_column")
    e.add_argument("--split-column")
    e.add_argument("--split-value", type=float)
    e.add_argument("--epsilon-grid", type=_floats)
    e.add_argument("--delta", type=float)
    e.add_argument("--trials", type=int)
    e.add_argument("--class", dest="hypothesis")
    e.add_argument("--radius", type=float)
    e.add_argument("--sparsity", type=int)
    e.add_argument("--no-normalize", dest="normalize", action="store_false", default=None)
    e.add_argument("--enforce-bounds", choices=("strict", "warn", "off"))
    e.add_argument("--survey-size-policy", choices=("strict", "warn", "off"))
    _solver_options(e)

    p = sub.add_parser("baseline", parents=[common], help="baselines")
    bsub = p.add_subparsers(dest="baseline", required=True)
    b = bsub.add_parser("recon", parents=[common], help="least-squares reconstruction baseline")
    b.add_argument("--d-grid", type=_ints, default=(10, 20, 40, 80))
    b.add_argument("--n-multipliers", type=_floats, default=None,
                   help="sample sizes as multiples of d")
    b.add_argument("--noise-variance", type=float, default=0.01)
    b.add_argument("--coeff-var", type=float, default=0.01)
    b.add_argument("--trials", type=int, default=20)
    b.add_argument("--target", type=float, default=0.05)
    return parser


# --- helpers ---------------------------------------------------------------------

def _emit(args, payload, rows=None, out=None):
    """Print ``payload`` as JSON, or ``rows`` (list of dicts) as CSV."""
    out = sys.stdout if out is None else out
    if args.format == "csv":
        records = rows if rows is not None else [_flatten(payload)]
        if records:
            buf = io.StringIO()
            w = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(records)
            out.write(buf.getvalue())
    else:
        out.write(json.dumps(payload, indent=2) + "\n")


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        elif isinstance(v, list):
            out[f"{prefix}{k}"] = json.dumps(v)
        else:
            out[f"{prefix}{k}"] = v
    return out


def _hypothesis(args) -> HypothesisClass:
    kernel = KernelSpec(args.kernel, args.bandwidth, args.degree)
    name = str(args.hclass).lower()
    return HypothesisClass.from_name(name, args.radius, sparsity=args.sparsity,
                                     kernel=kernel if name == "kernel" else None)


def _solver(args) -> SolverConfig:
    return SolverConfig(args.max_iters, args.objective_tol, args.power_iters, args.fixed_step)


def _load(args, *paths):
    """Load CSVs, optionally normalising them jointly, and apply the bounds policy."""
    loaded = [load_csv(p, args.response, drop_non_numeric=not args.keep_non_numeric,
                       enforce_bounds="off")[0] for p in paths]
    names = loaded[0].feature_names
    for ds, path in zip(loaded[1:], paths[1:]):
        if ds.feature_names != names:
            raise InputError(f"{path}: covariate columns differ from {paths[0]}")
    params = None
    if args.normalize:
        union = SurveyDataset(np.vstack([ds.X for ds in loaded]),
                              np.concatenate([ds.y for ds in loaded]), feature_names=names)
        params = NormalizationParams.fit(union)
        loaded = [params.apply(ds) for ds in loaded]
    for ds in loaded:
        check_bounds(ds, args.bounds)
    return loaded, params


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: invalid TOML: {exc}") from exc
    flat = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            flat.update(value)
        else:
            flat[key] = value
    return flat


def _apply_config(args, config, argv):
    """Fill options the user did not pass on the command line from the config file."""
    explicit = {a.split("=")[0] for a in argv if a.startswith("--")}
    for key, value in config.items():
        dest = {"class": "hclass"}.get(key, key)
        if args.command == "experiment" and key == "class":
            dest = "hypothesis"
        if not hasattr(args, dest):
            raise InputError(f"config key {key!r} is not an option of '{args.command}'")
        if f"--{key.replace('_', '-')}" in explicit:
            continue
        if isinstance(value, list):
            value = tuple(value)
        setattr(args, dest, value)


# --- commands --------------------------------------------------------------------

def cmd_fit(args):
    (data,), params = _load(args, args.data)
    model = fit(data, _hypothesis(args), _solver(args), seed=args.seed)
    payload = {"model": model.to_dict(), "l_hat_s": empirical_loss(model, data),
               "normalization": params.to_dict() if params else None}
    if args.model_out:
        with open(args.model_out, "w", encoding="utf-8") as fh:
            fh.write(model.to_json(indent=2) + "\n")
    if args.format == "csv":
        _emit(args, None, rows=[{"converged": model.converged, "n_iter": model.n_iter,
                                 "norm": model.norm(), "l_hat_s": payload["l_hat_s"]}])
    else:
        _emit(args, payload)
    return EXIT_OK


def cmd_test(args):
    (survey, population), _ = _load(args, args.survey, args.population)
    hyp = _hypothesis(args)
    cfg = TesterConfig(args.epsilon, args.delta, args.survey_size_policy)
    survey.require_nonempty("survey")
    check_survey_size(survey, hyp, cfg)
    model = fit(survey, hyp, _solver(args), seed=args.seed)
    source = EmpiricalResample(population, args.seed,
                               with_replacement=not args.without_replacement)
    report = run_sequential_test(model, empirical_loss(model, survey), source, cfg,
                                 seed=args.seed)
    _emit(args, report.to_dict(trace=args.trace))
    return EXIT_OK if report.accepted else EXIT_REJECT


def cmd_samplesize(args):
    hyp = _hypothesis(args)
    terms = survey_size_terms(hyp, args.d, args.epsilon, args.delta, r_squared=args.r_squared)
    payload = {
        "class": hyp.variant,
        "d": args.d,
        "epsilon": args.epsilon,
        "delta": args.delta,
        "required_survey_size": required_survey_size(hyp, args.d, args.epsilon, args.delta,
                                                     r_squared=args.r_squared),
        "dominating_term": dominating_term(hyp, args.d, args.epsilon, args.delta,
                                           r_squared=args.r_squared),
        "terms": terms,
    }
    _emit(args, payload)
    return EXIT_OK


def cmd_fdd(args):
    (survey, population), _ = _load(args, args.survey, args.population)
    hyp = _hypothesis(args)
    f_s = fit(survey, hyp, _solver(args), seed=args.seed)
    f_star = fit(population, hyp, _solver(args), seed=args.seed)
    est, se = dist_monte_carlo(f_s, f_star, EmpiricalResample(population, args.seed), args.n)
    _emit(args, {"fdd": est, "std_error": se, "fdd_squared": est * est,
                 "fdd_squared_std_error": 2 * est * se, "n": args.n})
    return EXIT_OK


def cmd_diagnose(args):
    (data,), _ = _load(args, args.data)
    hyp = _hypothesis(args)
    model = fit(data, hyp, _solver(args), seed=args.seed)
    corr, degenerate = residual_response_correlation(model, data)
    required = required_survey_size(hyp, max(data.d, 2), args.epsilon, args.delta)
    payload = {
        "m": data.m,
        "d": data.d,
        "l_hat_s": empirical_loss(model, data),
        "residual_response_correlation": corr,
        "correlation_degenerate": degenerate,
        "max_abs_x": float(np.abs(data.X).max()) if data.d else 0.0,
        "max_abs_y": float(np.abs(data.y).max()),
        "bounds_violations": int(np.sum(np.abs(data.X) > 1) + np.sum(np.abs(data.y) > 1)),
        "required_survey_size": required,
        "survey_size_ok": data.m >= required,
        "solver_converged": model.converged,
    }
    _emit(args, payload)
    return EXIT_OK


_SYNTH_KEYS = [f for f in SyntheticSweep.__dataclass_fields__ if f != "base_seed"]
_CSV_KEYS = [f for f in CsvSubgroup.__dataclass_fields__ if f != "base_seed"]


def cmd_experiment(args):
    solver = _solver(args)
    out = args.output_dir or "results"
    if args.experiment == "synth":
        overrides = {k: getattr(args, k) for k in _SYNTH_KEYS
                     if getattr(args, k, None) is not None}
        plan = ExperimentPlan.synthetic(args.preset, out, solver, base_seed=args.seed,
                                        **overrides)
    else:
        fields = {k: getattr(args, k) for k in _CSV_KEYS if getattr(args, k, None) is not None}
        for need in ("path", "response_column", "split_column", "split_value"):
            if need not in fields:
                raise InputError(f"experiment csv needs --{need.replace('_', '-')}")
        plan = ExperimentPlan(CsvSubgroup(base_seed=args.seed, **fields), out, solver)
    result = run_experiment(plan, trace=args.trace)
    rows = [r.as_record() for r in result.rows]
    _emit(args, {"output_dir": out, "rows": rows, "meta": result.meta}, rows=rows)
    return EXIT_OK


def cmd_baseline(args):
    sd = float(np.sqrt(args.coeff_var))
    noise_sd = float(np.sqrt(args.noise_variance))
    rng_seed = args.seed

    def spec_for(d):
        beta = sd * make_rng((rng_seed, d)).standard_normal(d)
        return GaussianLinearSpec(beta, noise_sd=noise_sd)

    def multiples(d):
        return sorted({max(1, int(round(d * f))) for f in args.n_multipliers})

    n_grid = multiples if args.n_multipliers else None
    rows = reconstruction_baseline(spec_for, args.d_grid, n_grid, args.trials, args.seed)
    req = required_n(rows, args.target)
    try:
        slope = loglog_slope(req)
    except InputError:
        slope = None
    records = [dict(r.__dict__) for r in rows]
    if args.output_dir:
        os.makedirs(args.output_dir, exist_ok=True)
        with open(os.path.join(args.output_dir, "baseline.csv"), "w", encoding="utf-8",
                  newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(records[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(records)
    _emit(args, {"rows": records, "target": args.target,
                 "required_n": {str(d): n for d, n in req.items()}, "loglog_slope": slope},
          rows=records)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "test": cmd_test, "samplesize": cmd_samplesize, "fdd": cmd_fdd,
            "diagnose": cmd_diagnose, "experiment": cmd_experiment, "baseline": cmd_baseline}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = _load_config(args.config)
        _apply_config(args, config, argv)
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
