"""Experiment plans, sweeps, the reconstruction baseline and their artifacts.

Seeding uses common random numbers: the survey and the per-trial population
streams are keyed by ``(base_seed, tag, trial)`` only, so every grid point
(a value of ``mu`` or of ``epsilon``) sees the same noise and differences
between rows come from the grid parameter alone.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .core import HypothesisClass, KernelSpec, SurveyDataset
from .data import (DEFAULT_NOISE_VARIANCE, EmpiricalResample, GaussianLinearSpec,
                   NormalizationParams, SyntheticGaussianLinear, gen_survey, load_csv,
                   make_rng, split_by_column, check_bounds)
from .exceptions import InputError
from .metrics import dist_closed_form_linear, population_optimum
from .plotting import Marker, write_line_chart
from .solvers import SolverConfig, empirical_loss, fit
from .tester import TesterConfig, check_survey_size, run_sequential_test, tau
from .utils.validation import check_open_unit, check_positive_int

logger = logging.getLogger(__name__)

# sub-stream tags for (base_seed, tag, trial) seeds
TAG_SURVEY_BETA = 1
TAG_SURVEY = 2
TAG_STAR_BETA = 3
TAG_SOURCE = 4
TAG_BASELINE = 5

FULL_MU_GRID = tuple(round(0.1 * i, 1) for i in range(31))
DEFAULT_EPSILON_GRID = (0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.3, 0.5)


@dataclass(frozen=True)
class SyntheticSweep:
    """Survey from ``beta_S ~ N(0, coeff_var)``, population from ``beta* ~ N(mu, coeff_var)``."""

    d: int = 50
    survey_m: int = 100000
    mu_grid: tuple = FULL_MU_GRID
    coeff_var: float = 0.01
    noise_variance: float = DEFAULT_NOISE_VARIANCE
    hypothesis: str = "ridge"
    radius: float = 1.0
    sparsity: Optional[int] = None
    epsilon: float = 0.05
    delta: float = 0.1
    trials: int = 50
    base_seed: int = 0
    survey_size_policy: str = "warn"

    kind = "synthetic"

    def __post_init__(self):
        check_positive_int(self.d, "d")
        check_positive_int(self.survey_m, "survey_m")
        check_positive_int(self.trials, "trials")
        object.__setattr__(self, "mu_grid", tuple(float(v) for v in self.mu_grid))
        if not self.mu_grid:
            raise InputError("mu_grid must be non-empty")
        if not self.coeff_var >= 0 or not self.noise_variance >= 0:
            raise InputError("coeff_var and noise_variance must be non-negative")
        TesterConfig(self.epsilon, self.delta, self.survey_size_policy)


@dataclass(frozen=True)
class CsvSubgroup:
    """Survey = rows with ``split_column == split_value``; population = the other rows."""

    path: str
    response_column: str
    split_column: str
    split_value: float
    epsilon_grid: tuple = DEFAULT_EPSILON_GRID
    delta: float = 0.1
    trials: int = 50
    base_seed: int = 0
    hypothesis: str = "ridge"
    radius: float = 1.0
    sparsity: Optional[int] = None
    normalize: bool = True
    drop_non_numeric: bool = True
    enforce_bounds: str = "warn"
    survey_size_policy: str = "warn"

    kind = "csv"

    def __post_init__(self):
        check_positive_int(self.trials, "trials")
        object.__setattr__(self, "epsilon_grid", tuple(float(v) for v in self.epsilon_grid))
        if not self.epsilon_grid:
            raise InputError("epsilon_grid must be non-empty")
        for eps in self.epsilon_grid:
            check_open_unit(eps, "epsilon")
        check_open_unit(self.delta, "delta")


PRESETS = {
    "desk": {"survey_m": 20000, "trials": 20},
    "paper": {"survey_m": 100000, "trials": 50},
}


@dataclass(frozen=True)
class ExperimentPlan:
    mode: Union[SyntheticSweep, CsvSubgroup]
    output_dir: str = "results"
    solver: SolverConfig = SolverConfig()

    @classmethod
    def synthetic(cls, preset="desk", output_dir="results", solver=SolverConfig(), **overrides):
        if preset not in PRESETS:
            raise InputError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        fields = {**PRESETS[preset], **overrides}
        return cls(SyntheticSweep(**fields), output_dir, solver)

    def to_dict(self) -> dict:
        mode = dataclasses.asdict(self.mode)
        for k, v in mode.items():
            if isinstance(v, tuple):
                mode[k] = list(v)
        return {"mode": self.mode.kind, "plan": mode, "output_dir": self.output_dir,
                "solver": dataclasses.asdict(self.solver)}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        kind = d.get("mode", "synthetic")
        mode_cls = {"synthetic": SyntheticSweep, "csv": CsvSubgroup}.get(kind)
        if mode_cls is None:
            raise InputError(f"unknown experiment mode {kind!r}")
        known = {f.name for f in dataclasses.fields(mode_cls)}
        plan = d.get("plan", {})
        unknown = set(plan) - known
        if unknown:
            raise InputError(f"unknown plan fields: {sorted(unknown)}")
        solver_fields = {f.name for f in dataclasses.fields(SolverConfig)}
        solver = d.get("solver", {})
        if set(solver) - solver_fields:
            raise InputError(f"unknown solver fields: {sorted(set(solver) - solver_fields)}")
        try:
            return cls(mode_cls(**plan), d.get("output_dir", "results"), SolverConfig(**solver))
        except TypeError as exc:
            raise InputError(str(exc)) from exc


ROW_FIELDS = ("mu", "epsilon", "fdd_estimate", "fdd_squared", "acceptance_rate",
              "avg_samples_used", "tau", "early_rejection_ratio", "trials")


@dataclass(frozen=True)
class ExperimentRow:
    """Aggregate over the trials at one grid point.

    ``early_rejection_ratio`` is ``avg_samples_used / tau``, the fraction of
    the sample budget used on average. ``mu`` is empty for CSV experiments.
    """

    mu: Optional[float]
    epsilon: float
    fdd_estimate: float
    fdd_squared: float
    acceptance_rate: float
    avg_samples_used: float
    tau: int
    early_rejection_ratio: float
    trials: int

    def as_record(self):
        return {k: ("" if getattr(self, k) is None else getattr(self, k)) for k in ROW_FIELDS}


@dataclass
class ExperimentResult:
    rows: List[ExperimentRow]
    reports: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _aggregate(mu, epsilon, fdd, fdd2, reports, budget) -> ExperimentRow:
    n = len(reports)
    accept = sum(r.accepted for r in reports) / n
    avg = sum(r.rounds_used for r in reports) / n
    return ExperimentRow(mu, epsilon, float(fdd), float(fdd2), accept, avg, budget,
                         avg / budget, n)


def _hypothesis(p):
    kernel = KernelSpec() if str(p.hypothesis).lower() == "kernel" else None
    return HypothesisClass.from_name(p.hypothesis, p.radius, sparsity=p.sparsity, kernel=kernel)


def run_synthetic_sweep(plan: ExperimentPlan, keep_reports=False) -> ExperimentResult:
    """Acceptance rate and samples used along the ``mu`` grid.

    One survey is drawn from ``beta_S`` and fitted once. At each ``mu`` and
    trial ``k`` the population coefficients are ``mu + z_k`` with ``z_k``
    shared across the grid. The reported FDD is the trial mean of the exact
    FDD between the class optima; ``fdd_squared`` is the trial mean of FDD^2.
    """
    p = plan.mode
    if not isinstance(p, SyntheticSweep):
        raise InputError("plan is not a synthetic sweep")
    hyp = _hypothesis(p)
    if hyp.is_kernel:
        raise InputError("synthetic sweeps support linear classes only")
    hyp.check_dimension(p.d)
    cfg = TesterConfig(p.epsilon, p.delta, p.survey_size_policy)
    noise_sd = math.sqrt(p.noise_variance)
    sd = math.sqrt(p.coeff_var)

    beta_s = sd * make_rng((p.base_seed, TAG_SURVEY_BETA)).standard_normal(p.d)
    spec_s = GaussianLinearSpec(beta_s, noise_sd=noise_sd)
    survey = gen_survey(spec_s, p.survey_m, (p.base_seed, TAG_SURVEY))
    check_survey_size(survey, hyp, cfg)
    model = fit(survey, hyp, plan.solver, seed=p.base_seed)
    l_hat = empirical_loss(model, survey)
    opt_s = population_optimum(spec_s, hyp, plan.solver, seed=p.base_seed)
    offsets = [sd * make_rng((p.base_seed, TAG_STAR_BETA, k)).standard_normal(p.d)
               for k in range(p.trials)]
    budget = tau(p.epsilon, p.delta)

    rows, kept = [], []
    for mu in p.mu_grid:
        reports, fdds = [], []
        for k in range(p.trials):
            spec_star = GaussianLinearSpec(mu + offsets[k], noise_sd=noise_sd)
            opt_star = population_optimum(spec_star, hyp, plan.solver, seed=p.base_seed)
            fdds.append(dist_closed_form_linear(opt_s, opt_star, spec_star))
            source_seed = (p.base_seed, TAG_SOURCE, k)
            rep = run_sequential_test(model, l_hat, SyntheticGaussianLinear(spec_star, source_seed),
                                      cfg, seed=list(source_seed))
            reports.append(rep)
        fdds = np.array(fdds)
        row = _aggregate(mu, p.epsilon, fdds.mean(), np.mean(fdds ** 2), reports, budget)
        logger.info("mu=%.2f fdd=%.3f accept=%.2f samples=%.1f", mu, row.fdd_estimate,
                    row.acceptance_rate, row.avg_samples_used)
        rows.append(row)
        if keep_reports:
            kept.extend({"mu": mu, "trial": k, **r.to_dict(trace=True)}
                        for k, r in enumerate(reports))
    return ExperimentResult(rows, kept, {"l_hat_s": l_hat, "survey_fit_converged": model.converged,
                                         "beta_s_norm": float(np.linalg.norm(beta_s))})


def _column_index(dataset: SurveyDataset, column):
    names = dataset.feature_names or ()
    if column in names:
        return names.index(column)
    try:
        idx = int(column)
    except (TypeError, ValueError):
        raise InputError(f"split column {column!r} not found among covariates") from None
    if not 0 <= idx < dataset.d:
        raise InputError(f"split column index {idx} out of range")
    return idx


def load_subgroups(p: CsvSubgroup):
    """Split the CSV into (survey, population, params); normalisation is fitted on all rows."""
    raw, _ = load_csv(p.path, p.response_column, drop_non_numeric=p.drop_non_numeric,
                      normalize=False, enforce_bounds="off")
    col = _column_index(raw, p.split_column)
    survey, population = split_by_column(raw, col, float(p.split_value))
    if survey.empty or population.empty:
        raise InputError(f"subgroup split on {p.split_column!r} == {p.split_value} leaves "
                         f"{survey.m} survey rows and {population.m} population rows")
    params = None
    if p.normalize:
        params = NormalizationParams.fit(raw).drop(col)
        survey, population = params.apply(survey), params.apply(population)
    check_bounds(survey, p.enforce_bounds)
    check_bounds(population, p.enforce_bounds)
    return survey, population, params


def run_csv_subgroup(plan: ExperimentPlan, keep_reports=False) -> ExperimentResult:
    """Acceptance rate along the ``epsilon`` grid for a subgroup of a CSV file.

    The FDD is the distributional distance between the class fits on the two
    subgroups, evaluated exactly on the population subgroup's rows.
    """
    p = plan.mode
    if not isinstance(p, CsvSubgroup):
        raise InputError("plan is not a CSV subgroup experiment")
    survey, population, params = load_subgroups(p)
    hyp = _hypothesis(p)
    hyp.check_dimension(survey.d)
    model = fit(survey, hyp, plan.solver, seed=p.base_seed)
    l_hat = empirical_loss(model, survey)
    other = fit(population, hyp, plan.solver, seed=p.base_seed)
    fdd = float(np.sqrt(np.mean((model.predict(population.X) - other.predict(population.X)) ** 2)))

    rows, kept = [], []
    for eps in p.epsilon_grid:
        cfg = TesterConfig(eps, p.delta, p.survey_size_policy)
        check_survey_size(survey, hyp, cfg)
        budget = tau(eps, p.delta)
        reports = []
        for k in range(p.trials):
            source_seed = (p.base_seed, TAG_SOURCE, k)
            reports.append(run_sequential_test(model, l_hat,
                                               EmpiricalResample(population, source_seed),
                                               cfg, seed=list(source_seed)))
        rows.append(_aggregate(None, eps, fdd, fdd * fdd, reports, budget))
        if keep_reports:
            kept.extend({"epsilon": eps, "trial": k, **r.to_dict(trace=True)}
                        for k, r in enumerate(reports))
    meta = {"survey_m": survey.m, "population_m": population.m, "l_hat_s": l_hat,
            "normalization": params.to_dict() if params else None,
            "normalization_scope": "global" if params else "none"}
    return ExperimentResult(rows, kept, meta)


def rows_to_csv(rows: Sequence[ExperimentRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_FIELDS)
    for row in rows:
        rec = row.as_record()
        w.writerow([repr(v) if isinstance(v, float) else v for v in rec.values()])
    return buf.getvalue()


def write_artifacts(plan: ExperimentPlan, result: ExperimentResult, output_dir=None,
                    trace=False):
    """Write ``rows.csv``, ``plan.json``, both SVG charts and per-trial reports when tracing."""
    out = output_dir or plan.output_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "rows.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(result.rows))
    with open(os.path.join(out, "plan.json"), "w", encoding="utf-8") as fh:
        json.dump({**plan.to_dict(), "meta": result.meta}, fh, indent=2)
        fh.write("\n")
    if trace:
        for i, rep in enumerate(result.reports):
            with open(os.path.join(out, f"report_{i}.json"), "w", encoding="utf-8") as fh:
                json.dump(rep, fh)
                fh.write("\n")

    rows = result.rows
    if isinstance(plan.mode, SyntheticSweep):
        order = sorted(range(len(rows)), key=lambda i: rows[i].fdd_squared)
        xs = [rows[i].fdd_squared for i in order]
        eps = plan.mode.epsilon
        markers = [Marker(eps, "eps", "red"), Marker(5 * eps, "5 eps", "blue")]
        xlabel = "squared FDD"
    else:
        order = range(len(rows))
        xs = [rows[i].epsilon for i in order]
        g = rows[0].fdd_squared
        markers = [Marker(g, "FDD^2", "red"), Marker(g / 5, "FDD^2 / 5", "blue")]
        xlabel = "epsilon"
    write_line_chart(os.path.join(out, "acceptance.svg"), xs,
                     [rows[i].acceptance_rate for i in order], markers,
                     title="Acceptance rate", xlabel=xlabel, ylabel="acceptance rate",
                     y_range=(0.0, 1.0))
    write_line_chart(os.path.join(out, "samples.svg"), xs,
                     [rows[i].avg_samples_used for i in order], markers,
                     title="Average samples used", xlabel=xlabel, ylabel="samples",
                     y_range=(0.0, float(max(r.tau for r in rows))))
    return out


def run_experiment(plan: ExperimentPlan, output_dir=None, trace=False) -> ExperimentResult:
    runner = run_synthetic_sweep if isinstance(plan.mode, SyntheticSweep) else run_csv_subgroup
    result = runner(plan, keep_reports=trace)
    write_artifacts(plan, result, output_dir, trace)
    return result


# --- reconstruction baseline -------------------------------------------------

@dataclass(frozen=True)
class BaselineRow:
    d: int
    n: int
    trials: int
    l2_error: float
    fdd_error: float
    underdetermined: bool


def _restrict(spec: GaussianLinearSpec, d: int) -> GaussianLinearSpec:
    cov = spec.cov
    if cov.ndim == 1:
        cov = cov[:d]
    elif cov.ndim == 2:
        cov = cov[:d, :d]
    return GaussianLinearSpec(spec.beta[:d], spec.noise_sd, cov, spec.clip)


def default_n_grid(d: int) -> List[int]:
    return sorted({int(round(d * f)) for f in (0.5, 1.25, 1.5, 2, 3, 4, 5, 6, 8, 12, 16, 32)})


def reconstruction_baseline(spec_star: Union[GaussianLinearSpec, Callable[[int], GaussianLinearSpec]],
                            d_grid: Sequence[int], n_grid=None, trials=20,
                            seed=0) -> List[BaselineRow]:
    """Errors of estimating ``beta*`` by unconstrained least squares.

    ``spec_star`` is either a callable ``d -> GaussianLinearSpec`` or a spec
    whose first ``d`` coefficients are used for each ``d``. ``n_grid`` is a
    list of sample sizes, a callable ``d -> list`` or None for a grid of
    multiples of ``d``. Fits with ``n < d`` use the pseudo-inverse and are
    flagged as underdetermined.
    """
    d_grid = [check_positive_int(d, "d") for d in d_grid]
    if not d_grid:
        raise InputError("d_grid must be non-empty")
    trials = check_positive_int(trials, "trials")
    rows = []
    for d in d_grid:
        if callable(spec_star):
            spec = spec_star(d)
        else:
            if spec_star.d < d:
                raise InputError(f"spec has {spec_star.d} coefficients, need {d}")
            spec = _restrict(spec_star, d)
        S = spec.covariance()
        ns = n_grid(d) if callable(n_grid) else (default_n_grid(d) if n_grid is None else n_grid)
        if not ns:
            raise InputError("n_grid must be non-empty")
        for n in ns:
            n = check_positive_int(n, "n")
            l2, fd = [], []
            for k in range(trials):
                X, y = spec.sample(make_rng((seed, TAG_BASELINE, d, n, k)), n)
                beta_hat = np.linalg.pinv(X) @ y
                diff = beta_hat - spec.beta
                l2.append(float(np.linalg.norm(diff)))
                fd.append(float(np.sqrt(max(diff @ S @ diff, 0.0))))
            rows.append(BaselineRow(d, n, trials, float(np.mean(l2)), float(np.mean(fd)), n < d))
    return rows


def required_n(rows: Sequence[BaselineRow], target=0.05) -> dict:
    """Smallest ``n`` per ``d`` with ``fdd_error <= target``, log-log interpolated.

    Dimensions whose grid never reaches the target map to ``None``.
    """
    out = {}
    for d in sorted({r.d for r in rows}):
        pts = sorted((r.n, r.fdd_error) for r in rows if r.d == d and not r.underdetermined)
        out[d] = None
        for (n0, e0), (n1, e1) in zip(pts, pts[1:]):
            if e0 > target >= e1:
                w = (math.log(e0) - math.log(target)) / (math.log(e0) - math.log(e1))
                out[d] = math.exp(math.log(n0) + w * (math.log(n1) - math.log(n0)))
                break
        if out[d] is None and pts and pts[0][1] <= target:
            out[d] = float(pts[0][0])
    return out


def loglog_slope(required: dict) -> float:
    """Least-squares slope of ``log n`` against ``log d``."""
    pts = [(d, n) for d, n in required.items() if n is not None]
    if len(pts) < 2:
        raise InputError("need at least two dimensions reaching the target")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])
