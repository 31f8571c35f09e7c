"""Distances between predictors, FDD ground truth and assumption diagnostics."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .core import FittedModel, HypothesisClass, SurveyDataset
from .data import DistributionSource, GaussianLinearSpec, gen_survey, make_rng
from .exceptions import InputError
from .solvers import SolverConfig, fit, solve_quadratic
from .utils.validation import check_positive_int, check_vector

__all__ = [
    "GaussianLinearSpec",
    "dist_monte_carlo",
    "dist_closed_form_linear",
    "population_optimum",
    "fdd_ground_truth",
    "decomposition_residual",
    "residual_response_correlation",
]


def _covariance_matrix(cov, d):
    if isinstance(cov, GaussianLinearSpec):
        cov = cov.covariance()
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        return np.eye(d) * float(cov)
    if cov.ndim == 1:
        if cov.size != d:
            raise InputError(f"diagonal covariance has length {cov.size}, expected {d}")
        if np.any(cov < 0):
            raise InputError("covariance is not positive semidefinite")
        return np.diag(cov)
    if cov.shape != (d, d):
        raise InputError(f"covariance has shape {cov.shape}, expected {(d, d)}")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise InputError("covariance is not symmetric")
    w = np.linalg.eigvalsh(cov)
    if w.min() < -1e-10 * max(1.0, abs(w).max()):
        raise InputError("covariance is not positive semidefinite")
    return cov


def dist_closed_form_linear(beta1, beta2, cov=1.0) -> float:
    """``sqrt((b1 - b2)' cov (b1 - b2))`` for linear predictors.

    ``cov`` is a scalar, a diagonal vector, a full matrix or a
    :class:`GaussianLinearSpec` whose covariate covariance is used.
    """
    beta1 = check_vector(beta1, "beta1")
    beta2 = check_vector(beta2, "beta2", size=beta1.size)
    diff = beta1 - beta2
    S = _covariance_matrix(cov, diff.size)
    return float(math.sqrt(max(float(diff @ S @ diff), 0.0)))


def dist_monte_carlo(f: FittedModel, g: FittedModel, source: DistributionSource, n: int,
                     seed=None):
    """Monte Carlo distributional l2 distance over covariates drawn from ``source``.

    Returns ``(estimate, std_error)``. The standard error is the delta-method
    error of the square root of the sample mean of ``(f - g)^2``. When
    ``seed`` is given, a fresh copy of the source seeded with it is used.
    """
    n = check_positive_int(n, "n", minimum=2)
    if f.d != source.d or g.d != source.d:
        raise InputError("model and source dimensions differ")
    if seed is not None:
        source = source.with_seed(seed)
    X, _ = source.draw_batch(n)
    sq = (f.predict(X) - g.predict(X)) ** 2
    mean = float(sq.mean())
    est = math.sqrt(mean)
    if mean == 0.0:
        return 0.0, 0.0
    se_mean = float(sq.std(ddof=1)) / math.sqrt(n)
    return est, se_mean / (2.0 * est)


def population_optimum(spec: GaussianLinearSpec, hypothesis: HypothesisClass,
                       solver_cfg: SolverConfig = SolverConfig(), seed=0) -> np.ndarray:
    """Coefficients minimising the expected squared loss under ``spec`` within the class.

    The covariates have mean zero, so the expected loss is the quadratic
    ``w' S w - 2 (S beta)' w + beta' S beta + noise_var`` with ``S`` the
    covariate second moment. Linear classes only. The problem is d x d, so the
    relative objective tolerance is tightened to 1e-15 for a sharper optimum.
    """
    if hypothesis.is_kernel:
        raise InputError("population optimum is only available for linear classes")
    hypothesis.check_dimension(spec.d)
    S = spec.covariance()
    b = S @ spec.beta
    c = float(spec.beta @ b) + spec.noise_variance
    cfg = dataclasses.replace(solver_cfg,
                              objective_tol=min(solver_cfg.objective_tol, 1e-15),
                              max_iters=max(solver_cfg.max_iters, 100_000))
    coef, _, _ = solve_quadratic(S, b, c, hypothesis, cfg, seed=seed)
    return coef


def fdd_ground_truth(spec_s: GaussianLinearSpec, spec_star: GaussianLinearSpec,
                     hypothesis: HypothesisClass, fit_m=None,
                     solver_cfg: SolverConfig = SolverConfig(), seed=0) -> float:
    """FDD between the class optima of two Gaussian-linear distributions.

    The distance is measured under ``spec_star``'s covariates. With
    ``fit_m=None`` the optima are computed exactly from population moments;
    with an integer ``fit_m`` each optimum is a fit on ``fit_m`` fresh samples.
    """
    if spec_s.d != spec_star.d:
        raise InputError(f"dimensions differ: {spec_s.d} vs {spec_star.d}")
    if hypothesis.is_kernel:
        raise InputError("closed-form FDD needs a linear class")
    if fit_m is None:
        b_s = population_optimum(spec_s, hypothesis, solver_cfg, seed)
        b_star = population_optimum(spec_star, hypothesis, solver_cfg, seed)
    else:
        seed_t = tuple(seed) if isinstance(seed, (tuple, list)) else (seed,)
        b_s = fit(gen_survey(spec_s, fit_m, seed_t + (0,)), hypothesis, solver_cfg).coef
        b_star = fit(gen_survey(spec_star, fit_m, seed_t + (1,)), hypothesis, solver_cfg).coef
    return dist_closed_form_linear(b_s, b_star, spec_star)


def decomposition_residual(model: FittedModel, spec_star: GaussianLinearSpec, n: int, seed=0):
    """Check that expected loss splits into squared distance plus noise variance.

    Returns ``(residual, std_error)`` where ``residual`` is the Monte Carlo
    mean of ``(f(x) - y)^2`` minus ``dist(f, f*)^2 + noise_var``, ``f*`` being
    the true regression function ``x -> <beta*, x>``. For primal models the
    distance is exact; for dual models it is estimated on the same draws.
    """
    n = check_positive_int(n, "n", minimum=100)
    if model.d != spec_star.d:
        raise InputError(f"model dimension {model.d} != spec dimension {spec_star.d}")
    X, y = spec_star.sample(make_rng(seed), n)
    pred = model.predict(X)
    loss = (pred - y) ** 2
    if model.is_dual:
        terms = loss - (pred - X @ spec_star.beta) ** 2 - spec_star.noise_variance
    else:
        dist2 = dist_closed_form_linear(model.coef, spec_star.beta, spec_star) ** 2
        terms = loss - dist2 - spec_star.noise_variance
    return float(terms.mean()), float(terms.std(ddof=1)) / math.sqrt(n)


def residual_response_correlation(model: FittedModel, dataset: SurveyDataset):
    """Pearson correlation of ``y`` with the residuals ``y - f(x)``.

    Returns ``(corr, degenerate)``; ``degenerate`` is True (and ``corr`` 0)
    when either series has zero variance.
    """
    if dataset.m < 3:
        raise InputError("need at least 3 samples for a correlation")
    if dataset.d != model.d:
        raise InputError(f"dataset dimension {dataset.d} != model dimension {model.d}")
    y = dataset.y
    r = y - model.predict(dataset.X)
    sy, sr = y.std(), r.std()
    if sy <= 1e-12 * (1.0 + np.abs(y).max()) or sr <= 1e-12 * (1.0 + np.abs(y).max()):
        return 0.0, True
    return float(np.clip(np.corrcoef(y, r)[0, 1], -1.0, 1.0)), False


