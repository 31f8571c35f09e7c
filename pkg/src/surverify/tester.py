"""Sequential credibility test of a survey-fitted regression model.

The test fits ``f_S`` on the survey, records its empirical loss ``L_S`` and
then streams fresh samples from the population source, accumulating
``gamma = sum (f_S(x) - y)^2``. After the ``t``-th sample it rejects as soon as

    gamma - t * L_S > 1.1 t eps + sqrt(2 t ln(3 tau / delta))

and after ``tau`` samples it accepts iff ``gamma - tau * L_S <= 3 tau eps``.
The check after the ``t``-th draw uses ``t`` itself, not ``t - 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, validate_data

from .bounds import required_survey_size
from .core import FittedModel, HypothesisClass, KernelSpec, SurveyDataset
from .data import DistributionSource
from .exceptions import InputError, ResourceError
from .solvers import SolverConfig, empirical_loss, fit
from .utils.validation import check_open_unit, check_positive_int

ACCEPT = "accept"
REJECT = "reject"

EARLY_SLOPE = 1.1
FINAL_FACTOR = 3.0


class SurveySizeWarning(UserWarning):
    """The survey is smaller than the size the guarantees ask for."""


@dataclass(frozen=True)
class TesterConfig:
    __test__ = False  # keep pytest from collecting this class

    epsilon: float
    delta: float
    survey_size_policy: str = "warn"

    def __post_init__(self):
        check_open_unit(self.epsilon, "epsilon")
        check_open_unit(self.delta, "delta")
        policy = str(self.survey_size_policy).lower()
        if policy not in ("strict", "warn", "off"):
            raise InputError(f"unknown survey_size_policy {self.survey_size_policy!r}")
        object.__setattr__(self, "survey_size_policy", policy)


def tau(epsilon: float, delta: float) -> int:
    """Sample budget ``ceil(2 / (1.9 eps)^2 * ln(3 / delta))``."""
    epsilon = check_open_unit(epsilon, "epsilon")
    delta = check_open_unit(delta, "delta")
    return int(math.ceil(2.0 / (1.9 * epsilon) ** 2 * math.log(3.0 / delta)))


def early_reject_threshold(t: int, epsilon: float, delta: float, tau: int) -> float:
    """Rejection boundary for the excess cumulative loss after ``t`` samples."""
    tau = check_positive_int(tau, "tau")
    t = check_positive_int(t, "t")
    if t > tau:
        raise InputError(f"t={t} exceeds tau={tau}")
    epsilon = check_open_unit(epsilon, "epsilon")
    delta = check_open_unit(delta, "delta")
    return EARLY_SLOPE * t * epsilon + math.sqrt(2.0 * t * math.log(3.0 * tau / delta))


@dataclass
class TestReport:
    """Outcome and trace of one sequential test.

    ``gamma_trajectory[k]`` is the cumulative loss after ``k + 1`` draws.
    ``max_sample_loss`` lets callers audit the ``[0, 4]`` loss range the
    thresholds assume; losses are never clipped.
    """

    __test__ = False  # keep pytest from collecting this class

    verdict: str
    rejected_early: bool
    rounds_used: int
    tau: int
    l_hat_s: float
    epsilon: float
    delta: float
    gamma: float
    max_sample_loss: float
    thresholds: dict
    seed: object = None
    gamma_trajectory: List[float] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.verdict == ACCEPT

    def to_dict(self, trace=False) -> dict:
        out = {
            "verdict": self.verdict,
            "rejected_early": self.rejected_early,
            "rounds_used": self.rounds_used,
            "tau": self.tau,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "l_hat_s": self.l_hat_s,
            "gamma": self.gamma,
            "max_sample_loss": self.max_sample_loss,
            "thresholds": self.thresholds,
            "seed": self.seed,
        }
        if trace:
            out["gamma_trajectory"] = list(self.gamma_trajectory)
        return out


def _fast_predictor(model: FittedModel):
    if model.is_dual:
        kernel, support, alpha = model.hypothesis.kernel, model.support, model.dual_coef
        return lambda x: float(kernel(x.reshape(1, -1), support)[0] @ alpha)
    coef = model.coef
    return lambda x: float(x @ coef)


def run_sequential_test(model: FittedModel, l_hat_s: float, source: DistributionSource,
                        cfg: TesterConfig, seed=None) -> TestReport:
    """Stream samples from ``source`` against an already fitted survey model."""
    if source.d != model.d:
        raise InputError(f"source dimension {source.d} != model dimension {model.d}")
    eps, delta = cfg.epsilon, cfg.delta
    budget = tau(eps, delta)
    log_term = math.log(3.0 * budget / delta)
    final_threshold = FINAL_FACTOR * budget * eps
    predict_one = _fast_predictor(model)

    gamma = 0.0
    max_loss = 0.0
    trajectory = []
    verdict, early = None, False
    rounds = 0
    for t in range(1, budget + 1):
        try:
            x, y = source.draw()
        except ResourceError as exc:
            raise ResourceError(
                f"population source exhausted after {t - 1} of {budget} draws",
                rounds_completed=t - 1) from exc
        loss = (predict_one(np.asarray(x, dtype=float)) - y) ** 2
        gamma += loss
        max_loss = max(max_loss, loss)
        trajectory.append(gamma)
        rounds = t
        if gamma - t * l_hat_s > EARLY_SLOPE * t * eps + math.sqrt(2.0 * t * log_term):
            verdict, early = REJECT, t < budget
            break
    if verdict is None:
        verdict = ACCEPT if gamma - budget * l_hat_s <= final_threshold else REJECT

    return TestReport(
        verdict=verdict,
        rejected_early=early,
        rounds_used=rounds,
        tau=budget,
        l_hat_s=float(l_hat_s),
        epsilon=eps,
        delta=delta,
        gamma=float(gamma),
        max_sample_loss=float(max_loss),
        thresholds={"early_slope": EARLY_SLOPE * eps, "early_log_term": log_term,
                    "final": final_threshold},
        seed=seed,
        gamma_trajectory=trajectory,
    )


def check_survey_size(survey: SurveyDataset, hypothesis: HypothesisClass, cfg: TesterConfig):
    """Enforce ``cfg.survey_size_policy``; returns the required size (or None when off)."""
    if cfg.survey_size_policy == "off":
        return None
    required = required_survey_size(hypothesis, max(survey.d, 2), cfg.epsilon, cfg.delta)
    if survey.m < required:
        msg = (f"survey has {survey.m} samples but {required} are required for "
               f"epsilon={cfg.epsilon}, delta={cfg.delta}")
        if cfg.survey_size_policy == "strict":
            raise InputError(msg)
        warnings.warn(msg, SurveySizeWarning, stacklevel=3)
    return required


def surverify(survey: SurveyDataset, source: DistributionSource, hypothesis: HypothesisClass,
              cfg: TesterConfig, solver_cfg: SolverConfig = SolverConfig(),
              seed=0) -> TestReport:
    """Fit on ``survey`` and test the fit against samples drawn from ``source``.

    With probability ``1 - delta`` the verdict is ACCEPT when the squared
    functional distance is at most ``epsilon`` and REJECT when it exceeds
    ``5 epsilon`` (given a large enough survey and homoskedastic, bounded data).
    ``seed`` drives the solver; the source carries its own seed.
    """
    survey.require_nonempty("survey")
    if source.d != survey.d:
        raise InputError(f"source dimension {source.d} != survey dimension {survey.d}")
    check_survey_size(survey, hypothesis, cfg)
    model = fit(survey, hypothesis, solver_cfg, seed=seed)
    return run_sequential_test(model, empirical_loss(model, survey), source, cfg, seed=seed)


class SurVerify(BaseEstimator):
    """Estimator-style wrapper: ``fit`` on the survey, then ``test`` sources.

    Parameters mirror :class:`TesterConfig`, :class:`HypothesisClass` and
    :class:`SolverConfig`. After ``fit`` the survey model is in ``model_``
    and its empirical loss in ``l_hat_s_``.
    """

    def __init__(self, epsilon=0.05, delta=0.1, hypothesis="ridge", radius=1.0,
                 sparsity=None, kernel="rbf", bandwidth=1.0, survey_size_policy="warn",
                 max_iter=20000, tol=1e-10, random_state=0):
        self.epsilon = epsilon
        self.delta = delta
        self.hypothesis = hypothesis
        self.radius = radius
        self.sparsity = sparsity
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.survey_size_policy = survey_size_policy
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def _hypothesis(self):
        kernel = KernelSpec(self.kernel, self.bandwidth) if self.hypothesis == "kernel" else None
        return HypothesisClass.from_name(self.hypothesis, self.radius, sparsity=self.sparsity,
                                         kernel=kernel)

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        survey = SurveyDataset(X, y)
        self.config_ = TesterConfig(self.epsilon, self.delta, self.survey_size_policy)
        self.hypothesis_ = self._hypothesis()
        self.required_survey_size_ = check_survey_size(survey, self.hypothesis_, self.config_)
        self.model_ = fit(survey, self.hypothesis_,
                          SolverConfig(max_iters=self.max_iter, objective_tol=self.tol),
                          seed=self.random_state)
        self.l_hat_s_ = empirical_loss(self.model_, survey)
        self.tau_ = tau(self.epsilon, self.delta)
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return self.model_.predict(X)

    def test(self, source: DistributionSource) -> TestReport:
        check_is_fitted(self)
        return run_sequential_test(self.model_, self.l_hat_s_, source, self.config_,
                                   seed=self.random_state)
