"""Sequential testing of whether a survey-trained regression model transfers to a population."""

__version__ = "0.1.0"

from .bounds import (LossEnvelope, generalization_bound, rademacher_upper_bound,
                     required_survey_size, survey_size_terms)
from .core import (FittedModel, HypothesisClass, KernelSpec, LabeledSample, SurveyDataset,
                   gram_matrix, predict)
from .data import (EmpiricalResample, FiniteStream, GaussianLinearSpec, NormalizationParams,
                   SyntheticGaussianLinear, gen_survey, load_csv, split_by_column, write_csv)
from .exceptions import InputError, ResourceError
from .metrics import (decomposition_residual, dist_closed_form_linear, dist_monte_carlo,
                      fdd_ground_truth, population_optimum, residual_response_correlation)
from .solvers import (BallConstrainedRegression, KernelBallRegression, SolverConfig,
                      empirical_loss, fit, project_l1_ball, project_l2_ball)
from .tester import SurVerify, TesterConfig, TestReport, early_reject_threshold, surverify, tau

__all__ = [
    "BallConstrainedRegression", "EmpiricalResample", "FiniteStream", "FittedModel",
    "GaussianLinearSpec", "HypothesisClass", "InputError", "KernelBallRegression", "KernelSpec",
    "LabeledSample", "LossEnvelope", "NormalizationParams", "ResourceError", "SolverConfig",
    "SurVerify", "SurveyDataset", "SyntheticGaussianLinear", "TestReport", "TesterConfig",
    "decomposition_residual", "dist_closed_form_linear", "dist_monte_carlo",
    "early_reject_threshold", "empirical_loss", "fdd_ground_truth", "fit", "gen_survey",
    "generalization_bound", "gram_matrix", "load_csv", "population_optimum", "predict",
    "project_l1_ball", "project_l2_ball", "rademacher_upper_bound", "required_survey_size",
    "residual_response_correlation", "split_by_column", "survey_size_terms", "surverify", "tau",
    "write_csv",
]
