"""Rademacher-complexity bounds, the two-sided generalization band and survey sizes.

All logarithms are natural. Design matrices are laid out with one sample
per row (``m x d``), the scikit-learn convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core import HypothesisClass
from .exceptions import InputError
from .utils.validation import check_matrix, check_open_unit, check_positive, check_positive_int

# Constants of the minimum-survey-size bound: each of the two error terms is
# driven below epsilon / 20.
LASSO_CONSTANT = 51200
RIDGE_CONSTANT = 51200
KERNEL_CONSTANT = 25600
CONFIDENCE_CONSTANT = 28800


@dataclass(frozen=True)
class LossEnvelope:
    """Range ``M`` and Lipschitz constant ``mu`` of the squared loss.

    The defaults (4, 4) hold when ``|y| <= 1`` and ``|f(x)| <= 1``.
    """

    M: float = 4.0
    mu: float = 4.0

    def __post_init__(self):
        check_positive(self.M, "M")
        check_positive(self.mu, "mu")


class RademacherBound(NamedTuple):
    value: float
    note: Optional[str] = None

    def __float__(self):
        return self.value


def rademacher_upper_bound(hypothesis: HypothesisClass, X, r_squared=None) -> RademacherBound:
    """Data-dependent upper bound on the empirical Rademacher complexity.

    * l1 ball: ``radius * sqrt(2 ln(2d)) * max_i |x_i|_2 / m``
    * l2 ball: ``radius * |X|_F / m``
    * kernel ball: ``radius * r / sqrt(m)`` with ``r^2 = sup K(x, x)``

    Unit-radius bounds scale linearly with ``radius``. A sparse
    l1 class gets the l1 formula unchanged, and the returned ``note`` says so.
    ``r_squared`` overrides the kernel's cube bound for kernels evaluated on
    other domains.
    """
    X = check_matrix(X, "X")
    m, d = X.shape
    radius = hypothesis.radius
    note = None
    if hypothesis.is_kernel:
        r2 = hypothesis.kernel.r_squared(d) if r_squared is None else check_positive(
            r_squared, "r_squared")
        return RademacherBound(radius * math.sqrt(r2) / math.sqrt(m))
    if hypothesis.variant == "l2":
        return RademacherBound(radius * float(np.linalg.norm(X)) / m)
    if hypothesis.variant == "sparse_l1":
        note = "sparse class bounded with the l1-ball formula (d, not s)"
    max_row = float(np.max(np.linalg.norm(X, axis=1)))
    return RademacherBound(radius * math.sqrt(2.0 * math.log(2 * d)) * max_row / m, note)


def confidence_term(m, delta, M=4.0) -> float:
    """``3 M sqrt(ln(4/delta) / (2m))``."""
    return 3.0 * M * math.sqrt(math.log(4.0 / delta) / (2.0 * m))


def generalization_bound(hypothesis: HypothesisClass, X, delta: float,
                         env: LossEnvelope = LossEnvelope(), r_squared=None) -> float:
    """Half-width of the two-sided band on ``|expected loss - empirical loss|``.

    Holds simultaneously for every predictor in the class with probability
    at least ``1 - delta`` over the draw of ``X``.
    """
    delta = check_open_unit(delta, "delta")
    X = check_matrix(X, "X")
    rad = rademacher_upper_bound(hypothesis, X, r_squared=r_squared).value
    return 2.0 * env.mu * rad + confidence_term(X.shape[0], delta, env.M)


def survey_size_terms(hypothesis: HypothesisClass, d: int, epsilon: float, delta: float,
                      r_squared=None) -> dict:
    """The two lower bounds on the survey size, keyed by term name."""
    epsilon = check_open_unit(epsilon, "epsilon")
    delta = check_open_unit(delta, "delta")
    d = check_positive_int(d, "d", minimum=2)
    eps2 = epsilon * epsilon
    variant = hypothesis.variant
    if variant == "l1":
        complexity = ("lasso", LASSO_CONSTANT * math.log(2 * d) / eps2)
    elif variant == "sparse_l1":
        s = hypothesis.sparsity
        if s > d:
            raise InputError(f"sparsity {s} exceeds dimension {d}")
        complexity = ("sparse", LASSO_CONSTANT * math.log(2 * s) / eps2)
    elif variant == "l2":
        complexity = ("ridge", RIDGE_CONSTANT * d / eps2)
    else:
        r2 = hypothesis.kernel.r_squared(d) if r_squared is None else r_squared
        complexity = ("kernel", KERNEL_CONSTANT * r2 / eps2)
    return {complexity[0]: complexity[1],
            "confidence": CONFIDENCE_CONSTANT * math.log(4.0 / delta) / eps2}


def required_survey_size(hypothesis: HypothesisClass, d: int, epsilon: float, delta: float,
                         r_squared=None) -> int:
    """Survey size that pins the empirical loss within ``epsilon / 10`` of the noise variance."""
    terms = survey_size_terms(hypothesis, d, epsilon, delta, r_squared=r_squared)
    return int(math.ceil(max(terms.values())))


def dominating_term(hypothesis: HypothesisClass, d: int, epsilon: float, delta: float,
                    r_squared=None) -> str:
    terms = survey_size_terms(hypothesis, d, epsilon, delta, r_squared=r_squared)
    return max(terms, key=terms.get)

