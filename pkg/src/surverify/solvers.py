"""Squared-loss minimisation over norm balls by projected gradient descent.

Every hypothesis class shares one solver loop; only the projection and the
geometry of the gradient step differ:

* ``l2`` / ``l1`` balls: Euclidean projected gradient on the coefficients.
* ``sparse_l1``: l1 projection followed by hard thresholding to the ``s``
  largest coefficients. The constraint set is not convex, so this is a
  heuristic (iterative hard thresholding) with no optimality guarantee.
* ``kernel``: projected gradient in the RKHS. The functional gradient of the
  empirical loss expressed in dual coordinates is ``(2/m)(G a - y)`` and the
  RKHS-ball projection is the radial rescaling ``a / max(1, |f|_H / radius)``.

The estimators follow the scikit-learn API so they can sit in pipelines and
grid searches; :func:`fit` wraps them for the dataset / hypothesis-class
interface used by the tester.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .core import FittedModel, HypothesisClass, KernelSpec, SurveyDataset
from .exceptions import InputError
from .utils.validation import check_positive, check_vector

LIPSCHITZ_SAFETY = 1.05


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule and step-size rule for projected gradient descent.

    ``fixed_step`` overrides the Lipschitz step ``1 / (1.05 * L_est)`` when set.
    """

    max_iters: int = 20000
    objective_tol: float = 1e-10
    power_iters: int = 50
    fixed_step: Optional[float] = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise InputError("max_iters must be >= 1")
        check_positive(self.objective_tol, "objective_tol")
        if self.power_iters < 1:
            raise InputError("power_iters must be >= 1")
        if self.fixed_step is not None:
            check_positive(self.fixed_step, "fixed_step")


def project_l2_ball(v, radius=1.0):
    """Euclidean projection of ``v`` onto ``{u : |u|_2 <= radius}``."""
    v = check_vector(v)
    radius = check_positive(radius, "radius")
    norm = np.linalg.norm(v)
    if norm <= radius:
        return v.copy()
    return v * (radius / norm)


def project_l1_ball(v, radius=1.0):
    """Euclidean projection of ``v`` onto ``{u : |u|_1 <= radius}``.

    Sort-based simplex projection of ``|v|`` followed by restoring signs.
    """
    v = check_vector(v)
    radius = check_positive(radius, "radius")
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def hard_threshold(v, s):
    """Keep the ``s`` largest-magnitude entries of ``v`` and zero the rest."""
    out = np.zeros_like(v)
    if s >= v.size:
        return v.copy()
    # stable sort keeps the lowest index among ties, so results are reproducible
    keep = np.argsort(-np.abs(v), kind="stable")[:s]
    out[keep] = v[keep]
    return out


def _power_iteration(matvec, n, n_iter, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(n_iter):
        w = matvec(v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        lam = float(v @ w)
        v = w / norm
    return max(lam, float(v @ matvec(v)))


def _pgd(objective, gradient, project, x0, lipschitz, cfg, trace):
    """Projected gradient loop with Lipschitz steps.

    Returns ``(best_x, best_obj, n_iter, converged)``. When a step increases
    the objective beyond round-off (possible if the power-iteration estimate
    of ``L`` is low) the step is retried with ``L`` doubled, so the accepted
    sequence never increases for convex sets.
    """
    x = project(x0)
    obj = objective(x)
    scale = abs(obj) + 1.0
    trace.append(obj)
    best_x, best_obj = x, obj
    L = lipschitz
    converged = False
    n_iter = 0
    while n_iter < cfg.max_iters:
        step = cfg.fixed_step if cfg.fixed_step is not None else 1.0 / L
        x_new = project(x - step * gradient(x))
        obj_new = objective(x_new)
        n_iter += 1
        if cfg.fixed_step is None and obj_new > obj + 1e-13 * scale and L < 1e300:
            L *= 2.0
            continue
        decrease = obj - obj_new
        x, obj = x_new, obj_new
        trace.append(obj)
        if obj < best_obj:
            best_x, best_obj = x, obj
        if decrease <= cfg.objective_tol * max(abs(obj), 1e-300):
            converged = True
            break
    return best_x, best_obj, n_iter, converged


def _projector(hyp: HypothesisClass):
    if hyp.variant == "l2":
        return lambda v: project_l2_ball(v, hyp.radius)
    if hyp.variant == "l1":
        return lambda v: project_l1_ball(v, hyp.radius)
    if hyp.variant == "sparse_l1":
        return lambda v: hard_threshold(project_l1_ball(v, hyp.radius), hyp.sparsity)
    raise InputError(f"no coefficient projection for class {hyp.variant!r}")


def solve_quadratic(A, b, c, hypothesis: HypothesisClass, cfg: SolverConfig = SolverConfig(),
                    seed=0, trace=None):
    """Minimise ``w'Aw - 2b'w + c`` over the coefficient ball of ``hypothesis``.

    ``A`` is a PSD second-moment matrix. Returns ``(coef, n_iter, converged)``.
    With empirical moments this is the least-squares fit; with population
    moments it is the population optimum of the class.
    """
    A = np.asarray(A, dtype=float)
    b = check_vector(b, "b", size=A.shape[0])
    d = b.size
    trace = [] if trace is None else trace
    lam = _power_iteration(lambda v: A @ v, d, cfg.power_iters, seed)
    if lam <= 0.0:
        trace.append(float(c))
        return np.zeros(d), 0, True
    beta, _, n_iter, converged = _pgd(
        objective=lambda w: float(w @ A @ w - 2.0 * b @ w + c),
        gradient=lambda w: 2.0 * (A @ w - b),
        project=_projector(hypothesis),
        x0=np.zeros(d),
        lipschitz=2.0 * lam * LIPSCHITZ_SAFETY,
        cfg=cfg,
        trace=trace,
    )
    return beta, n_iter, converged


class BallConstrainedRegression(RegressorMixin, BaseEstimator):
    """Least squares with coefficients constrained to an l1, l2 or sparse l1 ball.

    Parameters
    ----------
    norm : {"l2", "l1", "sparse_l1"}
        Constraint set. ``"sparse_l1"`` also caps the number of nonzeros at
        ``sparsity`` (heuristic, see module docstring).
    radius : float
        Ball radius.
    sparsity : int or None
        Required when ``norm="sparse_l1"``.
    max_iter, tol, power_iter, step
        See :class:`SolverConfig`.
    random_state : int
        Seed of the power-iteration start vector.

    No intercept is fitted.
    """

    def __init__(self, norm="l2", radius=1.0, sparsity=None, max_iter=20000, tol=1e-10,
                 power_iter=50, step=None, random_state=0):
        self.norm = norm
        self.radius = radius
        self.sparsity = sparsity
        self.max_iter = max_iter
        self.tol = tol
        self.power_iter = power_iter
        self.step = step
        self.random_state = random_state

    def _hypothesis(self):
        return HypothesisClass.from_name(self.norm, self.radius, sparsity=self.sparsity)

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        hyp = self._hypothesis()
        hyp.check_dimension(X.shape[1])
        cfg = SolverConfig(self.max_iter, self.tol, self.power_iter, self.step)
        m = X.shape[0]
        # The loss is quadratic, so the m x d design collapses to d x d moments.
        self.objective_path_ = []
        self.coef_, self.n_iter_, self.converged_ = solve_quadratic(
            X.T @ X / m, X.T @ y / m, float(y @ y / m), hyp, cfg,
            seed=self.random_state, trace=self.objective_path_)
        self.hypothesis_ = hyp
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return X @ self.coef_

    def to_model(self) -> FittedModel:
        check_is_fitted(self)
        return FittedModel(self.hypothesis_, coef=self.coef_, converged=self.converged_,
                           n_iter=self.n_iter_)


class KernelBallRegression(RegressorMixin, BaseEstimator):
    """Least squares over an RKHS ball ``{f : |f|_H <= radius}``.

    The solution is represented by dual coefficients on the training points;
    memory grows as ``m^2`` so this is meant for small and medium ``m``.
    """

    def __init__(self, kernel="rbf", bandwidth=1.0, degree=2, offset=1.0, radius=1.0,
                 max_iter=20000, tol=1e-10, power_iter=50, step=None, random_state=0):
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.degree = degree
        self.offset = offset
        self.radius = radius
        self.max_iter = max_iter
        self.tol = tol
        self.power_iter = power_iter
        self.step = step
        self.random_state = random_state

    def _kernel(self):
        return KernelSpec(self.kernel, self.bandwidth, self.degree, self.offset)

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        kernel = self._kernel()
        hyp = HypothesisClass.kernel_ball(kernel, self.radius)
        cfg = SolverConfig(self.max_iter, self.tol, self.power_iter, self.step)
        m = X.shape[0]
        G = kernel(X, X)
        G = 0.5 * (G + G.T)
        radius = hyp.radius

        def rkhs_norm(a):
            return np.sqrt(max(float(a @ G @ a), 0.0))

        def project(a):
            norm = rkhs_norm(a)
            return a / max(1.0, norm / radius)

        self.objective_path_ = []
        lam = _power_iteration(lambda v: G @ v, m, cfg.power_iters, self.random_state)
        if lam <= 0.0:
            alpha = np.zeros(m)
            self.objective_path_.append(float(y @ y / m))
            self.n_iter_, self.converged_ = 0, True
        else:
            alpha, _, self.n_iter_, self.converged_ = _pgd(
                objective=lambda a: float(np.mean((G @ a - y) ** 2)),
                gradient=lambda a: (2.0 / m) * (G @ a - y),
                project=project,
                x0=np.zeros(m),
                lipschitz=2.0 * lam / m * LIPSCHITZ_SAFETY,
                cfg=cfg,
                trace=self.objective_path_,
            )
        self.dual_coef_ = alpha
        self.X_fit_ = X
        self.hypothesis_ = hyp
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return self.hypothesis_.kernel(X, self.X_fit_) @ self.dual_coef_

    def to_model(self) -> FittedModel:
        check_is_fitted(self)
        return FittedModel(self.hypothesis_, dual_coef=self.dual_coef_, support=self.X_fit_,
                           converged=self.converged_, n_iter=self.n_iter_)


def make_estimator(hypothesis: HypothesisClass, cfg: SolverConfig = SolverConfig(), seed=0):
    """Unfitted estimator for ``hypothesis`` configured from ``cfg``."""
    common = dict(max_iter=cfg.max_iters, tol=cfg.objective_tol, power_iter=cfg.power_iters,
                  step=cfg.fixed_step, random_state=seed)
    if hypothesis.is_kernel:
        k = hypothesis.kernel
        return KernelBallRegression(kernel=k.kind, bandwidth=k.bandwidth, degree=k.degree,
                                    offset=k.offset, radius=hypothesis.radius, **common)
    return BallConstrainedRegression(norm=hypothesis.variant, radius=hypothesis.radius,
                                     sparsity=hypothesis.sparsity, **common)


def fit(dataset: SurveyDataset, hypothesis: HypothesisClass,
        cfg: SolverConfig = SolverConfig(), seed: int = 0) -> FittedModel:
    """Empirical squared-loss minimiser of ``dataset`` within ``hypothesis``.

    If ``max_iters`` is hit first, the best iterate is returned with
    ``converged=False``.
    """
    dataset.require_nonempty("survey dataset")
    est = make_estimator(hypothesis, cfg, seed).fit(dataset.X, dataset.y)
    return est.to_model()


def empirical_loss(model: FittedModel, dataset: SurveyDataset) -> float:
    """Mean squared error of ``model`` on ``dataset``."""
    dataset.require_nonempty()
    if dataset.d != model.d:
        raise InputError(f"dataset dimension {dataset.d} != model dimension {model.d}")
    r = model.predict(dataset.X) - dataset.y
    return float(np.mean(r * r))
