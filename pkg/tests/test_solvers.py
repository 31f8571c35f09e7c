import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from surverify import (BallConstrainedRegression, FittedModel, HypothesisClass, InputError,
                       KernelBallRegression, KernelSpec, SolverConfig, SurveyDataset,
                       empirical_loss, fit, gram_matrix, project_l1_ball, project_l2_ball)
from surverify.solvers import hard_threshold

from tests.oracles import grid_minimum_2d, l1_projection_by_faces

vectors = arrays(float, st.integers(1, 5), elements=st.floats(-5, 5))


def test_l2_projection_examples():
    np.testing.assert_array_equal(project_l2_ball([0.3, 0.4]), [0.3, 0.4])
    np.testing.assert_allclose(project_l2_ball([3.0, 4.0]), [0.6, 0.8], atol=1e-15)
    np.testing.assert_array_equal(project_l2_ball([0.0, 0.0]), [0.0, 0.0])


def test_l1_projection_examples():
    np.testing.assert_array_equal(project_l1_ball([0.2, -0.3]), [0.2, -0.3])
    np.testing.assert_allclose(project_l1_ball([1.0, 1.0]), [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(project_l1_ball([2.0, 0.0]), [1.0, 0.0], atol=1e-15)


def test_projections_reject_nan():
    with pytest.raises(InputError):
        project_l1_ball([np.nan, 1.0])
    with pytest.raises(InputError):
        project_l2_ball([np.inf])
    with pytest.raises(InputError):
        project_l1_ball([1.0], radius=0.0)


@given(vectors, st.floats(0.1, 3.0))
def test_l1_projection_matches_face_enumeration(v, radius):
    got = project_l1_ball(v, radius)
    want = l1_projection_by_faces(v, radius)
    assert np.abs(got).sum() <= radius + 1e-12
    assert np.sum((got - v) ** 2) == pytest.approx(np.sum((want - v) ** 2), abs=1e-9)


@given(vectors, st.floats(0.1, 3.0))
def test_projections_idempotent(v, radius):
    for proj in (project_l1_ball, project_l2_ball):
        once = proj(v, radius)
        np.testing.assert_allclose(proj(once, radius), once, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(vectors, st.integers(0, 2**31 - 1))
def test_l1_projection_beats_random_feasible_points(v, seed):
    rng = np.random.default_rng(seed)
    p = project_l1_ball(v)
    u = rng.laplace(size=(10_000, v.size))
    u /= np.maximum(1.0, np.abs(u).sum(axis=1, keepdims=True))
    assert np.linalg.norm(p - v) <= np.linalg.norm(u - v, axis=1).min() + 1e-12


def test_hard_threshold_keeps_largest_and_breaks_ties_by_index():
    np.testing.assert_array_equal(hard_threshold(np.array([0.1, -0.5, 0.3]), 2), [0, -0.5, 0.3])
    np.testing.assert_array_equal(hard_threshold(np.array([0.2, 0.2, 0.2]), 1), [0.2, 0, 0])


def test_fit_recovers_interior_lasso_target():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (200, 5))
    beta = np.array([0.5, 0, 0, 0, 0])
    model = fit(SurveyDataset(X, X @ beta), HypothesisClass.lasso())
    assert np.linalg.norm(model.coef - beta) <= 1e-3
    assert model.converged and model.is_feasible()


def test_fit_matches_grid_on_three_point_instance():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    y = np.array([1.0, 1.0, 0.0])
    model = fit(SurveyDataset(X, y), HypothesisClass.ridge())
    obj = lambda B: np.mean((B @ X.T - y) ** 2, axis=1)
    best, _ = grid_minimum_2d(obj, lambda P: (P ** 2).sum(axis=1) <= 1.0, -1.0, 1.0)
    assert empirical_loss(model, SurveyDataset(X, y)) <= best + 1e-3


def test_kernel_zero_target_gives_zero_model():
    X = np.random.default_rng(1).uniform(-1, 1, (15, 3))
    model = fit(SurveyDataset(X, np.zeros(15)), HypothesisClass.kernel_ball(KernelSpec("rbf")))
    np.testing.assert_array_equal(model.dual_coef, np.zeros(15))
    assert empirical_loss(model, SurveyDataset(X, np.zeros(15))) == 0.0


def test_all_zero_design_gives_zero_model():
    model = fit(SurveyDataset(np.zeros((10, 3)), np.ones(10)), HypothesisClass.ridge())
    np.testing.assert_array_equal(model.coef, np.zeros(3))
    assert model.converged


def test_max_iters_sets_flag_and_keeps_best_iterate():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 6)) * np.array([10, 1, 1, 1, 1, 0.01])
    y = rng.normal(size=50)
    cfg = SolverConfig(max_iters=3, objective_tol=1e-14)
    model = fit(SurveyDataset(X, y), HypothesisClass.ridge(5.0), cfg)
    assert not model.converged and model.n_iter == 3
    est = BallConstrainedRegression(radius=5.0, max_iter=3, tol=1e-14).fit(X, y)
    assert empirical_loss(model, SurveyDataset(X, y)) == pytest.approx(min(est.objective_path_))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["l1", "l2"]), st.floats(0.2, 3.0))
def test_objective_path_is_non_increasing(seed, norm, radius):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 4))
    y = X @ rng.normal(size=4) + 0.1 * rng.normal(size=40)
    path = np.array(BallConstrainedRegression(norm, radius).fit(X, y).objective_path_)
    assert np.all(np.diff(path[1:]) <= 1e-12 * (1 + np.abs(path[1:-1])))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 2.0), st.floats(0.3, 2.0))
def test_kernel_fit_stays_in_rkhs_ball(seed, radius, bandwidth):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (25, 2))
    y = np.sin(3 * X[:, 0]) + 0.1 * rng.normal(size=25)
    hyp = HypothesisClass.kernel_ball(KernelSpec("rbf", bandwidth), radius)
    model = fit(SurveyDataset(X, y), hyp, SolverConfig(max_iters=2000))
    G = gram_matrix(hyp.kernel, X)
    assert model.dual_coef @ G @ model.dual_coef <= radius ** 2 + 1e-9


def test_sparse_fit_respects_support_size():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(100, 8))
    y = X @ np.array([0.4, -0.3, 0.2, 0, 0, 0, 0, 0.05])
    model = fit(SurveyDataset(X, y), HypothesisClass.sparse(2))
    assert np.count_nonzero(model.coef) <= 2 and model.is_feasible()
    assert set(np.nonzero(model.coef)[0]) == {0, 1}


def test_fit_is_deterministic():
    rng = np.random.default_rng(5)
    ds = SurveyDataset(rng.normal(size=(80, 5)), rng.normal(size=80))
    a = fit(ds, HypothesisClass.lasso(), seed=7)
    b = fit(ds, HypothesisClass.lasso(), seed=7)
    assert a.coef.tobytes() == b.coef.tobytes()


def test_fixed_step_converges():
    rng = np.random.default_rng(6)
    X = rng.uniform(-1, 1, (60, 3))
    y = X @ np.array([0.2, 0.1, -0.3])
    model = fit(SurveyDataset(X, y), HypothesisClass.ridge(), SolverConfig(fixed_step=0.5))
    np.testing.assert_allclose(model.coef, [0.2, 0.1, -0.3], atol=1e-4)


def test_empirical_loss_examples():
    X = np.random.default_rng(7).normal(size=(30, 2))
    beta = np.array([0.3, -0.2])
    ds = SurveyDataset(X, X @ beta)
    assert empirical_loss(FittedModel(HypothesisClass.ridge(), coef=beta), ds) == pytest.approx(
        0.0, abs=1e-30)
    ones = SurveyDataset(X, np.ones(30))
    assert empirical_loss(FittedModel(HypothesisClass.ridge(), coef=np.zeros(2)), ones) == 1.0
    gamma = np.array([0.7, 0.1])
    direct = math.fsum(float(r) ** 2 for r in (X @ gamma - ds.y)) / 30
    got = empirical_loss(FittedModel(HypothesisClass.ridge(), coef=gamma), ds)
    assert got == pytest.approx(direct, rel=1e-12)
    with pytest.raises(InputError):
        empirical_loss(FittedModel(HypothesisClass.ridge(), coef=gamma),
                       SurveyDataset(np.empty((0, 2)), np.empty(0)))


def test_estimators_follow_sklearn_api():
    est = BallConstrainedRegression(norm="l1", radius=0.5)
    assert est.get_params()["radius"] == 0.5
    twin = clone(est).set_params(radius=2.0)
    assert twin.radius == 2.0 and est.radius == 0.5
    X = np.random.default_rng(8).normal(size=(40, 3))
    y = X @ np.array([0.1, 0.2, 0.3])
    pipe = make_pipeline(FunctionTransformer(), BallConstrainedRegression()).fit(X, y)
    assert pipe.score(X, y) > 0.999
    kr = KernelBallRegression(kernel="linear", radius=10.0).fit(X, y)
    np.testing.assert_allclose(kr.predict(X), y, atol=1e-3)
    with pytest.raises(ValueError):
        BallConstrainedRegression().fit(X, y).predict(X[:, :2])
