"""Accelerated proximal gradient baseline."""

import numpy as np
import pytest

import sparsesaga as sg
from sparsesaga.fista import BacktrackingError, FistaState, fista_step, run_fista
from sparsesaga.losses import smooth_value


def least_squares_problem():
    """Small dense least squares with a closed-form ridge solution."""
    rng = np.random.default_rng(8)
    n, p = 40, 6
    A = rng.standard_normal((n, p))
    offsets = np.arange(n + 1, dtype=np.int64) * p
    cols = np.tile(np.arange(p, dtype=np.int64), n)
    feats = sg.CsrMatrix(n, p, offsets, cols, A.ravel())
    b = A @ rng.standard_normal(p) + 0.1 * rng.standard_normal(n)
    data = sg.Dataset(features=feats, labels=b)
    return data, A, b


def test_converges_to_ridge_solution():
    data, A, b = least_squares_problem()
    lam1 = 0.1
    loss = sg.Loss("squared", lam1)
    n, p = A.shape
    xstar = np.linalg.solve(A.T @ A / n + lam1 * np.eye(p), A.T @ b / n)
    trace = run_fista(data, loss, sg.ZeroPenalty(), sg.singleton_partition(p),
                      max_iters=300)
    assert np.max(np.abs(trace.final_x - xstar)) < 1e-8


def test_deterministic():
    data, _, _ = least_squares_problem()
    loss = sg.Loss("squared", 0.1)
    part = sg.singleton_partition(data.n_features)
    t1 = run_fista(data, loss, sg.L1Penalty(0.05), part, max_iters=50)
    t2 = run_fista(data, loss, sg.L1Penalty(0.05), part, max_iters=50)
    assert t1.objective == t2.objective
    assert np.array_equal(t1.final_x, t2.final_x)


def test_backtracking_respects_quadratic_bound():
    """Each accepted step satisfies the majorization at the new point."""
    data, _, _ = least_squares_problem()
    loss = sg.Loss("squared", 0.1)
    part = sg.singleton_partition(data.n_features)
    penalty = sg.L1Penalty(0.05)
    info = sg.lipschitz_constant(data, loss)
    state = FistaState(x=np.zeros(data.n_features), y=np.zeros(data.n_features),
                       t=1.0, current_L=info.L / 100.0)
    for _ in range(20):
        prev_y = state.y.copy()
        fy = smooth_value(data, loss, prev_y)
        grad = sg.smooth_gradient(data, loss, prev_y)
        state = fista_step(state, data, loss, penalty, part)
        diff = state.x - prev_y
        quad = fy + float(grad @ diff) + 0.5 * state.current_L * float(diff @ diff)
        assert smooth_value(data, loss, state.x) <= quad + 1e-10
    # the curvature estimate never needs to exceed the analytic bound by 2x
    assert state.current_L <= 2.0 * info.L


def test_backtracking_error_when_budget_exhausted():
    data, _, _ = least_squares_problem()
    loss = sg.Loss("squared", 0.1)
    part = sg.singleton_partition(data.n_features)
    state = FistaState(x=np.zeros(data.n_features), y=np.zeros(data.n_features),
                       t=1.0, current_L=1e-12)
    with pytest.raises(BacktrackingError):
        fista_step(state, data, loss, sg.ZeroPenalty(), part, max_doublings=2)


def test_momentum_sequence():
    data, _, _ = least_squares_problem()
    loss = sg.Loss("squared", 0.1)
    part = sg.singleton_partition(data.n_features)
    state = FistaState(x=np.zeros(data.n_features), y=np.zeros(data.n_features),
                       t=1.0, current_L=1.0)
    ts = [state.t]
    for _ in range(5):
        state = fista_step(state, data, loss, sg.ZeroPenalty(), part)
        ts.append(state.t)
    for prev, cur in zip(ts, ts[1:]):
        assert cur == pytest.approx((1 + np.sqrt(1 + 4 * prev ** 2)) / 2)


def test_l1_solution_is_sparse_at_strong_regularization():
    data, A, b = least_squares_problem()
    loss = sg.Loss("squared", 0.0)
    part = sg.singleton_partition(data.n_features)
    grad0 = np.abs(A.T @ b) / len(b)
    trace = run_fista(data, loss, sg.L1Penalty(float(grad0.max()) * 1.01),
                      part, max_iters=200)
    assert np.allclose(trace.final_x, 0.0, atol=1e-12)


def test_matches_saga_on_acceptance_instance(acceptance, acceptance_ref):
    data, loss, penalty, partition = acceptance
    trace = run_fista(data, loss, penalty, partition, max_iters=800)
    assert trace.objective[-1] - acceptance_ref["objective"] < 1e-9


def test_tolerance_early_stop():
    data, _, _ = least_squares_problem()
    loss = sg.Loss("squared", 0.1)
    part = sg.singleton_partition(data.n_features)
    trace = run_fista(data, loss, sg.ZeroPenalty(), part, max_iters=1000,
                      tolerance=1e-12)
    assert trace.iterations[-1] < 1000
