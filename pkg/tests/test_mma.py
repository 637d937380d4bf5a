"""Method of Moving Asymptotes on small problems with known optima."""

import numpy as np
import pytest
from scipy.optimize import minimize

from rto2d.mma import MMAParams, MMAState, mma_update


def _run(f, g, x0, n_iter=60, params=None):
    x = np.array(x0, dtype=float)
    state = MMAState.start(x)
    for _ in range(n_iter):
        f0, df0, fc, dfc = f(x), g(x), *_cons(x)
        x = mma_update(state, x, f0, df0, fc, dfc, 0.0, 1.0, params)
    return x, state


def _cons(x):
    return np.array([x.sum() - 1.0]), np.ones((1, x.size))


def test_quadratic_with_budget_constraint_reaches_the_kkt_point():
    t = np.array([0.8, 0.7, -0.2, 0.4])
    x, state = _run(lambda x: np.sum((x - t) ** 2), lambda x: 2 * (x - t), np.full(4, 0.25))
    ref = minimize(lambda x: np.sum((x - t) ** 2), np.full(4, 0.25), method="SLSQP",
                   bounds=[(0, 1)] * 4,
                   constraints=[{"type": "ineq", "fun": lambda x: 1.0 - x.sum()}],
                   options={"ftol": 1e-14}).x
    np.testing.assert_allclose(x, [0.5, 0.4, 0.0, 0.1], atol=1e-4)
    np.testing.assert_allclose(x, ref, atol=1e-4)
    assert state.iteration == 60


def test_two_variable_problem_with_active_constraint():
    # min x1^2 + 2 x2^2  s.t.  1 - x1 - x2 <= 0  ->  (2/3, 1/3)
    x = np.array([0.9, 0.9])
    state = MMAState.start(x)
    for _ in range(80):
        x = mma_update(state, x, x[0] ** 2 + 2 * x[1] ** 2, np.array([2 * x[0], 4 * x[1]]),
                       [1.0 - x.sum()], [[-1.0, -1.0]], 0.0, 1.0)
    np.testing.assert_allclose(x, [2 / 3, 1 / 3], atol=1e-4)


def test_steps_respect_move_limit_and_bounds():
    rng = np.random.default_rng(0)
    x = rng.random(50)
    state = MMAState.start(x)
    params = MMAParams(move=0.05)
    for _ in range(5):
        g = rng.standard_normal(50) * 100.0
        xn = mma_update(state, x, 0.0, g, [-1.0], np.zeros((1, 50)), 0.0, 1.0, params)
        assert np.all(np.abs(xn - x) <= 0.05 + 1e-12)
        assert np.all((xn >= 0.0) & (xn <= 1.0))
        x = xn


def test_asymptotes_follow_oscillation():
    x = np.array([0.5])
    state = MMAState.start(x)
    params = MMAParams()
    seq = []
    for k in range(6):
        grad = np.array([1.0 if k % 2 == 0 else -1.0])
        x = mma_update(state, x, 0.0, grad, [-1.0], [[0.0]], 0.0, 1.0, params)
        seq.append(float(state.upp[0] - state.low[0]))
    # alternating moves shrink the asymptote interval
    assert seq[-1] < seq[2]


@pytest.mark.parametrize("x0", [np.full(3, 0.9), np.full(3, 0.0)])
def test_infeasible_start_is_driven_feasible(x0):
    t = np.array([0.9, 0.9, 0.9])
    x, _ = _run(lambda x: np.sum((x - t) ** 2), lambda x: 2 * (x - t), x0)
    assert x.sum() <= 1.0 + 1e-4
    np.testing.assert_allclose(x, 1 / 3, atol=1e-4)
