import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import LinearConstraint, minimize

from flexv2g.errors import SolverError
from flexv2g.qp import solve_qp


def _random_qp(seed, n=6, m=4, psd_rank=None):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(psd_rank or n, n))
    P = A.T @ A
    q = rng.normal(size=n)
    G = rng.normal(size=(m, n))
    x0 = rng.uniform(-0.5, 0.5, n)
    h = G @ x0 + rng.uniform(0.1, 1.0, m)
    return P, q, G, h, -np.ones(n), np.ones(n)


def _slsqp(P, q, G, h, lb, ub):
    res = minimize(lambda x: 0.5 * x @ P @ x + q @ x, np.zeros_like(q), jac=lambda x: P @ x + q,
                   method="SLSQP", bounds=list(zip(lb, ub)),
                   constraints=[LinearConstraint(G, -np.inf, h)], options={"ftol": 1e-14, "maxiter": 500})
    return res.fun


@pytest.mark.parametrize("seed", range(8))
def test_matches_reference_solver(seed):
    P, q, G, h, lb, ub = _random_qp(seed)
    res = solve_qp(P, q, G, h, lb, ub)
    assert res.objective == pytest.approx(_slsqp(P, q, G, h, lb, ub), abs=1e-7)
    assert np.all(G @ res.x <= h + 1e-8)
    assert np.all((res.x >= lb - 1e-9) & (res.x <= ub + 1e-9))


@pytest.mark.parametrize("seed", range(4))
def test_degenerate_linear_program(seed):
    # rank-deficient quadratic: mostly a linear program with a flat face
    P, q, G, h, lb, ub = _random_qp(seed, psd_rank=1)
    res = solve_qp(P, q, G, h, lb, ub)
    assert res.objective == pytest.approx(_slsqp(P, q, G, h, lb, ub), abs=1e-6)


def test_box_only_projection():
    res = solve_qp(np.eye(3), -np.array([2.0, -3.0, 0.5]), lb=-np.ones(3), ub=np.ones(3))
    np.testing.assert_allclose(res.x, [1.0, -1.0, 0.5], atol=1e-8)


def test_unconstrained():
    res = solve_qp(np.diag([2.0, 4.0]), np.array([-2.0, -4.0]))
    np.testing.assert_allclose(res.x, [1.0, 1.0])


def test_inconsistent_bounds_rejected():
    with pytest.raises(SolverError):
        solve_qp(np.eye(2), np.zeros(2), lb=np.ones(2), ub=np.zeros(2))


def test_iteration_limit_carries_diagnostics():
    P, q, G, h, lb, ub = _random_qp(0)
    with pytest.raises(SolverError) as info:
        solve_qp(P, q, G, h, lb, ub, max_iter=1, acceptable_tol=1e-14)
    assert {"primal_residual", "dual_residual", "gap"} <= set(info.value.diagnostics)


@given(st.integers(0, 10_000))
def test_kkt_point_not_improvable_along_feasible_steps(seed):
    P, q, G, h, lb, ub = _random_qp(seed, n=4, m=3)
    res = solve_qp(P, q, G, h, lb, ub)
    rng = np.random.default_rng(seed)
    f = lambda x: 0.5 * x @ P @ x + q @ x  # noqa: E731
    for _ in range(20):
        y = res.x + 0.05 * rng.normal(size=4)
        if np.all(G @ y <= h) and np.all((y >= lb) & (y <= ub)):
            assert f(y) >= res.objective - 1e-8
