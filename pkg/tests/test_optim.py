import numpy as np
import pytest
from scipy.special import expit

from thetalangevin import SolveProblem, gradient_descent_solve, newton_solve

from oracles import bisect_root


def quadratic_problem(dim=6, tol=1e-12, seed=0, **kwargs):
    rng = np.random.default_rng(seed)
    basis = rng.standard_normal((dim, dim))
    matrix = basis @ basis.T + dim * np.eye(dim)
    center = rng.standard_normal(dim)
    eigs = np.linalg.eigvalsh(matrix)
    return SolveProblem(
        gradient=lambda x: matrix @ (x - center),
        hessian=lambda x: matrix,
        mu=eigs[0], lipschitz=eigs[-1],
        x0=rng.standard_normal(dim), tol=tol, **kwargs,
    ), center


def logistic_subproblem(theta=1.0, h=1.0, v=0.4):
    # One-dimensional implicit-step objective gradient for a tiny logistic fit.
    rows = np.array([1.0, -2.0, 0.5])
    labels = np.array([1.0, 0.0, 1.0])

    def target_grad(x):
        return np.array([rows @ (expit(rows * x[0]) - labels) + x[0]])

    def target_hess(x):
        p = expit(rows * x[0])
        return np.array([[rows @ (rows * p * (1 - p)) + 1.0]])

    def grad(x):
        return theta * target_grad(x) + (2.0 / h) * (x - v)

    def hess(x):
        return theta * target_hess(x) + (2.0 / h) * np.eye(1)

    return grad, hess


def test_newton_exact_on_quadratic():
    problem, center = quadratic_problem()
    result = newton_solve(problem)
    assert result.converged
    assert result.iterations == 1
    assert result.grad_norm < 1e-12
    np.testing.assert_allclose(result.x, center, atol=1e-10)


def test_newton_zero_iterations_at_solution():
    problem, center = quadratic_problem()
    problem.x0 = center
    result = newton_solve(problem)
    assert result.converged
    assert result.iterations == 0


def test_newton_matches_bisection_oracle():
    grad, hess = logistic_subproblem(theta=1.0, h=1.0, v=0.4)
    problem = SolveProblem(gradient=grad, hessian=hess, mu=2.0, lipschitz=10.0,
                           x0=np.zeros(1), tol=1e-10)
    result = newton_solve(problem)
    root = bisect_root(lambda x: grad(np.array([x]))[0], -10.0, 10.0, tol=1e-12)
    assert result.converged
    assert abs(result.x[0] - root) < 1e-8


def test_gradient_descent_one_step_isotropic():
    problem = SolveProblem(gradient=lambda x: 3.0 * (x - 2.0),
                           hessian=lambda x: np.array([[3.0]]),
                           mu=3.0, lipschitz=3.0,
                           x0=np.array([10.0]), tol=1e-12)
    result = gradient_descent_solve(problem)
    assert result.converged
    assert result.iterations == 1
    assert result.x[0] == pytest.approx(2.0, abs=1e-12)


def test_solvers_agree_within_strong_convexity_ball():
    tol = 1e-8
    problem, _ = quadratic_problem(tol=tol)
    newton = newton_solve(problem)
    descent = gradient_descent_solve(problem)
    assert newton.converged and descent.converged
    assert np.linalg.norm(newton.x - descent.x) <= 2.0 * tol / problem.mu


def test_gradient_norm_contract_audited():
    problem, _ = quadratic_problem(dim=10, tol=1e-6, seed=4)
    for solver in (newton_solve, gradient_descent_solve):
        result = solver(problem)
        assert result.converged
        assert np.linalg.norm(problem.gradient(result.x)) <= 1e-6


def test_iteration_cap_reports_nonconvergence():
    problem, _ = quadratic_problem(dim=8, tol=1e-14, seed=2, max_iter=0)
    result = newton_solve(problem)
    assert not result.converged
    assert result.iterations == 0


def test_gradient_descent_cap():
    grad, hess = logistic_subproblem()
    problem = SolveProblem(gradient=grad, hessian=hess, mu=2.0, lipschitz=10.0,
                           x0=np.array([50.0]), tol=1e-14, max_iter=2)
    result = gradient_descent_solve(problem)
    assert not result.converged


def test_newton_gradient_norm_monotone_along_accepted_steps():
    grad, hess = logistic_subproblem(theta=1.0, h=5.0, v=3.0)
    norms = []
    for cap in range(6):
        problem = SolveProblem(gradient=grad, hessian=hess, mu=0.4, lipschitz=12.0,
                               x0=np.array([-8.0]), tol=1e-13, max_iter=cap)
        norms.append(newton_solve(problem).grad_norm)
    assert all(b <= a + 1e-15 for a, b in zip(norms, norms[1:]))


def test_problem_validation():
    with pytest.raises(ValueError):
        SolveProblem(gradient=lambda x: x, hessian=lambda x: np.eye(1),
                     mu=2.0, lipschitz=1.0, x0=np.zeros(1), tol=1e-8)
    with pytest.raises(ValueError):
        SolveProblem(gradient=lambda x: x, hessian=lambda x: np.eye(1),
                     mu=1.0, lipschitz=2.0, x0=np.zeros(1), tol=0.0)
