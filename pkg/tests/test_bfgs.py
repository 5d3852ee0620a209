import numpy as np
import pytest

from msr_surrogate import bfgs


def quadratic(dim, seed):
    rng = np.random.default_rng(seed)
    Q = np.linalg.qr(rng.normal(size=(dim, dim)))[0]
    A = Q @ np.diag(np.logspace(0, 1, dim)) @ Q.T
    b = rng.normal(size=dim)
    return A, b, (lambda x: (0.5 * x @ A @ x - b @ x, A @ x - b))


def rosenbrock(x):
    f = 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
    g = np.array([-400 * x[0] * (x[1] - x[0] ** 2) - 2 * (1 - x[0]), 200 * (x[1] - x[0] ** 2)])
    return f, g


@pytest.mark.parametrize("dim, seed", [(2, 0), (5, 1), (10, 2), (20, 3)])
def test_exact_search_on_quadratic_terminates_in_dim_steps(dim, seed):
    A, b, fg = quadratic(dim, seed)
    res = bfgs.minimize(fg, np.zeros(dim), gtol=1e-10, max_iter=dim, line_search=bfgs.ExactQuadraticSearch(A))
    assert res.iterations <= dim
    assert np.max(np.abs(res.g)) <= 1e-10
    np.testing.assert_allclose(res.x, np.linalg.solve(A, b), atol=1e-9)


def test_strong_wolfe_solves_rosenbrock():
    res = bfgs.minimize(rosenbrock, np.array([-1.2, 1.0]), gtol=1e-8, max_iter=500)
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)


@pytest.mark.parametrize("alpha0", [1e-4, 1e-2, 1.0, 50.0])
def test_strong_wolfe_conditions_hold(alpha0):
    x = np.array([-1.2, 1.0])
    f0, g0 = rosenbrock(x)
    p = -g0
    ls = bfgs.StrongWolfe()
    res = ls(rosenbrock, x, f0, g0, p, alpha0)
    assert res.ok
    fa, ga = rosenbrock(x + res.alpha * p)
    assert fa <= f0 + ls.c1 * res.alpha * (g0 @ p)
    assert abs(ga @ p) <= ls.c2 * abs(g0 @ p)
    assert res.f == fa


def test_line_search_rejects_ascent_direction():
    x = np.array([0.5, 0.5])
    f0, g0 = rosenbrock(x)
    assert not bfgs.StrongWolfe()(rosenbrock, x, f0, g0, g0, 1.0).ok


def test_objective_values_never_increase():
    _, _, fg = quadratic(8, 4)
    opt = bfgs.BFGS(fg, np.ones(8), initial_step=1e-3)
    values = [opt.f]
    for _ in range(30):
        info = opt.step()
        if not info.accepted:
            break
        values.append(info.f)
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_first_trial_step_is_initial_step():
    calls = []

    def spy(fg, x, f0, g0, p, alpha0):
        calls.append(alpha0)
        return bfgs.StrongWolfe()(fg, x, f0, g0, p, alpha0)

    _, _, fg = quadratic(4, 5)
    opt = bfgs.BFGS(fg, np.ones(4), initial_step=0.003, line_search=spy)
    opt.step()
    opt.step()
    assert calls == [0.003, 1.0]


def test_curvature_failure_resets_to_identity():
    # linear objective: y = 0 on every step
    fg = lambda x: (float(x.sum()), np.ones_like(x))
    opt = bfgs.BFGS(fg, np.zeros(3), line_search=lambda fg, x, f0, g0, p, a: bfgs.LineSearchResult(
        True, a, x + a * p, *fg(x + a * p), 1))
    opt.step()
    assert opt.H is None
