"""Tests for the numerics package: ADAM, RK4, filters, ridge, Riccati and the global optimizers."""
import math

import numpy as np
import pytest
import scipy.linalg

from koopjet.errors import NumericalError
from koopjet.numerics.adam import AdamState, adam_step
from koopjet.numerics.genetic import GaConfig, ga_minimize
from koopjet.numerics.integrate import integrate_ode, rk4_step
from koopjet.numerics.linalg import CareProblem, is_hurwitz, ridge_solve, solve_care, solve_lyapunov
from koopjet.numerics.signal import causal_savgol_derivative_coeffs, central_diff, savitzky_golay
from koopjet.numerics.swarm import SwarmConfig, pso_minimize


def test_adam_first_step_matches_hand_computation():
    """With zero moments the first step is eta (1 - b2)/(1 - b1) * 0.1 g / sqrt(0.001 g^2)."""
    state = AdamState.zeros(1, eta_p=0.1, eps=0.0)
    params, state = adam_step(np.array([1.0]), np.array([1.0]), state)

    expected: float = 0.1 * (1.0 - 0.999) / (1.0 - 0.9) * 0.1 / math.sqrt(0.001)
    assert params[0] == pytest.approx(1.0 - expected, rel=1e-12)
    assert state.k == 2


def test_adam_per_group_rates():
    """An array learning rate scales each parameter's step independently."""
    state = AdamState.zeros(2, eta_p=np.array([0.1, 0.0]))
    params, _ = adam_step(np.array([1.0, 1.0]), np.array([1.0, 1.0]), state)
    assert params[0] < 1.0
    assert params[1] == 1.0


def test_adam_rejects_non_finite_gradient():
    """A NaN gradient is reported instead of silently corrupting the moments."""
    with pytest.raises(ValueError):
        adam_step(np.zeros(2), np.array([np.nan, 0.0]), AdamState.zeros(2))


def test_rk4_fourth_order_convergence():
    """Halving dt on x' = -x shrinks the endpoint error by roughly 2^4."""

    def rhs(_t, x):
        return -x

    errors = []
    for dt in (0.1, 0.05):
        _, states = integrate_ode(rhs, 1.0, (0.0, 1.0), dt)
        errors.append(abs(states[-1] - math.exp(-1.0)))
    assert errors[0] / errors[1] > 12.0


def test_rk4_step_exact_for_linear_polynomial_rhs():
    """x' = 2t is integrated exactly by one RK4 step."""
    x = rk4_step(lambda t, _x: np.array([2.0 * t]), 1.0, np.array([0.0]), 0.5)
    assert x[0] == pytest.approx(1.5**2 - 1.0)


def test_integrate_ode_stop_predicate():
    """Integration ends after the first grid point where the predicate holds."""
    t, states = integrate_ode(lambda _t, _x: np.array([1.0]), np.array([0.0]), (0.0, 10.0), 0.1, stop=lambda _t, x: x[0] >= 1.0)
    assert t[-1] == pytest.approx(1.0)
    assert states[-1, 0] == pytest.approx(1.0)


def test_integrate_ode_divergence_raises():
    """Blow-up to a non-finite state is a numerical failure."""
    with pytest.raises(NumericalError):
        integrate_ode(lambda _t, x: x**2, np.array([1.0]), (0.0, 10.0), 0.5)


@pytest.mark.parametrize("dt", [0.0, -0.01])
def test_integrate_ode_rejects_bad_step(dt):
    """Non-positive steps are rejected up front."""
    with pytest.raises(ValueError):
        integrate_ode(lambda _t, x: x, 1.0, (0.0, 1.0), dt)


def test_savitzky_golay_reproduces_cubic():
    """A cubic passes unchanged through the order-3 filter, edges included."""
    t = np.linspace(0.0, 1.0, 120)
    x = 1.0 - 2.0 * t + 0.5 * t**2 + 3.0 * t**3
    np.testing.assert_allclose(savitzky_golay(x, 51, 3), x, atol=1e-9)


@pytest.mark.parametrize("window, order, length", [
    (50, 3, 100),  # Even window
    (5, 5, 100),  # Order not below window
    (51, 3, 40),  # Series shorter than window
])
def test_savitzky_golay_invalid_arguments(window, order, length):
    """Invalid window and order combinations raise ValueError."""
    with pytest.raises(ValueError):
        savitzky_golay(np.zeros(length), window, order)


def test_causal_derivative_of_ramp():
    """The causal weights recover the slope of a ramp at the newest sample."""
    dt = 0.01
    coeffs = causal_savgol_derivative_coeffs(51, 3, dt)
    ramp = 3.0 * dt * np.arange(51)
    assert float(coeffs @ ramp) == pytest.approx(3.0, rel=1e-8)


def test_central_diff_quadratic():
    """Second-order differences are exact on a quadratic, ends included."""
    dt = 0.1
    t = np.arange(0.0, 1.0, dt)
    np.testing.assert_allclose(central_diff(t**2, dt), 2.0 * t, atol=1e-10)


def test_ridge_solve_exact_fit():
    """Without regularization a consistent system is solved exactly."""
    t = np.linspace(0.0, 1.0, 50)
    E = np.vstack([np.ones_like(t), t])
    K = ridge_solve(E, 2.0 + 3.0 * t, 0.0)
    assert K.shape == (1, 2)
    np.testing.assert_allclose(K[0], [2.0, 3.0], atol=1e-10)


def test_ridge_solve_shrinks_with_alpha():
    """A large ridge weight pulls the coefficients towards zero."""
    t = np.linspace(0.0, 1.0, 50)
    E = np.vstack([np.ones_like(t), t])
    small = ridge_solve(E, 2.0 + 3.0 * t, 1e-6)
    large = ridge_solve(E, 2.0 + 3.0 * t, 1e3)
    assert np.linalg.norm(large) < np.linalg.norm(small)


def test_ridge_solve_singular_without_alpha():
    """Rank-deficient bases need a positive ridge weight."""
    E = np.vstack([np.ones(10), np.ones(10)])
    with pytest.raises(ValueError):
        ridge_solve(E, np.ones(10), 0.0)


def test_scalar_care_closed_form():
    """For A = -1, B = Q = R = 1 the stabilizing solution is sqrt(2) - 1."""
    problem = CareProblem(A=np.array([[-1.0]]), B=np.array([[1.0]]), Q=np.array([[1.0]]), R=np.array([[1.0]]))
    P = solve_care(problem)
    assert P[0, 0] == pytest.approx(math.sqrt(2.0) - 1.0, abs=1e-10)
    assert problem.residual(P) < 1e-8


def test_care_matches_scipy_on_unstable_plant():
    """The Newton-Kleinman solution agrees with the Schur-based reference."""
    A = np.array([[0.0, 1.0], [2.0, -1.0]])
    B = np.array([[0.0], [1.0]])
    Q = np.diag([1.0, 0.5])
    R = np.array([[0.2]])
    problem = CareProblem(A=A, B=B, Q=Q, R=R)
    P = solve_care(problem)
    np.testing.assert_allclose(P, scipy.linalg.solve_continuous_are(A, B, Q, R), rtol=1e-8)
    assert is_hurwitz(A - B @ problem.gain(P))


def test_lyapunov_solution_satisfies_equation():
    """A X + X A^T = Q holds and X is symmetric for a symmetric right-hand side."""
    A = np.array([[-1.0, 2.0], [0.0, -3.0]])
    Q = -np.eye(2)
    X = solve_lyapunov(A, Q)
    np.testing.assert_allclose(A @ X + X @ A.T, Q, atol=1e-12)
    np.testing.assert_allclose(X, X.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(X) > 0.0)


def test_care_problem_shape_check():
    """Inconsistent dimensions are rejected when the problem is built."""
    with pytest.raises(ValueError):
        CareProblem(A=np.eye(2), B=np.ones((3, 1)), Q=np.eye(2), R=np.eye(1))


def test_pso_finds_sphere_minimum():
    """The swarm lands near the minimum of a shifted sphere."""
    config = SwarmConfig(population=30, bounds=[(-5.0, 5.0), (-5.0, 5.0)], max_iters=60, seed=3)
    best, cost = pso_minimize(lambda x: float(np.sum((x - np.array([1.0, -2.0])) ** 2)), config)
    np.testing.assert_allclose(best, [1.0, -2.0], atol=1e-2)
    assert cost < 1e-4


def test_pso_keeps_positions_in_box():
    """Costs are only requested inside the box."""
    seen = []
    config = SwarmConfig(population=10, bounds=[(0.0, 1.0)], max_iters=5, seed=0)

    def objective(x):
        seen.append(float(x[0]))
        return -float(x[0])

    pso_minimize(objective, config)
    assert min(seen) >= 0.0
    assert max(seen) <= 1.0


def test_ga_best_cost_never_increases():
    """Elitism makes the reported best cost monotone over generations."""
    history = []
    config = GaConfig(population=20, generations=15, elite_count=2, bounds=[(-3.0, 3.0)] * 3, seed=1)
    best = ga_minimize(
        lambda x: float(np.sum(x**2)), config, callback=lambda _g, _x, cost: history.append(cost)
    )
    assert len(history) == 15
    assert all(b <= a + 1e-15 for a, b in zip(history, history[1:]))
    assert float(np.sum(best**2)) == pytest.approx(history[-1])


def test_ga_keeps_seeded_optimum_under_full_mutation():
    """A seeded optimum survives generations in which every child is mutated."""
    history = []
    config = GaConfig(
        population=10, generations=8, elite_count=1, bounds=[(-1.0, 1.0)] * 2, mutation_rate=1.0, crossover_rate=0.0
    )
    best = ga_minimize(
        lambda x: float(np.sum(x**2)),
        config,
        initial_positions=np.zeros((1, 2)),
        callback=lambda _g, _x, cost: history.append(cost),
    )
    assert history == [0.0] * 8
    np.testing.assert_array_equal(best, [0.0, 0.0])


@pytest.mark.parametrize("elite_count", [0, 4, 5])
def test_ga_config_elite_bound(elite_count):
    """At least one elite survives and the elites stay below the population size."""
    with pytest.raises(ValueError, match="elite_count"):
        GaConfig(population=4, elite_count=elite_count, bounds=[(0.0, 1.0)])
