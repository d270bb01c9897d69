"""Tests for the Koopman eigenfunction model: spectrum, eigenfunctions, modes, prediction and thrust."""
import numpy as np
import pytest
from scipy.special import expit

from koopjet.koopman.build import _keep, kept_spectrum
from koopjet.koopman.eigenfunctions import EigenComponent, Eigenfunction, EigenfunctionConfig, fit_eigenfunction
from koopjet.koopman.lpv import lpv_decompose, lpv_sweep
from koopjet.koopman.model import KoopmanModel, kem_rhs
from koopjet.koopman.modes import fit_modes, lambda_matrix
from koopjet.koopman.sampling import nonlinear_sampling
from koopjet.koopman.spectrum import (
    INVALID_COST,
    EigenEntry,
    EigenvalueSet,
    eig_objective_complex,
    eig_objective_real,
    exp_basis,
    optimize_eigenvalues,
    resolve_complex,
    resolve_real,
)
from koopjet.koopman.thrust import fit_thrust_output, normalize_thrust, thrust_mape
from koopjet.numerics.swarm import SwarmConfig


def _flat_component() -> EigenComponent:
    return EigenComponent(xi=np.zeros(0), eps=np.zeros(0), mu=np.zeros(0), linear=1.0)


def test_resolve_real_merges_close_candidates():
    """Candidates closer than the tolerance collapse into a distinct/secular pair."""
    eigs = resolve_real([-1.0, -3.0, -1.02], tol=0.05)
    tags = [e.tag for e in eigs.entries]
    assert tags == ["distinct", "repeated-secular", "distinct"]
    assert eigs.entries[0].alpha == pytest.approx(-1.01)
    assert eigs.entries[1].alpha == pytest.approx(-1.01)
    assert eigs.entries[2].alpha == pytest.approx(-3.0)


@pytest.mark.parametrize("alpha, beta, tag, dimension", [
    (-1.0, 0.01, "distinct", 1),  # Small imaginary part becomes real
    (-1.0, 1.0, "distinct", 2),
    (-1.0, 5.0, "merged-out", 0),  # Too oscillatory
])
def test_resolve_complex_rules(alpha, beta, tag, dimension):
    """Imaginary parts are merged, kept or excluded by the admissible-region rules."""
    entry = resolve_complex([alpha], [beta]).entries[0]
    assert entry.tag == tag
    assert entry.dimension == dimension


def test_exp_basis_rows():
    """A conjugate pair contributes a cosine and a sine row; secular entries carry (1 + t)."""
    t = np.linspace(0.0, 2.0, 5)
    eigs = EigenvalueSet(entries=(EigenEntry(alpha=-1.0, beta=2.0), EigenEntry(alpha=-0.5), EigenEntry(alpha=-0.5, tag="repeated-secular")))
    E = exp_basis(eigs, t)
    assert E.shape == (4, 5)
    np.testing.assert_allclose(E[0], np.exp(-t) * np.cos(2.0 * t))
    np.testing.assert_allclose(E[1], np.exp(-t) * np.sin(2.0 * t))
    np.testing.assert_allclose(E[3], (1.0 + t) * np.exp(-0.5 * t))


def test_optimize_eigenvalues_recovers_single_decay():
    """A pure exponential trajectory is spanned exactly by its own rate."""
    t = np.arange(0.0, 3.0, 0.01)
    swarm = SwarmConfig(population=20, bounds=[(0.0, 1.0)], max_iters=30, seed=0)
    fit = optimize_eigenvalues(t, 0.5 * np.exp(-2.0 * t), order=1, mode="real", swarm=swarm)
    assert fit.eigs.entries[0].alpha == pytest.approx(-2.0, abs=1e-2)
    assert fit.mae < 1e-3



def test_real_objective_prefers_true_rate():
    """The generating rate spans the trajectory; a wrong rate leaves a residual."""
    t = np.arange(0.0, 3.0, 0.01)
    N = 0.5 * np.exp(-2.0 * t)
    exact = eig_objective_real([-2.0], t, N)
    assert exact < 1e-10
    assert eig_objective_real([-1.0], t, N) > 1e-3 > exact


def test_complex_objective_prefers_true_pair():
    """A damped oscillation is spanned by its own pair and not by a faster one."""
    t = np.arange(0.0, 5.0, 0.01)
    N = np.exp(-t) * np.cos(2.0 * t)
    exact = eig_objective_complex([-1.0], [2.0], t, N)
    assert exact < 1e-10
    assert eig_objective_complex([-1.0], [2.4], t, N) > exact


def test_objective_invalid_candidate_cost():
    """Candidates the basis cannot be built from cost the fixed penalty."""
    t = np.arange(0.0, 1.0, 0.01)
    assert eig_objective_complex([-1.0], [5.0], t, np.exp(-t)) == INVALID_COST

@pytest.mark.parametrize("kind, param", [("exponential", 5.0), ("power", 2.0), ("exponential", 0.0)])
def test_nonlinear_sampling_is_increasing(kind, param):
    """Samples are strictly increasing inside (0, N_max]."""
    N = nonlinear_sampling(50, kind, param)
    assert np.all(np.diff(N) > 0.0)
    assert N[0] > 0.0
    assert N[-1] == pytest.approx(1.0)


def test_nonlinear_sampling_denser_near_zero():
    """Exponential spacing puts the first gap well below the last one."""
    N = nonlinear_sampling(50, "exponential", 5.0)
    assert N[1] - N[0] < N[-1] - N[-2]


def test_fit_eigenfunction_of_linear_flow():
    """For dN/dt = -2 N the eigenfunction at -2 is N itself, anchored to 1 at the top sample."""
    config = EigenfunctionConfig(n_logistic=0, max_iters=0)
    N = nonlinear_sampling(100, "exponential", 3.0)
    fit = fit_eigenfunction(EigenEntry(alpha=-2.0), lambda x: -2.0 * x, N, config)
    assert fit.eigenfunction.kind == "distinct-real"
    assert fit.eigenfunction.components[0].linear == pytest.approx(1.0, abs=1e-8)
    assert fit.residual < 1e-12
    np.testing.assert_allclose(fit.anchor, [1.0], atol=1e-8)


def test_eigenfunction_anchor_follows_first_pass():
    """With phi = c N on a quadratic flow the first pass trades residual against phi(1) = 1, and the spring keeps that value."""
    config = EigenfunctionConfig(n_logistic=0, max_iters=0, residual_floor=10.0)
    N = nonlinear_sampling(100, "exponential", 3.0)
    fit = fit_eigenfunction(EigenEntry(alpha=-2.0), lambda x: -2.0 * x - 0.5 * x**2, N, config)
    top = float(N.max())
    first = top**2 / (top**2 + 0.25 * float(np.mean(N**4)))
    assert first < 1.0
    np.testing.assert_allclose(fit.anchor, [first], rtol=1e-8)


def test_default_eigenfunction_learning_rates():
    """Logistic slopes step at 50, weights and centres at 0.01."""
    assert EigenfunctionConfig().learning_rates == (0.01, 50.0, 0.01)


def test_secular_eigenfunction_needs_partner():
    """A secular entry cannot be fitted on its own."""
    with pytest.raises(ValueError):
        fit_eigenfunction(EigenEntry(alpha=-2.0, tag="repeated-secular"), lambda x: -2.0 * x, np.linspace(0.1, 1.0, 10))


def test_lambda_matrix_blocks():
    """Complex pairs give rotation-scaling blocks and generalized eigenfunctions a unit coupling."""
    pair = Eigenfunction(entry=EigenEntry(alpha=-1.0, beta=2.0), components=(_flat_component(), _flat_component()), kind="complex-pair")
    distinct = Eigenfunction(entry=EigenEntry(alpha=-3.0), components=(_flat_component(),), kind="distinct-real")
    secular = Eigenfunction(
        entry=EigenEntry(alpha=-3.0, tag="repeated-secular"), components=(_flat_component(),), kind="generalized", partner=1
    )
    Lam = lambda_matrix((pair, distinct, secular))
    expected = np.array(
        [
            [-1.0, -2.0, 0.0, 0.0],
            [2.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, -3.0, 0.0],
            [0.0, 0.0, 1.0, -3.0],
        ]
    )
    np.testing.assert_allclose(Lam, expected)


def test_fit_modes_identity_eigenfunction(linear_kem):
    """With phi = N the amplitude is one and reconstruction is exact."""
    fit = fit_modes(linear_kem.eigenfunctions, np.linspace(0.0, 1.0, 50))
    assert fit.C[0] == pytest.approx(1.0, abs=1e-5)
    assert fit.active.tolist() == [True]
    assert fit.mae < 1e-5


def test_linear_kem_prediction_matches_closed_form(linear_kem):
    """The one-state KEM of a linear spool reproduces its exact step response."""
    dt = 0.01
    t = np.arange(0.0, 3.0, dt)
    N, states = linear_kem.simulate(np.ones_like(t), 0.2, dt)
    assert states.shape == (1, len(t))
    np.testing.assert_allclose(N, 0.4 - 0.2 * np.exp(-2.0 * t), atol=1e-9)


def test_input_map_and_discretization(linear_kem):
    """G(N) = phi'(N) g(N) = 0.8 and G_d = (1 - exp(-2 dt)) / 2 * 0.8."""
    dt = 0.01
    np.testing.assert_allclose(linear_kem.input_map(0.3), [0.8])
    np.testing.assert_allclose(linear_kem.discrete_input_map(0.3, dt), [0.8 * (1.0 - np.exp(-2.0 * dt)) / 2.0])
    np.testing.assert_allclose(linear_kem.Lambda, [[-2.0]])


def test_kem_rhs(linear_kem):
    """Lambda Phi plus the input map at the supplied speed estimate."""
    np.testing.assert_allclose(kem_rhs(linear_kem, np.array([0.3]), 0.3, 1.0), [0.2])
    np.testing.assert_allclose(kem_rhs(linear_kem, np.array([0.4]), 0.9, 1.0), [0.0])


def test_lpv_single_function_reproduces_constant_map():
    """With m = 1 the constant scheduling function alone reproduces a constant input map."""
    lpv, error = lpv_decompose(lambda N: np.full((1, len(N)), 0.8), 1)
    assert lpv.m == 1
    assert error < 1e-6
    np.testing.assert_allclose(lpv.G_tilde, [[0.8]], rtol=1e-6)
    np.testing.assert_allclose(lpv.G(np.array([0.1, 0.7])), [[0.8, 0.8]], rtol=1e-6)
    with pytest.raises(ValueError):
        lpv_decompose(lambda N: np.full((1, len(N)), 0.8), 0)


SIX_MODE_PAIRS = [(-0.5, 0.8), (-2.0, 3.0), (-5.0, 6.0)]


@pytest.fixture
def six_mode_trajectories():
    """Fixture providing three decays built from the same three damped oscillations with different amplitudes."""
    t = np.arange(0.0, 8.0, 0.01)
    rows = []
    for k, amplitudes in enumerate(([0.4, 0.1, 0.3, -0.2, 0.2, 0.1], [0.2, -0.1, 0.1, 0.2, -0.3, 0.2], [0.3, 0.2, -0.2, 0.1, 0.1, -0.1])):
        N = np.zeros_like(t)
        for j, (alpha, beta) in enumerate(SIX_MODE_PAIRS):
            a, b = amplitudes[2 * j], amplitudes[2 * j + 1]
            N += np.exp(alpha * t) * (a * np.cos(beta * t) + b * np.sin(beta * t))
        rows.append(N)
    return t, np.vstack(rows)


def test_six_mode_complex_spectrum_spans_its_trajectories(six_mode_trajectories):
    """Three admissible pairs reproduce trajectories made of exactly those pairs."""
    t, N = six_mode_trajectories
    alphas = [alpha for alpha, _ in SIX_MODE_PAIRS]
    betas = [beta for _, beta in SIX_MODE_PAIRS]
    eigs = resolve_complex(alphas, betas)
    assert eigs.order == 6
    assert eig_objective_complex(alphas, betas, t, N) <= 1e-8


@pytest.mark.slow
def test_swarm_recovers_six_mode_complex_spectrum(six_mode_trajectories):
    """The complex-mode search lands within five percent of every generating pair."""
    t, N = six_mode_trajectories
    swarm = SwarmConfig(population=200, bounds=[(0.0, 1.0)], max_iters=200, seed=0)
    fit = optimize_eigenvalues(t, N, order=6, mode="complex", swarm=swarm)
    found = sorted((e.alpha, e.beta) for e in fit.eigs.active)
    assert len(found) == 3
    for (alpha, beta), (true_alpha, true_beta) in zip(found, sorted(SIX_MODE_PAIRS)):
        assert alpha == pytest.approx(true_alpha, rel=0.05)
        assert beta == pytest.approx(true_beta, rel=0.05)


def _smooth_input_map(N):
    N = np.asarray(N, dtype=float)
    return np.vstack(
        [
            0.8 + 0.4 * expit(12.0 * (N - 0.6)),
            0.3 - 0.2 * expit(6.0 * (N - 0.3)),
            0.5 + N**2,
        ]
    )


def test_lpv_eight_functions_within_ten_percent():
    """Eight scheduling functions approximate a smooth three-state input map to within ten percent."""
    swarm = SwarmConfig(population=40, bounds=[(0.0, 1.0)], max_iters=50, seed=0)
    results = lpv_sweep(_smooth_input_map, [1, 8], swarm=swarm)
    model, error = results[8]
    assert model.m == 8
    assert error <= 0.1
    assert error <= results[1][1]


def test_kem_validate_on_step_dataset(linear_kem, step_dataset):
    """Validation of the generating model gives a negligible speed error."""
    result = linear_kem.validate(step_dataset)
    assert result.mae_rpm < 1e-4


def test_phi_grid_frame_columns(linear_kem):
    """The eigenfunction table lists N, every state and the reconstruction."""
    frame = linear_kem.phi_grid_frame(np.linspace(0.0, 1.0, 11))
    assert list(frame.columns) == ["N", "phi_0", "N_hat"]
    np.testing.assert_allclose(frame["N_hat"], frame["N"])


def test_kem_dict_restores_prediction(linear_kem):
    """A KEM read back from its dictionary predicts identically."""
    restored = KoopmanModel.from_dict(linear_kem.to_dict())
    W = np.full(50, 0.7)
    np.testing.assert_allclose(restored.simulate(W, 0.1, 0.01)[0], linear_kem.simulate(W, 0.1, 0.01)[0])


def test_amplitude_shape_mismatch_rejected(linear_kem):
    """C must cover every eigenfunction state."""
    with pytest.raises(ValueError):
        KoopmanModel(
            eigs=linear_kem.eigs,
            eigenfunctions=linear_kem.eigenfunctions,
            C=np.array([1.0, 0.0]),
            sindy=linear_kem.sindy,
        )


def test_pruned_model_spectrum_lists_kept_modes():
    """Pruning a complex pair drops it from the spectrum the model carries."""
    pair = Eigenfunction(entry=EigenEntry(alpha=-1.0, beta=2.0), components=(_flat_component(), _flat_component()), kind="complex-pair")
    distinct = Eigenfunction(entry=EigenEntry(alpha=-3.0), components=(_flat_component(),), kind="distinct-real")
    kept = _keep([pair, distinct], np.array([False, True]))
    eigs = kept_spectrum(kept)
    assert eigs.entries == (distinct.entry,)
    assert eigs.order == 1
    assert kept_spectrum([pair, distinct]).order == 3


def test_spectrum_state_mismatch_rejected(linear_kem):
    """The spectrum must describe exactly the eigenfunction states."""
    with pytest.raises(ValueError, match="spectrum"):
        KoopmanModel(
            eigs=EigenvalueSet(entries=(EigenEntry(alpha=-2.0), EigenEntry(alpha=-5.0))),
            eigenfunctions=linear_kem.eigenfunctions,
            C=np.array([1.0]),
            sindy=linear_kem.sindy,
        )


def test_thrust_output_fit_is_exact_for_linear_readout():
    """A thrust that is linear in Phi and W_f is recovered by the projection."""
    rng = np.random.default_rng(0)
    Phi = rng.uniform(0.0, 1.0, (2, 200))
    W = rng.uniform(0.0, 1.0, 200)
    F = 0.3 * Phi[0] - 0.1 * Phi[1] + 0.5 * W
    out = fit_thrust_output(Phi, W, F)
    np.testing.assert_allclose(out.C_F, [0.3, -0.1], atol=1e-10)
    assert out.D_F == pytest.approx(0.5)
    assert thrust_mape(out.predict(Phi, W), F) < 1e-8


def test_normalize_thrust_reference_pressure():
    """At reference inlet pressure the design thrust normalizes to one."""
    assert float(normalize_thrust(1500.0, 101325.0, 1500.0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        normalize_thrust(1.0, 101325.0, 0.0)
