"""Tests for the speed governors, the K-LQGI design chain and the loop margins."""
import math
from dataclasses import replace

import numpy as np
import pytest

from koopjet.config import P_REF, T_REF
from koopjet.control import CONTROLLER_REGISTRY, ControlInput, ControllerBase, controller_class
from koopjet.control.imc import ImcConfig, ImcController, ImcState, imc_design, imc_gains, imc_step
from koopjet.control.lpv_pi import LpvPiConfig, LpvPiSchedule, flight_gain_correction, lpv_pi_design, step_cost
from koopjet.control.lqgi import (
    LqgiController,
    LqgiDesign,
    LqgiWeights,
    ObserverNoise,
    augment_system,
    default_noise,
    estimate_noise,
    initial_state,
    kalman_design,
    lqgi_step,
    lqi_design,
    phi_weight,
)
from koopjet.control.margins import closed_loop_spectrum, design_margins, loop_margins, separation_error
from koopjet.control.pi import PiController, PiGains, pi_step
from koopjet.control.weights import (
    DEFAULT_WEIGHT_SEARCH_CONFIG,
    SMOKE_WEIGHT_SEARCH_CONFIG,
    WeightSearchConfig,
    build_loop,
    decision_dimension,
    decode,
    encode,
    evaluate_weights,
    optimize_weights,
)
from koopjet.datakit.normalization import DEFAULT_NORMALIZATION
from koopjet.errors import InfeasibleDesignError, NumericalError
from koopjet.plant.atmosphere import Ambient
from koopjet.sindy.model import linearize

SPEC = DEFAULT_NORMALIZATION
DT = 0.01

# Inlet at the correction reference, where corrected and physical values coincide.
REFERENCE_AMBIENT = Ambient(H=0.0, M0=0.0, p0=P_REF, T0=T_REF, p1t=P_REF, T1t=T_REF)


def _at_rest(N: float) -> ControlInput:
    rpm = float(SPEC.denormalize_speed(N))
    return ControlInput(t=0.0, N_meas=rpm, N_d=rpm, ambient=REFERENCE_AMBIENT)


@pytest.fixture
def lqgi_design(linear_kem) -> LqgiDesign:
    """Fixture providing a K-LQGI design on the linear one-state KEM."""
    schedule = lqi_design(linear_kem, LqgiWeights(), T_f=0.1)
    L = kalman_design(linear_kem, default_noise(linear_kem.n, SPEC))
    return LqgiDesign(model=linear_kem, schedule=schedule, L=L, T_f=0.1)


@pytest.mark.parametrize("antiwindup, expected_v, expected_integral", [
    (False, 0.1 + 3.0 * 0.001, 0.001),
    (True, 0.1, 0.0),
])
def test_pi_step(antiwindup, expected_v, expected_integral):
    """The integral advances before the output unless the anti-windup flag holds it."""
    v, integral = pi_step(PiGains(Kp=1.0, Ki=3.0), e=0.1, dt=DT, integral=0.0, antiwindup_flag=antiwindup)
    assert v == pytest.approx(expected_v)
    assert integral == pytest.approx(expected_integral)


def test_pi_gains_must_be_non_negative():
    """Negative gains are rejected at construction."""
    with pytest.raises(ValueError):
        PiGains(Kp=-1.0, Ki=3.0)


def test_pi_controller_bumpless_start_and_clamp_hold():
    """Zero error reproduces the start fuel; a clamped sample leaves the integral untouched."""
    controller = PiController(PiGains(), SPEC, DT)
    W_f0 = float(SPEC.denormalize_fuel(0.5))
    controller.reset(float(SPEC.denormalize_speed(0.3)), W_f0, REFERENCE_AMBIENT)
    action = controller.step(_at_rest(0.3))
    assert action.fuel == pytest.approx(W_f0)

    before = controller.integral
    demand = ControlInput(t=0.01, N_meas=float(SPEC.denormalize_speed(0.3)), N_d=float(SPEC.denormalize_speed(0.5)), ambient=REFERENCE_AMBIENT)
    controller.step(demand)
    controller.on_applied(1.0, clamped=True)
    assert controller.integral == before
    controller.step(demand)
    controller.on_applied(1.0, clamped=False)
    assert controller.integral > before


def test_flight_gain_correction():
    """Gains are unchanged at reference inlet conditions and rescaled with p1t otherwise."""
    assert flight_gain_correction(2.0, 5.0, REFERENCE_AMBIENT) == pytest.approx((2.0, 5.0))
    low = Ambient(H=0.0, M0=0.0, p0=P_REF, T0=T_REF, p1t=0.5 * P_REF, T1t=T_REF)
    Kp, Ki = flight_gain_correction(2.0, 5.0, low)
    assert Kp == pytest.approx(4.0)
    assert Ki == pytest.approx(2.5)


def test_lpv_pi_schedule_floors_gains():
    """A polynomial that dips below zero is floored at a small positive gain."""
    schedule = LpvPiSchedule(poly_Kp=np.array([-1.0]), poly_Ki=np.array([2.0, 0.0]))
    Kp, Ki = schedule.gains(0.5)
    assert 0.0 < Kp < 1e-3
    assert Ki == pytest.approx(1.0)


def test_lpv_pi_step_cost_prefers_stabilizing_gains(linear_sindy):
    """Pole-cancelling gains give a small cost; gains that destabilize the local loop hit the penalty."""
    lin = linearize(linear_sindy, 0.5)
    config = LpvPiConfig()
    assert step_cost(lin, 2.0, 4.0, config) < 0.5
    assert step_cost(lin, 0.01, 60.0, config) >= 1e6


def test_lpv_pi_design_small_grid(linear_sindy):
    """A coarse PSO design keeps every stable grid point and fits a positive schedule."""
    config = LpvPiConfig(grid_points=3, population=8, iterations=5, seed=0)
    schedule = lpv_pi_design(linear_sindy, config)
    assert len(schedule.grid) == 3
    assert schedule.rejected == ()
    for N in (0.0, 0.5, 1.0):
        Kp, Ki = schedule.gains(N)
        assert Kp > 0.0 and Ki > 0.0


def test_imc_gains():
    """K_e = 1, T_e = 0.2, T_f = 0.1 and tau_f = 0.05 give Kp = 120, Ki = 400, Kd = 8."""
    gains = imc_gains(K_e=1.0, T_e=0.2, T_f=0.1, tau_f=0.05)
    assert gains.Kp == pytest.approx(120.0)
    assert gains.Ki == pytest.approx(400.0)
    assert gains.Kd == pytest.approx(8.0)


def test_imc_step_free_decay():
    """Without error the command decays through the exact -2/tau_f pole."""
    config = ImcConfig(tau_f=0.05)
    state = imc_step(ImcState(v=1.0, integral=0.0), e=0.0, de=0.0, K_e=0.4, T_e=0.5, dt=DT, config=config)
    assert state.v == pytest.approx(math.exp(-2.0 * DT / 0.05))
    assert state.integral == 0.0


def test_imc_step_antiwindup_holds_integral():
    """The integral is frozen while the flag is set."""
    state = imc_step(ImcState(v=0.0, integral=3.0), e=1.0, de=0.0, K_e=0.4, T_e=0.5, dt=DT, antiwindup_flag=True)
    assert state.integral == 3.0


def test_imc_controller_bumpless_start(linear_sindy):
    """At equilibrium with zero error the first command equals the start fuel."""
    controller = ImcController(linear_sindy, SPEC, DT)
    W_f0 = float(SPEC.denormalize_fuel(1.0))
    controller.reset(float(SPEC.denormalize_speed(0.4)), W_f0, REFERENCE_AMBIENT)
    assert controller.step(_at_rest(0.4)).fuel == pytest.approx(W_f0, rel=1e-12)


def test_imc_design_table(linear_sindy):
    """Every grid point of a stable model is tabulated with the same gains."""
    design = imc_design(linear_sindy, ImcConfig(tau_f=0.05), grid_points=5)
    assert len(design.gains) == 5
    expected = imc_gains(0.4, 0.5, 0.1, 0.05)
    assert design.gains[2].Kp == pytest.approx(expected.Kp)
    assert design.to_dict()["table"][0]["K_e"] == pytest.approx(0.4)


def test_augmented_system_structure(linear_kem):
    """z = (Phi, W_f, eta): fuel lag on the second state, integral of -N on the last."""
    A, B, C = augment_system(linear_kem, 0.5, 0.1)
    assert A.shape == (3, 3)
    np.testing.assert_allclose(A, [[-2.0, 0.8, 0.0], [0.0, -10.0, 0.0], [-1.0, 0.0, 0.0]])
    np.testing.assert_allclose(B[:, 0], [0.0, 10.0, 0.0])
    np.testing.assert_allclose(C[0], [1.0, 0.0, 0.0])


def test_phi_weight_perturbation():
    """Perturbations add (0.5 + d) times the mean diagonal; wrong lengths are rejected."""
    np.testing.assert_allclose(phi_weight(np.array([1.0]), 1.0, [0.2]), [[1.7]])
    np.testing.assert_allclose(phi_weight(np.array([1.0, 1.0]), 2.0), 2.0 * np.ones((2, 2)))
    with pytest.raises(ValueError):
        phi_weight(np.array([1.0]), 1.0, [0.1, 0.2])


def test_lqi_schedule_stabilizes_every_grid_point(linear_kem):
    """The tabulated gains place the augmented closed loop in the left half-plane."""
    schedule = lqi_design(linear_kem)
    assert schedule.width == 3
    assert len(schedule.grid) == 21
    for N in (0.0, 0.37, 1.0):
        A, B, _ = augment_system(linear_kem, N, 0.1)
        assert np.all(np.linalg.eigvals(A - B @ schedule.K(N).reshape(1, -1)).real < 0.0)


def test_scalar_kalman_gain(make_linear_kem):
    """For Lambda = -1 with unit noise intensities the observer gain is sqrt(2) - 1."""
    model = make_linear_kem(-1.0, 0.8)
    L = kalman_design(model, ObserverNoise(Q_o=np.array([[1.0]]), R_o=1.0))
    assert L[0] == pytest.approx(math.sqrt(2.0) - 1.0, abs=1e-8)


def test_kalman_rejects_unobservable_pair(linear_kem):
    """A zero read-out cannot be observed."""
    from koopjet.koopman.model import KoopmanModel

    blind = KoopmanModel(eigs=linear_kem.eigs, eigenfunctions=linear_kem.eigenfunctions, C=np.array([0.0]), sindy=linear_kem.sindy)
    with pytest.raises(NumericalError):
        kalman_design(blind, ObserverNoise(Q_o=np.eye(1), R_o=1.0))


def test_observer_noise_projects_indefinite_covariance():
    """A slightly indefinite estimate is projected onto the semidefinite cone."""
    noise = ObserverNoise(Q_o=np.array([[1.0, 2.0], [2.0, 1.0]]), R_o=0.1)
    assert np.linalg.eigvalsh(noise.Q_o).min() >= -1e-12
    with pytest.raises(ValueError):
        ObserverNoise(Q_o=np.eye(1), R_o=0.0)


def test_integrator_margins():
    """k/s has 90 degrees of phase margin at omega = k and no phase crossover."""
    lm = loop_margins(np.array([[0.0]]), np.array([[1.0]]), np.array([[2.0]]))
    assert lm.pm_deg == pytest.approx(90.0, abs=0.1)
    assert lm.w_gc == pytest.approx(2.0, rel=1e-3)
    assert math.isinf(lm.gm_db)


def test_third_order_gain_margin():
    """1 / (s (s + 1) (s + 2)) crosses -180 degrees at sqrt(2) rad/s with 20 log10(6) dB to spare."""
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, -2.0, -3.0]])
    B = np.array([[0.0], [0.0], [1.0]])
    C = np.array([[1.0, 0.0, 0.0]])
    lm = loop_margins(A, B, C)
    assert lm.gm_db == pytest.approx(20.0 * math.log10(6.0), abs=0.05)
    assert lm.w_pc == pytest.approx(math.sqrt(2.0), rel=1e-2)
    assert 50.0 < lm.pm_deg < 57.0


def test_separation_of_regulator_and_observer(lqgi_design):
    """The observer-based closed loop has exactly the regulator and observer eigenvalues."""
    for N in (0.1, 0.5, 0.9):
        assert separation_error(lqgi_design, N) < 1e-8


def test_design_margins_report(lqgi_design):
    """Every grid point of the linear design is closed-loop stable."""
    report = design_margins(lqgi_design)
    assert len(report.table) == 21
    assert bool(np.all(report.table["max_real_cl"] < 0.0))
    assert report.to_dict()["gm_min_db"] == report.gm_min
    spectrum = closed_loop_spectrum(lqgi_design, grid=np.array([0.5]))
    assert len(spectrum) == 2 * 2 + 1


def test_lqgi_controller_bumpless_start(lqgi_design):
    """At equilibrium the first command equals the start fuel and the estimate stays put."""
    controller = LqgiController(lqgi_design, SPEC, DT)
    W_f0 = float(SPEC.denormalize_fuel(1.0))
    controller.reset(float(SPEC.denormalize_speed(0.4)), W_f0, REFERENCE_AMBIENT)
    action = controller.step(_at_rest(0.4))
    assert action.fuel == pytest.approx(W_f0, rel=1e-9)
    assert action.N_hat == pytest.approx(float(SPEC.denormalize_speed(0.4)))
    controller.on_applied(action.fuel, clamped=False)
    assert controller.state.Phi_hat[0] == pytest.approx(0.4, abs=1e-9)


def test_lqgi_design_dict_restores_controller(lqgi_design):
    """The saved design block rebuilds an equivalent controller."""
    restored = controller_class("klqgi").from_design(lqgi_design.to_dict(), SPEC, DT)
    np.testing.assert_allclose(restored.design.L, lqgi_design.L)
    np.testing.assert_allclose(restored.design.schedule.K(0.5), lqgi_design.schedule.K(0.5))


def test_lqgi_step_at_equilibrium(lqgi_design):
    """At rest on the demand the command, the estimate and the integral stay put."""
    state = initial_state(lqgi_design, 0.4, 1.0)
    v, advanced, N_hat = lqgi_step(lqgi_design, state, 0.4, 0.4, DT)
    assert v == pytest.approx(1.0, rel=1e-9)
    assert N_hat == pytest.approx(0.4)
    assert advanced.Phi_hat[0] == pytest.approx(0.4, abs=1e-9)
    assert advanced.W_f_hat == pytest.approx(1.0)
    assert advanced.eta == pytest.approx(state.eta)


def test_lqgi_step_holds_integral_while_clamped(lqgi_design):
    """A clamped sample keeps the integral and feeds the applied fuel to the lag estimate."""
    state = initial_state(lqgi_design, 0.4, 1.0)
    _, free, _ = lqgi_step(lqgi_design, state, 0.4, 0.5, DT)
    assert free.eta == pytest.approx(state.eta + 0.1 * DT)
    v, held, _ = lqgi_step(lqgi_design, state, 0.4, 0.5, DT, limit=lambda _v: (0.9, True))
    assert v == 0.9
    assert held.eta == state.eta
    assert held.W_f_hat < 1.0


def test_estimate_noise_on_noiseless_data(linear_kem, step_dataset):
    """Data generated by the model leaves no process residual; a clean raw channel falls back to 1 RPM."""
    noise = estimate_noise(linear_kem, step_dataset)
    assert noise.Q_o.shape == (1, 1)
    assert noise.Q_o[0, 0] < 1e-20
    assert noise.R_o == pytest.approx((1.0 / SPEC.S_N) ** 2)


def test_estimate_noise_from_raw_channel(linear_kem, step_dataset):
    """Sensor variance is read from the raw minus filtered speed over the steady samples."""
    jitter = 10.0 * (-1.0) ** np.arange(len(step_dataset))
    noisy = replace(step_dataset, N_raw=step_dataset.N_filt + jitter)
    noise = estimate_noise(linear_kem, noisy)
    assert noise.R_o == pytest.approx(1e-6, rel=1e-2)


def test_weight_search_reports_infeasible_margins(make_linear_kem):
    """An unreachable phase-margin requirement ends in an infeasible-design error carrying the best candidate."""
    config = WeightSearchConfig(population=4, generations=2, elite_count=1, grid_points=5, pm_min=181.0)
    with pytest.raises(InfeasibleDesignError) as excinfo:
        optimize_weights(make_linear_kem(-2.0, 2.0), config)
    report = excinfo.value.report
    assert report["feasible"] is False
    assert math.isfinite(report["cost"])
    assert report["margins"]["pm_min_deg"] < 181.0


@pytest.mark.parametrize("config, population, generations", [
    (DEFAULT_WEIGHT_SEARCH_CONFIG, 100, 100),
    (SMOKE_WEIGHT_SEARCH_CONFIG, 30, 30),
])
def test_weight_search_sizing(config, population, generations):
    """The full search runs 100 x 100; the quick preset keeps the other settings."""
    ga = config.ga(6)
    assert (ga.population, ga.generations) == (population, generations)
    assert ga.elite_count == DEFAULT_WEIGHT_SEARCH_CONFIG.elite_count
    assert len(ga.bounds) == decision_dimension(6)


@pytest.mark.parametrize("n", [1, 6])
def test_weight_decision_vector(n):
    """Three log-weights plus one perturbation per eigenfunction state, Q_N fixed at one."""
    assert decision_dimension(n) == 3 + n
    x = np.array([1.0, -1.0, 0.5] + [0.1] * n)
    weights = decode(x)
    assert weights.Q_N == 1.0
    assert weights.Q_i == pytest.approx(10.0)
    assert weights.Q_f == pytest.approx(0.1)
    np.testing.assert_allclose(encode(weights, n), x)


def test_weight_candidate_evaluation(make_linear_kem):
    """A unit-weight candidate on the linear KEM yields a finite tracking cost and a margin report."""
    model = make_linear_kem(-2.0, 2.0)
    config = WeightSearchConfig()
    loop = build_loop(model, config)
    evaluation = evaluate_weights(loop, LqgiWeights(dQ=[0.0]), config)
    assert math.isfinite(evaluation.cost)
    assert evaluation.schedule is not None
    assert evaluation.summary()["margins"]["points"]


@pytest.mark.parametrize("name", sorted(CONTROLLER_REGISTRY))
def test_controller_registry(name):
    """Every registered name resolves to a governor class that carries that name."""
    klass = controller_class(name)
    assert issubclass(klass, ControllerBase)
    assert klass.name == name


def test_controller_registry_unknown_name():
    """Unknown names are a ValueError naming the alternatives."""
    with pytest.raises(ValueError, match="pi"):
        controller_class("bang-bang")


def test_pi_from_design():
    """The PI design block carries the two gains."""
    controller = controller_class("pi").from_design({"Kp": 2.0, "Ki": 4.0}, SPEC, DT)
    assert controller.gains == PiGains(Kp=2.0, Ki=4.0)
