"""Tests for the atmosphere, the component relations, the fuel limiter and the design-point engine."""
import math
from dataclasses import replace

import numpy as np
import pytest

from koopjet.config import P_REF, T_REF
from koopjet.errors import ConfigurationError, ConvergenceError, NumericalError
from koopjet.plant.atmosphere import Ambient, flight_speed, isa_inlet, isa_static
from koopjet.plant.components import (
    SurrogateMaps,
    combustor_exit_temp,
    critical_pressure_ratio,
    mean_cp,
    nozzle_eval,
)
from koopjet.plant.config import (
    DEFAULT_PLANT_CONFIG,
    CompressorMapConfig,
    EngineConstants,
    LimiterConfig,
    LossConfig,
    TurbineMapConfig,
    load_plant_config,
)
from koopjet.plant.engine import (
    clm_step,
    design_point,
    evaluate_cycle,
    fuel_lag_factor,
    operating_line,
    sea_level_static,
    steady_state,
)
from koopjet.plant.limiters import FuelLimiter, fuel_limiters

CONSTANTS = EngineConstants()


@pytest.fixture(scope="module")
def design():
    """Fixture providing the sized design point of the default engine."""
    return design_point(DEFAULT_PLANT_CONFIG)


@pytest.fixture
def unsized_maps() -> SurrogateMaps:
    """Fixture providing component maps scaled to the default design but without sizing."""
    return SurrogateMaps(
        compressor=CompressorMapConfig(),
        turbine=TurbineMapConfig(),
        losses=LossConfig(),
        N_design=14000.0,
        W_design=8.0,
        pi_design=4.2,
        beta_design=0.5,
    )


def _reference_ambient(theta: float = 1.0) -> Ambient:
    return Ambient(H=0.0, M0=0.0, p0=P_REF, T0=T_REF * theta, p1t=P_REF, T1t=T_REF * theta)


def test_isa_sea_level_and_tropopause():
    """Standard sea level and the 11 km temperature."""
    assert isa_static(0.0) == pytest.approx((101325.0, 288.15))
    p0, T0 = isa_static(11000.0)
    assert T0 == pytest.approx(216.65)
    assert p0 == pytest.approx(22632.0, rel=1e-3)


@pytest.mark.parametrize("H, M0", [(-1.0, 0.0), (11001.0, 0.0), (0.0, 1.0), (0.0, -0.1)])
def test_isa_inlet_rejects_envelope(H, M0):
    """Altitudes outside the troposphere and non-subsonic Mach numbers are rejected."""
    with pytest.raises(ValueError):
        isa_inlet(H, M0)


def test_isa_inlet_ram_rise():
    """Total temperature and pressure rise isentropically, then lose the intake recovery."""
    ambient = isa_inlet(3000.0, 0.8)
    assert ambient.T1t == pytest.approx(ambient.T0 * 1.128)
    assert ambient.p1t == pytest.approx(ambient.p0 * 1.128**3.5 * 0.98)
    assert flight_speed(ambient) == pytest.approx(0.8 * math.sqrt(1.4 * 287.0 * ambient.T0))
    assert flight_speed(isa_inlet(0.0, 0.0)) == 0.0


def test_static_inlet_only_loses_recovery():
    """At rest the inlet keeps the static temperature and loses two percent of pressure."""
    ambient = isa_inlet(0.0, 0.0)
    assert ambient.T1t == pytest.approx(288.15)
    assert ambient.delta == pytest.approx(0.98)


def test_compressor_map_design_point(unsized_maps):
    """At design speed and design beta the map returns the design flow, ratio and efficiency."""
    assert unsized_maps.compressor_map(0.5, 1.0) == pytest.approx((8.0, 4.2, 0.82))


def test_map_domain_errors(unsized_maps):
    """Non-positive speed and a turbine ratio of one leave the map domain."""
    with pytest.raises(NumericalError):
        unsized_maps.compressor_map(0.5, 0.0)
    with pytest.raises(NumericalError):
        unsized_maps.turbine_map(1.0, 1.0, 1.33)


def test_combustor_power_balance(unsized_maps):
    """The fixed point satisfies the power balance with the outlet-dependent heat capacity."""
    T_cc, p_cc, W_f, W_cc = 450.0, 4.0e5, 0.1, 8.0
    T_t = combustor_exit_temp(W_f, W_cc, T_cc, p_cc, unsized_maps, CONSTANTS)
    heat = unsized_maps.burner_efficiency(T_cc, p_cc, W_cc) * W_f * CONSTANTS.H_L / W_cc
    assert T_t == pytest.approx(T_cc + heat / mean_cp(T_cc, T_t, CONSTANTS), abs=0.01)
    assert T_t > T_cc


def test_combustor_edge_cases(unsized_maps):
    """No fuel leaves the temperature unchanged; negative fuel and exhausted iterations raise."""
    assert combustor_exit_temp(0.0, 8.0, 450.0, 4.0e5, unsized_maps, CONSTANTS) == 450.0
    with pytest.raises(ValueError):
        combustor_exit_temp(-0.01, 8.0, 450.0, 4.0e5, unsized_maps, CONSTANTS)
    with pytest.raises(ConvergenceError) as info:
        combustor_exit_temp(0.1, 8.0, 450.0, 4.0e5, unsized_maps, CONSTANTS, tol=0.0, max_iters=2)
    assert len(info.value.trace) == 2


def test_ideal_critical_pressure_ratio():
    """With a loss-free nozzle and consistent heat capacity the ideal sonic ratio results."""
    g = 1.33
    constants = EngineConstants(eta_n=1.0, C_pg=g * 287.0 / (g - 1.0))
    assert critical_pressure_ratio(constants) == pytest.approx(((g + 1.0) / 2.0) ** (g / (g - 1.0)))


def test_nozzle_branches():
    """Below the critical ratio the jet expands to ambient; above it the exit is sonic."""
    p0 = P_REF
    subsonic = nozzle_eval(900.0, 1.2 * p0, p0, 0.1, CONSTANTS)
    assert not subsonic.choked
    assert subsonic.p_out == p0
    choked = nozzle_eval(900.0, 3.0 * p0, p0, 0.1, CONSTANTS)
    assert choked.choked
    assert choked.p_out == pytest.approx(3.0 * p0 / critical_pressure_ratio(CONSTANTS))
    assert choked.gross_thrust(p0, 0.1) > choked.W_n * choked.v_n


def test_nozzle_velocity_continuous_at_choking():
    """Both velocity branches meet at the critical ratio."""
    pi_crit = critical_pressure_ratio(CONSTANTS)
    below = nozzle_eval(900.0, pi_crit * (1.0 - 1e-7) * P_REF, P_REF, 0.1, CONSTANTS)
    above = nozzle_eval(900.0, pi_crit * (1.0 + 1e-7) * P_REF, P_REF, 0.1, CONSTANTS)
    assert (below.choked, above.choked) == (False, True)
    assert below.v_n == pytest.approx(above.v_n, rel=1e-4)


def test_nozzle_rejects_reverse_flow():
    """A nozzle pressure below ambient is a numerical error."""
    with pytest.raises(NumericalError, match="below 1"):
        nozzle_eval(900.0, 0.9 * P_REF, P_REF, 0.1, CONSTANTS)


def test_fuel_lag_factor():
    """One time constant of lag delivers 1 - 1/e of a step."""
    assert fuel_lag_factor(0.1, 0.1) == pytest.approx(1.0 - math.exp(-1.0))
    assert fuel_lag_factor(0.01, 0.1) == pytest.approx(0.0951626, rel=1e-6)


@pytest.mark.parametrize("N_line, Wf_line", [
    ([5000.0], [0.1]),
    ([5000.0, 5000.0], [0.1, 0.2]),
    ([5000.0, 15000.0], [0.1]),
])
def test_limiter_rejects_bad_operating_line(N_line, Wf_line):
    """The operating line needs two or more increasing speeds with matching fuel flows."""
    with pytest.raises(ValueError):
        FuelLimiter(LimiterConfig(), np.array(N_line), np.array(Wf_line))


def test_limiter_clamps_to_schedule():
    """Commands outside the ratio band around the steady fuel flow are clamped and flagged."""
    limiter = FuelLimiter(LimiterConfig(), np.array([5000.0, 15000.0]), np.array([0.1, 0.5]))
    ambient = _reference_ambient()
    result = limiter.apply(5000.0, 1.0, ambient)
    assert (result.lower, result.upper) == pytest.approx((0.09, 0.2))
    assert result.v == pytest.approx(0.2)
    assert result.clamped
    assert not limiter.apply(5000.0, 0.15, ambient).clamped
    v, clamped = fuel_limiters(limiter, 5000.0, 0.0, ambient)
    assert v == pytest.approx(0.09)
    assert clamped


def test_limiter_uses_corrected_speed():
    """A hot inlet shifts the schedule to higher physical speed and scales it to physical flow."""
    limiter = FuelLimiter(LimiterConfig(), np.array([5000.0, 15000.0]), np.array([0.1, 0.5]))
    lower, upper = limiter.fuel_limits(10000.0, _reference_ambient(theta=4.0))
    assert (lower, upper) == pytest.approx((0.18, 0.4))


def test_limiter_config_validation():
    """Ratio tables must be consistent."""
    with pytest.raises(ValueError):
        LimiterConfig(decel_ratio=[2.0, 2.0, 2.0, 2.0])
    with pytest.raises(ValueError):
        LimiterConfig(N_points=[5000.0, 4000.0, 11000.0, 15000.0])


def test_load_plant_config(tmp_path):
    """The packaged engine loads; missing and malformed documents are configuration errors."""
    config = load_plant_config()
    assert (config.design.N, config.design.N_idle, config.design.N_max) == (14000.0, 5000.0, 15000.0)
    with pytest.raises(ConfigurationError, match="not found"):
        load_plant_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"constants": {"eta_m": 1.5}}')
    with pytest.raises(ConfigurationError, match="Invalid"):
        load_plant_config(bad)


def test_design_point_is_matched(design):
    """Evaluating the sized design point closes both mass balances and the power balance."""
    cycle = evaluate_cycle(
        design.N, design.W_f, design.beta_c, design.pi_t, sea_level_static(), design, DEFAULT_PLANT_CONFIG
    )
    assert abs(cycle.e_c) < 1e-3 * design.W_c
    assert abs(cycle.e_n) < 1e-3 * design.W_c
    assert abs(CONSTANTS.eta_m * cycle.P_t - cycle.P_c) < 1e-3 * cycle.P_c
    assert cycle.T_t == pytest.approx(design.T_t, abs=0.05)
    assert design.thrust > 0.0
    assert design.pi_t > 1.0


def test_infeasible_design_temperature():
    """A turbine inlet temperature below compressor delivery cannot be sized."""
    config = DEFAULT_PLANT_CONFIG.model_copy(
        update={"design": DEFAULT_PLANT_CONFIG.design.model_copy(update={"T_t": 400.0})}
    )
    with pytest.raises(ConfigurationError):
        design_point(config)


def test_steady_state_at_design_speed(design):
    """The equilibrium at design speed is the design point itself."""
    state = steady_state(design.N, sea_level_static(), design)
    assert state.W_f == pytest.approx(design.W_f, rel=1e-4)
    assert abs(state.dN_dt) < 1.0


def test_operating_line_rejects_unsorted_grid(design):
    """Speed grids must increase strictly."""
    with pytest.raises(ValueError):
        operating_line(np.array([9000.0, 8000.0]), sea_level_static(), design)


def test_clm_step_accelerates_on_more_fuel(design):
    """Holding trim fuel keeps the speed; extra fuel enters through the lag and accelerates the spool."""
    ambient = sea_level_static()
    trim = steady_state(design.N, ambient, design)
    held = clm_step(trim, trim.W_f, ambient, 0.01, design)
    assert held.N == pytest.approx(trim.N, abs=0.05)
    assert held.W_f == pytest.approx(trim.W_f)

    pushed = clm_step(trim, 1.01 * trim.W_f, ambient, 0.01, design)
    assert pushed.W_f == pytest.approx(trim.W_f * (1.0 + 0.01 * fuel_lag_factor(0.01, CONSTANTS.T_f)))
    assert pushed.dN_dt > held.dN_dt


def test_clm_step_rejects_nonphysical_speed(design):
    """A speed driven to zero is a numerical error."""
    trim = steady_state(design.N, sea_level_static(), design)
    with pytest.raises(NumericalError):
        clm_step(replace(trim, dN_dt=-2.0 * trim.N / 0.01), trim.W_f, sea_level_static(), 0.01, design)
