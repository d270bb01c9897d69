"""Component-level engine model: design sizing, mass-flow matching and transient stepping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from koopjet.config import T_REF
from koopjet.errors import ConfigurationError, ConvergenceError, NumericalError
from koopjet.plant.atmosphere import Ambient, flight_speed, isa_inlet
from koopjet.plant.components import (
    NozzleFlow,
    SurrogateMaps,
    combustor_exit_temp,
    compressor_exit_temp,
    compressor_power,
    mean_cp,
    nozzle_eval,
    turbine_power,
)
from koopjet.plant.config import DEFAULT_PLANT_CONFIG, PlantConfig
from koopjet.plant.limiters import FuelLimiter, LimiterResult

logger = logging.getLogger(__name__)

CONTINUATION_STEP: float = 500.0  # RPM per steady-state continuation step
SPEED_FACTOR: float = (30.0 / math.pi) ** 2  # RPM conversion of the shaft equation


@dataclass(frozen=True)
class DesignPoint:
    """Sea-level static design point and the map scaling sized from it."""

    N: float
    beta_c: float
    pi_t: float
    W_f: float
    W_c: float
    T_t: float
    thrust: float  # F_DP, N
    A_n: float  # m^2
    maps: SurrogateMaps


@dataclass(frozen=True)
class CycleResult:
    """Every station quantity of one engine evaluation at fixed (N, W_f, beta_c, pi_t)."""

    W_c: float
    pi_c: float
    T_cc: float
    p_cc: float
    T_t: float
    p_t: float
    W_t: float  # turbine map flow
    T_n: float
    p_n: float
    nozzle: NozzleFlow
    P_c: float
    P_t: float
    thrust: float
    e_c: float  # compressor-turbine mass-flow error
    e_n: float  # turbine-nozzle mass-flow error


@dataclass(frozen=True)
class PlantState:
    """Matched engine state with its derived outputs."""

    N: float  # RPM
    W_f: float  # kg/s
    beta_c: float
    pi_t: float
    thrust: float = 0.0  # N
    T_t: float = 0.0  # K
    W_c: float = 0.0  # kg/s
    dN_dt: float = 0.0  # RPM/s


@dataclass(frozen=True)
class MatchResult:
    beta_c: float
    pi_t: float
    cycle: CycleResult
    iterations: int
    trace: list[float]


def evaluate_cycle(
    N: float,
    W_f: float,
    beta_c: float,
    pi_t: float,
    ambient: Ambient,
    design: DesignPoint,
    config: PlantConfig,
) -> CycleResult:
    """Evaluate compressor, combustor, turbine and nozzle in sequence.

    Raises:
        NumericalError: If the guess leaves the physical domain of a component.
    """
    maps: SurrogateMaps = design.maps
    constants = config.constants
    sqrt_theta: float = math.sqrt(ambient.theta)

    W_corr, pi_c, eta_c = maps.compressor_map(beta_c, N / sqrt_theta / maps.N_design)
    W_c: float = W_corr * ambient.delta / sqrt_theta
    if W_c <= 0.0:
        raise NumericalError(f"Compressor flow is not positive at beta_c={beta_c:.4g}.")
    T_cc: float = compressor_exit_temp(ambient.T1t, pi_c, eta_c, constants.gamma_a)
    p_cc: float = ambient.p1t * pi_c
    P_c: float = compressor_power(W_c, ambient.T1t, pi_c, eta_c, constants)

    T_t: float = combustor_exit_temp(
        W_f,
        W_c,
        T_cc,
        p_cc,
        maps,
        constants,
        tol=config.solver.combustor_tolerance,
        max_iters=config.solver.combustor_max_iters,
    )
    p_t: float = p_cc * maps.cc_pressure_recovery(W_c, T_cc, p_cc)

    sqrt_T_t: float = math.sqrt(T_t)
    Wt_corr, dT_T = maps.turbine_map(N / sqrt_T_t / maps.turbine_speed_ref, pi_t, constants.gamma_g)
    W_t: float = Wt_corr * p_t / sqrt_T_t
    P_t: float = turbine_power(W_t, T_t, dT_T, constants)

    T_n: float = T_t * (1.0 - dT_T)
    p_n: float = p_t / pi_t * config.losses.sigma_exhaust
    nozzle: NozzleFlow = nozzle_eval(T_n, p_n, ambient.p0, design.A_n, constants)
    ram_drag: float = W_c * flight_speed(ambient, constants.gamma_a, constants.R)

    return CycleResult(
        W_c=W_c,
        pi_c=pi_c,
        T_cc=T_cc,
        p_cc=p_cc,
        T_t=T_t,
        p_t=p_t,
        W_t=W_t,
        T_n=T_n,
        p_n=p_n,
        nozzle=nozzle,
        P_c=P_c,
        P_t=P_t,
        thrust=nozzle.gross_thrust(ambient.p0, design.A_n) - ram_drag,
        e_c=W_t - (W_c + W_f),
        e_n=nozzle.W_n - W_t,
    )


def shaft_acceleration(cycle: CycleResult, N: float, config: PlantConfig) -> float:
    """dN/dt in RPM/s from the shaft power balance."""
    constants = config.constants
    return SPEED_FACTOR * (constants.eta_m * cycle.P_t - cycle.P_c) / (constants.I * N)


def sea_level_static(config: PlantConfig = DEFAULT_PLANT_CONFIG) -> Ambient:
    return isa_inlet(0.0, 0.0, config.constants.gamma_a, config.losses.sigma_inlet)


def design_point(config: PlantConfig = DEFAULT_PLANT_CONFIG) -> DesignPoint:
    """Size turbine flow capacity and nozzle area so the design point is an exact match.

    At sea-level static conditions, design speed and design beta_c, the
    compressor delivers the design corrected flow and pressure ratio. Fuel
    flow follows from the design turbine inlet temperature, the turbine
    pressure ratio from zero net shaft power, and the nozzle area from
    turbine-nozzle continuity.

    Raises:
        ConfigurationError: If the design point is thermodynamically infeasible.
    """
    constants = config.constants
    dp = config.design
    ambient: Ambient = sea_level_static(config)
    sqrt_theta: float = math.sqrt(ambient.theta)

    maps: SurrogateMaps = SurrogateMaps(
        compressor=config.compressor,
        turbine=config.turbine,
        losses=config.losses,
        N_design=dp.N / sqrt_theta,
        W_design=dp.W,
        pi_design=dp.pi_c,
        beta_design=dp.beta_c,
    )
    W_corr, pi_c, eta_c = maps.compressor_map(dp.beta_c, 1.0)
    W_c: float = W_corr * ambient.delta / sqrt_theta
    T_cc: float = compressor_exit_temp(ambient.T1t, pi_c, eta_c, constants.gamma_a)
    p_cc: float = ambient.p1t * pi_c
    P_c: float = compressor_power(W_c, ambient.T1t, pi_c, eta_c, constants)
    if dp.T_t <= T_cc:
        raise ConfigurationError(f"Design turbine inlet temperature {dp.T_t} K is below compressor exit {T_cc:.1f} K.")

    maps = replace(
        maps,
        omega_ref=maps.loading_parameter(T_cc, p_cc, W_c),
        cc_flow_param_ref=W_c * math.sqrt(T_cc) / p_cc,
    )
    eta_b: float = maps.burner_efficiency(T_cc, p_cc, W_c)
    W_f: float = W_c * mean_cp(T_cc, dp.T_t, constants) * (dp.T_t - T_cc) / (eta_b * constants.H_L)
    W_gas: float = W_c + W_f
    p_t: float = p_cc * maps.cc_pressure_recovery(W_c, T_cc, p_cc)

    dT_T: float = P_c / (constants.eta_m * W_gas * constants.C_pg * dp.T_t)
    eta_t: float = config.turbine.eta_design
    if dT_T >= eta_t:
        raise ConfigurationError(f"Turbine cannot drive the compressor: required dT/T {dT_T:.3f} >= eta_t {eta_t}.")
    g: float = constants.gamma_g
    pi_t: float = (1.0 - dT_T / eta_t) ** (-g / (g - 1.0))
    maps = replace(
        maps,
        turbine_speed_ref=dp.N / math.sqrt(dp.T_t),
        K_t=W_gas * math.sqrt(dp.T_t) / p_t / math.sqrt(1.0 - pi_t**-2),
    )

    T_n: float = dp.T_t * (1.0 - dT_T)
    p_n: float = p_t / pi_t * config.losses.sigma_exhaust
    if p_n <= ambient.p0:
        raise ConfigurationError(f"Design nozzle pressure {p_n:.0f} Pa does not exceed ambient {ambient.p0:.0f} Pa.")
    A_n: float = W_gas / nozzle_eval(T_n, p_n, ambient.p0, 1.0, constants).W_n
    thrust: float = nozzle_eval(T_n, p_n, ambient.p0, A_n, constants).gross_thrust(ambient.p0, A_n)

    logger.debug(
        "Design point: W_f=%.4f kg/s pi_t=%.3f A_n=%.4f m2 F=%.0f N", W_f, pi_t, A_n, thrust
    )
    return DesignPoint(
        N=dp.N, beta_c=dp.beta_c, pi_t=pi_t, W_f=W_f, W_c=W_c, T_t=dp.T_t, thrust=thrust, A_n=A_n, maps=maps
    )


def _newton(
    residual: Callable[[np.ndarray], tuple[np.ndarray, CycleResult]],
    x0: np.ndarray,
    in_domain: Callable[[np.ndarray], bool],
    perturbation: np.ndarray,
    tol: float,
    max_iters: int,
    label: str,
) -> tuple[np.ndarray, CycleResult, int, list[float]]:
    """Damped Newton-Raphson with a forward-difference Jacobian.

    Steps that leave the domain or fail to reduce the residual are halved.
    """
    x: np.ndarray = np.asarray(x0, dtype=float).copy()
    if not in_domain(x):
        raise ConvergenceError(f"{label}: initial guess {x.tolist()} is outside the map domain.")
    try:
        e, cycle = residual(x)
    except NumericalError as err:
        raise ConvergenceError(f"{label}: initial guess {x.tolist()} is not evaluable ({err}).") from err
    trace: list[float] = [float(np.max(np.abs(e)))]

    for iteration in range(max_iters):
        if trace[-1] <= tol:
            return x, cycle, iteration, trace

        jac: np.ndarray = np.empty((len(x), len(x)))
        for j in range(len(x)):
            h: float = float(perturbation[j])
            x_p: np.ndarray = x.copy()
            x_p[j] += h
            if not in_domain(x_p):
                h = -h
                x_p[j] = x[j] + h
            try:
                e_p, _ = residual(x_p)
            except NumericalError:
                h = -h
                x_p[j] = x[j] + h
                try:
                    e_p, _ = residual(x_p)
                except NumericalError as err:
                    raise ConvergenceError(
                        f"{label}: Jacobian not evaluable at iteration {iteration} ({err}).", trace=trace
                    ) from err
            jac[:, j] = (e_p - e) / h
        try:
            dx: np.ndarray = np.linalg.solve(jac, -e)
        except np.linalg.LinAlgError as err:
            raise ConvergenceError(f"{label}: singular Jacobian at iteration {iteration}.", trace=trace) from err

        alpha: float = 1.0
        accepted: bool = False
        for _ in range(12):
            candidate: np.ndarray = x + alpha * dx
            if in_domain(candidate):
                try:
                    e_c, cycle_c = residual(candidate)
                except NumericalError:
                    e_c = None
                if e_c is not None and np.all(np.isfinite(e_c)):
                    norm_c: float = float(np.max(np.abs(e_c)))
                    if norm_c < trace[-1] or alpha < 1.0 / 64.0:
                        x, e, cycle = candidate, e_c, cycle_c
                        trace.append(norm_c)
                        accepted = True
                        break
            alpha *= 0.5
        if not accepted:
            raise ConvergenceError(f"{label}: no admissible step at iteration {iteration}.", trace=trace)

    if trace[-1] <= tol:
        return x, cycle, max_iters, trace
    raise ConvergenceError(
        f"{label}: no convergence after {max_iters} iterations (residual {trace[-1]:.3e} kg/s).", trace=trace
    )


def _map_domain(config: PlantConfig) -> Callable[[float, float], bool]:
    beta_lo, beta_hi = config.compressor.beta_range
    pi_lo, pi_hi = config.turbine.pi_range

    def inside(beta_c: float, pi_t: float) -> bool:
        return beta_lo <= beta_c <= beta_hi and pi_lo <= pi_t <= pi_hi

    return inside


def nr_match(
    N: float,
    W_f: float,
    ambient: Ambient,
    design: DesignPoint,
    config: PlantConfig,
    guess: tuple[float, float],
) -> MatchResult:
    """Find (beta_c, pi_t) that zero both mass-flow errors at fixed speed and fuel flow.

    Args:
        N: Physical spool speed, RPM.
        W_f: Delivered fuel flow, kg/s.
        ambient: Inlet conditions.
        design: Sized design point.
        config: Engine configuration.
        guess: Starting (beta_c, pi_t), usually the previous step's solution.

    Raises:
        ConvergenceError: On divergence, domain exit or iteration exhaustion;
            carries the residual trace.
    """
    inside = _map_domain(config)

    def residual(x: np.ndarray) -> tuple[np.ndarray, CycleResult]:
        cycle: CycleResult = evaluate_cycle(N, W_f, x[0], x[1], ambient, design, config)
        return np.array([cycle.e_c, cycle.e_n]), cycle

    solver = config.solver
    x, cycle, iterations, trace = _newton(
        residual,
        np.array(guess, dtype=float),
        lambda x: inside(x[0], x[1]),
        np.full(2, solver.perturbation),
        solver.tolerance * design.W_c,
        solver.max_iters,
        label=f"Matching at N={N:.1f} RPM, W_f={W_f:.5f} kg/s",
    )
    return MatchResult(beta_c=float(x[0]), pi_t=float(x[1]), cycle=cycle, iterations=iterations, trace=trace)


def _state_from(N: float, W_f: float, beta_c: float, pi_t: float, cycle: CycleResult, config: PlantConfig) -> PlantState:
    return PlantState(
        N=N,
        W_f=W_f,
        beta_c=beta_c,
        pi_t=pi_t,
        thrust=cycle.thrust,
        T_t=cycle.T_t,
        W_c=cycle.W_c,
        dN_dt=shaft_acceleration(cycle, N, config),
    )


def _solve_steady(
    N: float, ambient: Ambient, design: DesignPoint, config: PlantConfig, guess: np.ndarray
) -> tuple[np.ndarray, CycleResult]:
    inside = _map_domain(config)
    power_scale: float = config.constants.C_pa * T_REF
    eta_m: float = config.constants.eta_m

    def residual(x: np.ndarray) -> tuple[np.ndarray, CycleResult]:
        cycle: CycleResult = evaluate_cycle(N, x[2], x[0], x[1], ambient, design, config)
        return np.array([cycle.e_c, cycle.e_n, (eta_m * cycle.P_t - cycle.P_c) / power_scale]), cycle

    solver = config.solver
    x, cycle, _, _ = _newton(
        residual,
        guess,
        lambda x: inside(x[0], x[1]) and x[2] > 0.0,
        np.array([solver.perturbation, solver.perturbation, solver.perturbation * design.W_f]),
        solver.tolerance * design.W_c,
        solver.max_iters,
        label=f"Steady state at N={N:.1f} RPM",
    )
    return x, cycle


def _continue_steady(
    N_from: float,
    x_from: np.ndarray,
    N_to: float,
    ambient: Ambient,
    design: DesignPoint,
    config: PlantConfig,
) -> tuple[np.ndarray, CycleResult]:
    steps: int = max(1, int(math.ceil(abs(N_to - N_from) / CONTINUATION_STEP)))
    x: np.ndarray = np.asarray(x_from, dtype=float)
    cycle: CycleResult | None = None
    for N_k in np.linspace(N_from, N_to, steps + 1)[1:]:
        x, cycle = _solve_steady(float(N_k), ambient, design, config, x)
    return x, cycle


def _design_guess(ambient: Ambient, design: DesignPoint, config: PlantConfig) -> tuple[float, np.ndarray]:
    """Speed with the design corrected speed at `ambient` and the scaled design solution there."""
    reference: Ambient = sea_level_static(config)
    temp_ratio: float = ambient.theta / reference.theta
    N_start: float = design.N * math.sqrt(temp_ratio)
    W_f: float = design.W_f * (ambient.delta / reference.delta) * math.sqrt(temp_ratio)
    return N_start, np.array([design.beta_c, design.pi_t, W_f])


def steady_state(
    N: float,
    ambient: Ambient,
    design: DesignPoint,
    config: PlantConfig = DEFAULT_PLANT_CONFIG,
) -> PlantState:
    """Equilibrium (zero net shaft power) at physical speed N.

    Solved for (beta_c, pi_t, W_f) by continuation in speed from the design
    point, so no initial guess is needed.
    """
    N_start, x0 = _design_guess(ambient, design, config)
    x, cycle = _solve_steady(N_start, ambient, design, config, x0)
    x, cycle = _continue_steady(N_start, x, N, ambient, design, config)
    return _state_from(N, float(x[2]), float(x[0]), float(x[1]), cycle, config)


def operating_line(
    N_grid: np.ndarray,
    ambient: Ambient,
    design: DesignPoint,
    config: PlantConfig = DEFAULT_PLANT_CONFIG,
) -> list[PlantState]:
    """Steady states along an increasing speed grid, each continued from its neighbour."""
    N_grid = np.asarray(N_grid, dtype=float)
    if N_grid.size == 0 or np.any(np.diff(N_grid) <= 0.0):
        raise ValueError("Speed grid must be non-empty and strictly increasing.")
    N_prev, x = _design_guess(ambient, design, config)
    x, _ = _solve_steady(N_prev, ambient, design, config, x)
    states: list[PlantState] = []
    for N_k in N_grid:
        x, cycle = _continue_steady(N_prev, x, float(N_k), ambient, design, config)
        states.append(_state_from(float(N_k), float(x[2]), float(x[0]), float(x[1]), cycle, config))
        N_prev = float(N_k)
    return states


def fuel_lag_factor(dt: float, T_f: float) -> float:
    """Exact zero-order-hold discretization gain of 1 / (T_f s + 1)."""
    return 1.0 - math.exp(-dt / T_f)


def clm_step(
    state: PlantState,
    v_cmd: float,
    ambient: Ambient,
    dt: float,
    design: DesignPoint,
    config: PlantConfig = DEFAULT_PLANT_CONFIG,
) -> PlantState:
    """Advance spool speed and delivered fuel flow by one sampling period.

    The fuel lag is discretized exactly; spool speed uses explicit Euler with
    the acceleration of the matched current state, or classical RK4 with the
    analytic fuel trajectory inside the step when the solver asks for it.

    Raises:
        ConvergenceError: Propagated from matching.
    """
    T_f: float = config.constants.T_f
    W_next: float = state.W_f + fuel_lag_factor(dt, T_f) * (v_cmd - state.W_f)
    guess: tuple[float, float] = (state.beta_c, state.pi_t)

    if config.solver.integrator == "rk4":

        def acceleration(N: float, W_f: float) -> float:
            match: MatchResult = nr_match(N, W_f, ambient, design, config, guess)
            return shaft_acceleration(match.cycle, N, config)

        W_half: float = state.W_f + fuel_lag_factor(0.5 * dt, T_f) * (v_cmd - state.W_f)
        k1: float = state.dN_dt
        k2: float = acceleration(state.N + 0.5 * dt * k1, W_half)
        k3: float = acceleration(state.N + 0.5 * dt * k2, W_half)
        k4: float = acceleration(state.N + dt * k3, W_next)
        N_next: float = state.N + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        N_next = state.N + dt * state.dN_dt

    if not math.isfinite(N_next) or N_next <= 0.0:
        raise NumericalError(f"Spool speed left the physical range: {N_next}.")
    match = nr_match(N_next, W_next, ambient, design, config, guess)
    return _state_from(N_next, W_next, match.beta_c, match.pi_t, match.cycle, config)


class Plant:
    """Reference engine: sized design point, fuel limiter and transient stepping."""

    def __init__(self, config: PlantConfig = DEFAULT_PLANT_CONFIG) -> None:
        self._config: PlantConfig = config
        self._design: DesignPoint = design_point(config)
        self._reference: Ambient = sea_level_static(config)

        dp = config.design
        sqrt_theta: float = math.sqrt(self._reference.theta)
        N_corr: np.ndarray = np.linspace(dp.N_idle, dp.N_max, config.limiters.line_points)
        line: list[PlantState] = operating_line(N_corr * sqrt_theta, self._reference, self._design, config)
        Wf_corr: np.ndarray = np.array([s.W_f for s in line]) / (self._reference.delta * sqrt_theta)
        self._limiter: FuelLimiter = FuelLimiter(config.limiters, N_corr, Wf_corr)
        logger.info(
            "Plant sized: design W_f=%.4f kg/s, idle W_f=%.4f kg/s, F_DP=%.0f N",
            self._design.W_f,
            line[0].W_f,
            self._design.thrust,
        )

    @property
    def config(self) -> PlantConfig:
        return self._config

    @property
    def design(self) -> DesignPoint:
        return self._design

    @property
    def limiter(self) -> FuelLimiter:
        return self._limiter

    def ambient(self, H: float = 0.0, M0: float = 0.0) -> Ambient:
        return isa_inlet(H, M0, self._config.constants.gamma_a, self._config.losses.sigma_inlet)

    def trim(self, N: float, ambient: Ambient | None = None) -> PlantState:
        """Steady state at physical speed N."""
        return steady_state(N, ambient or self._reference, self._design, self._config)

    def match(self, state: PlantState, ambient: Ambient) -> PlantState:
        """Re-match a state under new inlet conditions, keeping N and W_f."""
        result: MatchResult = nr_match(
            state.N, state.W_f, ambient, self._design, self._config, (state.beta_c, state.pi_t)
        )
        return _state_from(state.N, state.W_f, result.beta_c, result.pi_t, result.cycle, self._config)

    def step(self, state: PlantState, v_cmd: float, ambient: Ambient, dt: float) -> tuple[PlantState, LimiterResult]:
        """Limit the command, then advance the engine by dt."""
        limited: LimiterResult = self._limiter.apply(state.N, v_cmd, ambient)
        return clm_step(state, limited.v, ambient, dt, self._design, self._config), limited
