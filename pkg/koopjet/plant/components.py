"""Analytic component maps and the thermodynamic relations of each engine component.

The maps are smooth surrogates parameterized by the design point: compressor
pressure ratio, corrected flow and efficiency over (beta_c, corrected speed),
an ellipse-law turbine with choking flow saturation, burner efficiency over
the combustor loading parameter, and flow-parameter pressure losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from koopjet.config import T_REF
from koopjet.errors import ConvergenceError, NumericalError
from koopjet.plant.config import CompressorMapConfig, EngineConstants, LossConfig, TurbineMapConfig

OMEGA_PRESSURE_EXPONENT: float = 1.8
CC_LOSS_CAP: float = 0.3


@dataclass(frozen=True)
class SurrogateMaps:
    """Component maps scaled to one design point.

    `K_t`, `omega_ref` and `cc_flow_param_ref` are sized by the design-point
    calculation; the defaults only make an unsized instance usable in isolation.
    """

    compressor: CompressorMapConfig
    turbine: TurbineMapConfig
    losses: LossConfig
    N_design: float  # RPM, corrected
    W_design: float  # kg/s, corrected
    pi_design: float
    beta_design: float
    turbine_speed_ref: float = 1.0  # N / sqrt(T_t) at design
    K_t: float = 1.0
    omega_ref: float = 1.0
    cc_flow_param_ref: float = 1.0

    def compressor_map(self, beta_c: float, n_c: float) -> tuple[float, float, float]:
        """Corrected flow, pressure ratio and efficiency at relative corrected speed `n_c`."""
        if n_c <= 0.0:
            raise NumericalError(f"Relative corrected speed must be positive, got {n_c:.4g}.")
        cfg: CompressorMapConfig = self.compressor
        db: float = beta_c - self.beta_design
        shape: float = 1.0 + cfg.pi_beta_slope * db
        pi_c: float = 1.0 + (self.pi_design - 1.0) * n_c**cfg.pi_speed_exponent * shape
        W_corr: float = self.W_design * n_c**cfg.flow_speed_exponent * (1.0 - cfg.flow_beta_slope * db)
        eta_c: float = cfg.eta_design * (
            1.0 - cfg.eta_speed_curvature * (n_c - 1.0) ** 2 - cfg.eta_beta_curvature * db**2
        )
        return W_corr, pi_c, max(eta_c, cfg.eta_floor)

    def turbine_map(self, n_t: float, pi_t: float, gamma_g: float) -> tuple[float, float]:
        """Corrected gas flow and relative temperature drop at relative corrected speed `n_t`."""
        if pi_t <= 1.0:
            raise NumericalError(f"Turbine pressure ratio must exceed 1, got {pi_t:.6g}.")
        cfg: TurbineMapConfig = self.turbine
        flow_shape: float = math.sqrt(1.0 - pi_t**-2)
        W_corr: float = self.K_t * (1.0 + cfg.flow_speed_slope * (n_t - 1.0)) * flow_shape
        eta_t: float = max(cfg.eta_design * (1.0 - cfg.eta_speed_curvature * (n_t - 1.0) ** 2), cfg.eta_floor)
        dT_T: float = eta_t * (1.0 - pi_t ** ((1.0 - gamma_g) / gamma_g))
        return W_corr, dT_T

    def loading_parameter(self, T_cc: float, p_cc: float, W_cc: float) -> float:
        """Combustor loading parameter; larger values mean harder burning conditions."""
        return W_cc / (p_cc**OMEGA_PRESSURE_EXPONENT * math.exp(T_cc / self.losses.omega_temperature))

    def burner_efficiency(self, T_cc: float, p_cc: float, W_cc: float) -> float:
        losses: LossConfig = self.losses
        ratio: float = self.loading_parameter(T_cc, p_cc, W_cc) / self.omega_ref
        eta_b: float = losses.eta_b_max - (losses.eta_b_max - losses.eta_b_design) * ratio
        return min(max(eta_b, losses.eta_b_floor), losses.eta_b_max)

    def cc_pressure_recovery(self, W_cc: float, T_cc: float, p_cc: float) -> float:
        """Combustor total-pressure recovery from the inlet flow parameter."""
        flow_param: float = W_cc * math.sqrt(T_cc) / p_cc
        loss: float = self.losses.cc_loss_design * (flow_param / self.cc_flow_param_ref) ** 2
        return 1.0 - min(loss, CC_LOSS_CAP)


def compressor_exit_temp(T_in: float, pi_c: float, eta_c: float, gamma_a: float) -> float:
    """Total temperature after compression."""
    return T_in * (1.0 + (pi_c ** ((gamma_a - 1.0) / gamma_a) - 1.0) / eta_c)


def compressor_power(W_c: float, T_in: float, pi_c: float, eta_c: float, constants: EngineConstants) -> float:
    """Shaft power absorbed by the compressor, W."""
    k: float = (constants.gamma_a - 1.0) / constants.gamma_a
    return W_c * constants.C_pa * T_in * (pi_c**k - 1.0) / eta_c


def turbine_power(W_t: float, T_t: float, dT_T: float, constants: EngineConstants) -> float:
    """Shaft power delivered by the turbine, W."""
    return W_t * constants.C_pg * T_t * dT_T


def mean_cp(T_in: float, T_out: float, constants: EngineConstants) -> float:
    """Mean heat capacity of the combustor gases between inlet and outlet temperature."""
    return constants.C_pa + constants.cp_slope * (0.5 * (T_in + T_out) - T_REF)


def combustor_exit_temp(
    W_f: float,
    W_cc: float,
    T_cc: float,
    p_cc: float,
    maps: SurrogateMaps,
    constants: EngineConstants,
    tol: float = 0.01,
    max_iters: int = 100,
) -> float:
    """Turbine inlet temperature from the combustor power balance.

    The mean heat capacity depends on the unknown outlet temperature, so the
    balance is solved by fixed-point iteration.

    Raises:
        ValueError: For negative fuel flow or non-positive air flow.
        ConvergenceError: If the iteration does not settle within `max_iters`.
    """
    if W_f < 0.0:
        raise ValueError(f"Fuel flow must be non-negative, got {W_f}.")
    if W_cc <= 0.0:
        raise ValueError(f"Combustor air flow must be positive, got {W_cc}.")
    if W_f == 0.0:
        return T_cc

    heat: float = maps.burner_efficiency(T_cc, p_cc, W_cc) * W_f * constants.H_L / W_cc
    T_t: float = T_cc + heat / mean_cp(T_cc, T_cc, constants)
    trace: list[float] = []
    for _ in range(max_iters):
        T_next: float = T_cc + heat / mean_cp(T_cc, T_t, constants)
        step: float = abs(T_next - T_t)
        T_t = T_next
        trace.append(step)
        if step <= tol:
            return T_t
    raise ConvergenceError(
        f"Combustor temperature did not converge in {max_iters} iterations (last change {trace[-1]:.3g} K).",
        trace=trace,
    )


@dataclass(frozen=True)
class NozzleFlow:
    """Exhaust nozzle operating point."""

    v_n: float  # m/s
    W_n: float  # kg/s
    p_out: float  # Pa, static pressure at the exit plane
    choked: bool

    def gross_thrust(self, p0: float, A_n: float) -> float:
        """Momentum plus pressure thrust, N."""
        return self.W_n * self.v_n + (self.p_out - p0) * A_n


def critical_pressure_ratio(constants: EngineConstants) -> float:
    """Nozzle pressure ratio at which the exit flow becomes sonic.

    Defined so both velocity branches meet; with eta_n = 1 and C_pg = gamma R / (gamma - 1)
    it is the ideal ((gamma + 1) / 2)^(gamma / (gamma - 1)).
    """
    g: float = constants.gamma_g
    drop: float = g * constants.R / ((g + 1.0) * constants.eta_n * constants.C_pg)
    return (1.0 - drop) ** (-g / (g - 1.0))


def nozzle_eval(T_n: float, p_n: float, p0: float, A_n: float, constants: EngineConstants) -> NozzleFlow:
    """Exit velocity, mass flow and exit static pressure of the convergent nozzle.

    Raises:
        NumericalError: If the nozzle total pressure is below ambient or T_n is not positive.
    """
    if T_n <= 0.0:
        raise NumericalError(f"Nozzle total temperature must be positive, got {T_n:.4g} K.")
    pi_n: float = p_n / p0
    if pi_n < 1.0:
        raise NumericalError(f"Nozzle pressure ratio {pi_n:.6g} is below 1; upstream state is inconsistent.")
    g: float = constants.gamma_g
    pi_crit: float = critical_pressure_ratio(constants)
    choked: bool = pi_n >= pi_crit
    pi_exit: float = pi_crit if choked else pi_n

    expansion: float = 1.0 - pi_exit ** ((1.0 - g) / g)
    if choked:
        v_n: float = math.sqrt(2.0 * g / (g + 1.0) * constants.R * T_n)
        p_out: float = p_n / pi_crit
    else:
        v_n = math.sqrt(2.0 * constants.C_pg * T_n * expansion * constants.eta_n)
        p_out = p0
    static_ratio: float = 1.0 - constants.eta_n * expansion
    W_n: float = constants.mu_n * v_n * p_n / (constants.R * T_n) * static_ratio ** (1.0 / (g - 1.0)) * A_n
    return NozzleFlow(v_n=v_n, W_n=W_n, p_out=p_out, choked=choked)
