"""Typed configuration of the component-level engine model."""

from __future__ import annotations

import json
import logging
from pathlib import Path

from pydantic import BaseModel, ValidationError, field_validator, model_validator

from koopjet.errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_ENGINE_PATH: Path = Path(__file__).with_name("default_engine.json")


class EngineConstants(BaseModel):
    """Physical constants of the engine and its fuel system."""

    I: float = 0.6  # kg m^2, spool polar moment of inertia
    eta_m: float = 0.99
    H_L: float = 43.0e6  # J/kg, fuel lower heating value
    C_pa: float = 1005.0  # J/(kg K)
    C_pg: float = 1156.7  # J/(kg K), consistent with gamma_g and R
    cp_slope: float = 0.12  # J/(kg K^2), temperature slope of the combustor mean heat capacity
    gamma_a: float = 1.4
    gamma_g: float = 1.33
    R: float = 287.0  # J/(kg K)
    mu_n: float = 0.98
    eta_n: float = 0.98
    T_f: float = 0.1  # s, fuel-system time constant

    @model_validator(mode="after")
    def _check(self) -> EngineConstants:
        for name in ("I", "H_L", "C_pa", "C_pg", "R", "T_f", "gamma_a", "gamma_g"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive.")
        for name in ("eta_m", "eta_n", "mu_n"):
            value: float = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {value}.")
        if self.cp_slope < 0.0:
            raise ValueError("cp_slope must be non-negative.")
        return self


class DesignPointConfig(BaseModel):
    """Sea-level static design point used to size the turbine and nozzle."""

    N: float = 14000.0  # RPM
    N_idle: float = 5000.0  # RPM, ground idle
    N_max: float = 15000.0  # RPM, top of the normalized range
    W: float = 8.0  # kg/s, corrected compressor flow
    pi_c: float = 4.2
    T_t: float = 1150.0  # K, turbine inlet temperature
    beta_c: float = 0.5

    @model_validator(mode="after")
    def _check(self) -> DesignPointConfig:
        if not 0.0 < self.N_idle < self.N <= self.N_max:
            raise ValueError("Need 0 < N_idle < N <= N_max.")
        if self.pi_c <= 1.0:
            raise ValueError(f"Design pressure ratio must exceed 1, got {self.pi_c}.")
        if self.W <= 0.0 or self.T_t <= 0.0:
            raise ValueError("Design flow and temperature must be positive.")
        return self


class CompressorMapConfig(BaseModel):
    """Shape parameters of the analytic compressor map."""

    pi_speed_exponent: float = 1.8
    pi_beta_slope: float = 0.4  # s(beta) = 1 + slope (beta - 0.5)
    flow_speed_exponent: float = 1.2
    flow_beta_slope: float = 0.2  # W factor = 1 - slope (beta - 0.5)
    eta_design: float = 0.82
    eta_speed_curvature: float = 0.3
    eta_beta_curvature: float = 0.15
    eta_floor: float = 0.3
    beta_range: tuple[float, float] = (-1.5, 2.5)


class TurbineMapConfig(BaseModel):
    """Shape parameters of the analytic turbine map."""

    eta_design: float = 0.85
    eta_speed_curvature: float = 0.2
    eta_floor: float = 0.4
    flow_speed_slope: float = 0.05
    pi_range: tuple[float, float] = (1.0005, 6.0)


class LossConfig(BaseModel):
    """Pressure-loss and burner-efficiency parameters."""

    sigma_inlet: float = 0.98
    cc_loss_design: float = 0.05  # 1 - sigma_cc at design flow parameter
    sigma_exhaust: float = 0.98
    eta_b_max: float = 0.995
    eta_b_design: float = 0.98
    eta_b_floor: float = 0.7
    omega_temperature: float = 300.0  # K, temperature scale of the loading parameter

    @field_validator("sigma_inlet", "sigma_exhaust")
    @classmethod
    def _check_sigma(cls, value: float) -> float:
        if not 0.0 < value <= 1.0:
            raise ValueError(f"Pressure recovery must lie in (0, 1], got {value}.")
        return value


class LimiterConfig(BaseModel):
    """Fuel limits as ratios of the steady operating line, tabulated over corrected speed."""

    N_points: list[float] = [5000.0, 8000.0, 11000.0, 15000.0]
    accel_ratio: list[float] = [2.0, 1.8, 1.6, 1.5]
    decel_ratio: list[float] = [0.9, 0.6, 0.5, 0.5]
    line_points: int = 21  # operating-line grid size

    @model_validator(mode="after")
    def _check(self) -> LimiterConfig:
        n: int = len(self.N_points)
        if n < 2 or len(self.accel_ratio) != n or len(self.decel_ratio) != n:
            raise ValueError("Limiter tables need at least two points and equal lengths.")
        if any(b <= a for a, b in zip(self.N_points, self.N_points[1:])):
            raise ValueError("Limiter speed points must be strictly increasing.")
        if any(lo >= hi for lo, hi in zip(self.decel_ratio, self.accel_ratio)):
            raise ValueError("Deceleration ratios must stay below acceleration ratios.")
        if any(r <= 0.0 for r in self.decel_ratio):
            raise ValueError("Limiter ratios must be positive.")
        return self


class SolverConfig(BaseModel):
    """Newton-Raphson matching and shaft integration settings."""

    perturbation: float = 1e-4
    tolerance: float = 1e-6  # relative to the design flow
    max_iters: int = 50
    combustor_tolerance: float = 0.01  # K
    combustor_max_iters: int = 100
    integrator: str = "euler"

    @field_validator("integrator")
    @classmethod
    def _check_integrator(cls, value: str) -> str:
        if value not in ("euler", "rk4"):
            raise ValueError(f"integrator must be 'euler' or 'rk4', got {value!r}.")
        return value


class PlantConfig(BaseModel):
    """Complete engine description."""

    constants: EngineConstants = EngineConstants()
    design: DesignPointConfig = DesignPointConfig()
    compressor: CompressorMapConfig = CompressorMapConfig()
    turbine: TurbineMapConfig = TurbineMapConfig()
    losses: LossConfig = LossConfig()
    limiters: LimiterConfig = LimiterConfig()
    solver: SolverConfig = SolverConfig()


def load_plant_config(path: str | Path | None = None) -> PlantConfig:
    """Read and validate an engine JSON document.

    Args:
        path: JSON file; the packaged default engine when omitted.

    Raises:
        ConfigurationError: If the file is missing, malformed or invalid.
    """
    source: Path = Path(path) if path is not None else DEFAULT_ENGINE_PATH
    try:
        payload: dict = json.loads(source.read_text())
    except FileNotFoundError as e:
        raise ConfigurationError(f"Engine configuration not found: {source}.") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Engine configuration {source} is not valid JSON: {e}.") from e
    try:
        return PlantConfig.model_validate(payload)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid engine configuration {source}: {e}") from e


# Module-level default engine.
DEFAULT_PLANT_CONFIG: PlantConfig = PlantConfig()
