"""Reference component-level turbojet simulator."""

from koopjet.plant.atmosphere import Ambient, isa_inlet
from koopjet.plant.components import (
    NozzleFlow,
    SurrogateMaps,
    combustor_exit_temp,
    critical_pressure_ratio,
    nozzle_eval,
)
from koopjet.plant.config import DEFAULT_PLANT_CONFIG, PlantConfig, load_plant_config
from koopjet.plant.engine import (
    DesignPoint,
    Plant,
    PlantState,
    clm_step,
    design_point,
    nr_match,
    operating_line,
    steady_state,
)
from koopjet.plant.limiters import FuelLimiter, LimiterResult, fuel_limiters

__all__ = [
    "Ambient",
    "DEFAULT_PLANT_CONFIG",
    "DesignPoint",
    "FuelLimiter",
    "LimiterResult",
    "NozzleFlow",
    "Plant",
    "PlantConfig",
    "PlantState",
    "SurrogateMaps",
    "clm_step",
    "combustor_exit_temp",
    "critical_pressure_ratio",
    "design_point",
    "fuel_limiters",
    "isa_inlet",
    "load_plant_config",
    "nozzle_eval",
    "nr_match",
    "operating_line",
    "steady_state",
]
