"""Closed-loop evaluation: scenarios, metrics, tracking runs and reports.

The runner and report modules import the controllers and are imported
explicitly (`koopjet.bench.runner`, `koopjet.bench.report`).
"""

from koopjet.bench.metrics import (
    Metrics,
    acceleration_onset,
    compute_metrics,
    iae,
    max_settling_time,
    peak_deviation,
    weighted_iae,
)
from koopjet.bench.scenarios import (
    DEFAULT_SCENARIO_CONFIG,
    Scenario,
    ScenarioConfig,
    canonical_profile,
    error_weight,
    flight_scenarios,
    scenario_by_name,
)

__all__ = [
    "DEFAULT_SCENARIO_CONFIG",
    "Metrics",
    "Scenario",
    "ScenarioConfig",
    "acceleration_onset",
    "canonical_profile",
    "compute_metrics",
    "error_weight",
    "flight_scenarios",
    "iae",
    "max_settling_time",
    "peak_deviation",
    "scenario_by_name",
    "weighted_iae",
]
