"""Closed-loop evaluation scenarios: setpoint and flight-condition schedules."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from pydantic import BaseModel, model_validator

from koopjet.config import DT, N_NOMINAL
from utils.json_helpers import content_hash

logger = logging.getLogger(__name__)

N_REL_MIN: float = 0.5
N_REL_MAX: float = 1.0
H_CEILING: float = 11000.0  # m


class ScenarioConfig(BaseModel):
    """Stair levels of the tracking profile and flight-condition shapes.

    Stair levels are chosen settings for the small-transient window, not
    measured data.
    """

    duration: float = 70.0  # s
    dt: float = DT
    level_times: list[float] = [0.0, 5.0, 13.0, 21.0, 29.0, 37.0, 45.0, 50.0, 55.0]
    levels: list[float] = [0.5, 0.65, 0.8, 0.9, 0.8, 0.9, 1.0, 0.5, 1.0]
    varying_H_peak: float = 8000.0  # m
    varying_M0_peak: float = 0.6
    varying_floor: float = 0.65  # deceleration level used while the flight condition varies
    disturbance_setpoint: float = 0.9
    disturbance_H_step: tuple[float, float] = (10.0, 3000.0)  # (time s, +H m)
    disturbance_M0_step: tuple[float, float] = (40.0, 0.4)  # (time s, +M0)
    seed: int = 0

    @model_validator(mode="after")
    def _check(self) -> ScenarioConfig:
        if len(self.level_times) != len(self.levels) or not self.levels:
            raise ValueError("level_times and levels must be non-empty and of equal length.")
        if any(b <= a for a, b in zip(self.level_times, self.level_times[1:])):
            raise ValueError("level_times must be strictly increasing.")
        if any(not N_REL_MIN <= x <= N_REL_MAX for x in self.levels):
            raise ValueError(f"Stair levels must lie in [{N_REL_MIN}, {N_REL_MAX}].")
        if self.varying_H_peak > H_CEILING:
            raise ValueError(f"varying_H_peak must not exceed {H_CEILING} m.")
        return self


DEFAULT_SCENARIO_CONFIG: ScenarioConfig = ScenarioConfig()


@dataclass(frozen=True)
class Scenario:
    """Relative speed demand N_d / 14000 with altitude and flight Mach number per sample."""

    name: str
    t: np.ndarray
    N_rel_d: np.ndarray
    H: np.ndarray
    M0: np.ndarray
    seed: int = 0
    disturbance_onset: float | None = None

    def __post_init__(self) -> None:
        n: int = len(self.t)
        for channel in ("N_rel_d", "H", "M0"):
            if len(getattr(self, channel)) != n:
                raise ValueError(f"Scenario channel {channel} has {len(getattr(self, channel))} samples, expected {n}.")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def N_d(self) -> np.ndarray:
        """Physical speed demand in RPM."""
        return self.N_rel_d * N_NOMINAL

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "t": self.t,
            "N_rel_d": self.N_rel_d,
            "H": self.H,
            "M0": self.M0,
            "seed": self.seed,
            "disturbance_onset": self.disturbance_onset,
        }

    def digest(self) -> str:
        return content_hash(self.to_dict())


def error_weight(t: np.ndarray | float) -> np.ndarray:
    """Tracking-error weight: 5 on the small-transient window, 0 before it and during the deceleration, 1 after."""
    t = np.asarray(t, dtype=float)
    w: np.ndarray = np.ones_like(t)
    w[(t >= 5.0) & (t < 50.0)] = 5.0
    w[(t < 5.0) | ((t >= 50.0) & (t < 55.0))] = 0.0
    return w


def _time_grid(config: ScenarioConfig) -> np.ndarray:
    return np.round(np.arange(0.0, config.duration + 0.5 * config.dt, config.dt), 10)


def _stairs(t: np.ndarray, times: list[float], levels: list[float]) -> np.ndarray:
    idx: np.ndarray = np.searchsorted(np.asarray(times), t, side="right") - 1
    return np.asarray(levels)[np.clip(idx, 0, len(levels) - 1)]


def _triangle(t: np.ndarray, duration: float, peak: float) -> np.ndarray:
    return peak * (1.0 - np.abs(2.0 * t / duration - 1.0))


def canonical_profile(config: ScenarioConfig = DEFAULT_SCENARIO_CONFIG) -> Scenario:
    """Sea-level static stair profile: small stairs, a deceleration and a full acceleration."""
    t: np.ndarray = _time_grid(config)
    zeros: np.ndarray = np.zeros_like(t)
    return Scenario(
        name="sea",
        t=t,
        N_rel_d=_stairs(t, config.level_times, config.levels),
        H=zeros,
        M0=zeros.copy(),
        seed=config.seed,
    )


def flight_scenarios(config: ScenarioConfig = DEFAULT_SCENARIO_CONFIG) -> tuple[Scenario, Scenario]:
    """Tracking under a varying flight condition and setpoint holding under flight-condition steps.

    In the varying scenario no stair goes below `varying_floor`, so the
    engine is not decelerated towards idle at high flight Mach number.
    """
    t: np.ndarray = _time_grid(config)
    levels: list[float] = [max(x, config.varying_floor) for x in config.levels]
    varying = Scenario(
        name="varying",
        t=t,
        N_rel_d=_stairs(t, config.level_times, levels),
        H=_triangle(t, config.duration, config.varying_H_peak),
        M0=_triangle(t, config.duration, config.varying_M0_peak),
        seed=config.seed,
    )

    t_H, dH = config.disturbance_H_step
    t_M, dM = config.disturbance_M0_step
    H: np.ndarray = np.where(t >= t_H, dH, 0.0)
    if np.any(H > H_CEILING):
        raise ValueError(f"Disturbance altitude exceeds {H_CEILING} m.")
    disturbance = Scenario(
        name="disturbance",
        t=t,
        N_rel_d=np.full_like(t, config.disturbance_setpoint),
        H=H,
        M0=np.where(t >= t_M, dM, 0.0),
        seed=config.seed,
        disturbance_onset=min(t_H, t_M),
    )
    return varying, disturbance


def scenario_by_name(name: str, config: ScenarioConfig = DEFAULT_SCENARIO_CONFIG) -> Scenario:
    if name == "sea":
        return canonical_profile(config)
    varying, disturbance = flight_scenarios(config)
    if name == "varying":
        return varying
    if name == "disturbance":
        return disturbance
    raise ValueError(f"Unknown scenario '{name}'; expected sea, varying or disturbance.")
