"""Min-max fuel-flow protection derived from the steady operating line."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from koopjet.plant.atmosphere import Ambient
from koopjet.plant.config import LimiterConfig


@dataclass(frozen=True)
class LimiterResult:
    """Outcome of one limiter evaluation.

    `clamped` is the hold signal for downstream integrators.
    """

    v: float
    clamped: bool
    lower: float
    upper: float


class FuelLimiter:
    """Acceleration and deceleration fuel schedules over corrected spool speed.

    Both schedules are ratios of the steady corrected fuel flow; outside the
    tabulated speeds the end values are held.
    """

    def __init__(self, config: LimiterConfig, N_line: np.ndarray, Wf_line: np.ndarray) -> None:
        """Initialize the limiter.

        Args:
            config: Ratio tables.
            N_line: Corrected spool speeds of the steady operating line, RPM, increasing.
            Wf_line: Corrected steady fuel flow at `N_line`, kg/s.
        """
        N_line = np.asarray(N_line, dtype=float)
        Wf_line = np.asarray(Wf_line, dtype=float)
        if N_line.shape != Wf_line.shape or N_line.size < 2:
            raise ValueError("Operating line needs at least two matching speed and fuel samples.")
        if np.any(np.diff(N_line) <= 0.0):
            raise ValueError("Operating-line speeds must be strictly increasing.")
        self._config: LimiterConfig = config
        self._N_line: np.ndarray = N_line
        self._Wf_line: np.ndarray = Wf_line

    @property
    def operating_line(self) -> tuple[np.ndarray, np.ndarray]:
        return self._N_line.copy(), self._Wf_line.copy()

    def steady_fuel_corrected(self, N_corr: float) -> float:
        return float(np.interp(N_corr, self._N_line, self._Wf_line))

    def fuel_limits(self, N: float, ambient: Ambient) -> tuple[float, float]:
        """Physical (lower, upper) fuel bounds at physical speed N."""
        N_corr: float = N / np.sqrt(ambient.theta)
        steady: float = self.steady_fuel_corrected(N_corr)
        cfg: LimiterConfig = self._config
        lo_ratio: float = float(np.interp(N_corr, cfg.N_points, cfg.decel_ratio))
        hi_ratio: float = float(np.interp(N_corr, cfg.N_points, cfg.accel_ratio))
        to_physical: float = ambient.delta * np.sqrt(ambient.theta)
        return lo_ratio * steady * to_physical, hi_ratio * steady * to_physical

    def apply(self, N: float, v_cmd: float, ambient: Ambient) -> LimiterResult:
        """Clamp a fuel command into the envelope at speed N."""
        lower, upper = self.fuel_limits(N, ambient)
        v: float = min(max(v_cmd, lower), upper)
        return LimiterResult(v=v, clamped=v != v_cmd, lower=lower, upper=upper)


def fuel_limiters(limiter: FuelLimiter, N: float, v_cmd: float, ambient: Ambient) -> tuple[float, bool]:
    """Clamped command and hold flag."""
    result: LimiterResult = limiter.apply(N, v_cmd, ambient)
    return result.v, result.clamped
