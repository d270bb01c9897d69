"""Common controller interface exchanged with the plant loop."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, ClassVar

from koopjet.datakit.normalization import NormalizationSpec, to_model_coordinates, to_physical
from koopjet.plant.atmosphere import Ambient


@dataclass(frozen=True)
class ControlInput:
    """One controller sample: measured and demanded physical spool speed."""

    t: float
    N_meas: float  # RPM
    N_d: float  # RPM
    ambient: Ambient


@dataclass(frozen=True)
class ControlAction:
    """Fuel command in kg/s and, for observer-based laws, the speed estimate in RPM."""

    fuel: float
    N_hat: float | None = None


class ControllerBase(ABC):
    """A discrete-time speed governor.

    The loop calls `reset` once, then alternates `step` and `on_applied`;
    `on_applied` reports the fuel command that survived the limiter and
    whether it was clamped.
    """

    name: ClassVar[str] = "controller"

    def __init__(self, spec: NormalizationSpec, dt: float) -> None:
        if dt <= 0.0:
            raise ValueError(f"Controller sampling period must be positive, got {dt}.")
        self._spec: NormalizationSpec = spec
        self._dt: float = dt
        self._clamped: bool = False

    @property
    def dt(self) -> float:
        return self._dt

    @property
    def spec(self) -> NormalizationSpec:
        return self._spec

    @classmethod
    @abstractmethod
    def from_design(cls, design: dict[str, Any], spec: NormalizationSpec, dt: float) -> ControllerBase:
        """Rebuild the controller from the `design` block of its saved JSON."""

    @abstractmethod
    def reset(self, N0: float, W_f0: float, ambient: Ambient) -> None:
        """Initialize internal states for a bumpless start at physical speed N0 and fuel W_f0."""

    @abstractmethod
    def step(self, inp: ControlInput) -> ControlAction:
        """Compute the next fuel command."""

    def on_applied(self, fuel: float, clamped: bool) -> None:
        self._clamped = clamped

    def to_model(self, N_phys: float, Wf_phys: float, ambient: Ambient) -> tuple[float, float]:
        """Physical values to normalized corrected coordinates."""
        N, W_f = to_model_coordinates(N_phys, Wf_phys, ambient.T1t, ambient.p1t, self._spec)
        return float(N), float(W_f)

    def fuel_to_physical(self, W_f: float, ambient: Ambient) -> float:
        """Normalized corrected fuel flow to kg/s."""
        _, Wf_phys = to_physical(0.0, W_f, ambient.T1t, ambient.p1t, self._spec)
        return float(Wf_phys)
