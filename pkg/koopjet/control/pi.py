"""Fixed-gain PI governor with clamping anti-windup."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from koopjet.control.base import ControlAction, ControlInput, ControllerBase
from koopjet.datakit.normalization import NormalizationSpec
from koopjet.plant.atmosphere import Ambient


@dataclass(frozen=True)
class PiGains:
    """Proportional and integral gains in normalized coordinates."""

    Kp: float = 1.0
    Ki: float = 3.0

    def __post_init__(self) -> None:
        if self.Kp < 0.0 or self.Ki < 0.0:
            raise ValueError(f"PI gains must be non-negative, got Kp={self.Kp}, Ki={self.Ki}.")


def pi_step(gains: PiGains, e: float, dt: float, integral: float, antiwindup_flag: bool) -> tuple[float, float]:
    """One PI sample.

    The integral of the error is advanced before the output is formed and
    held unchanged while `antiwindup_flag` is set.

    Returns:
        Command and the updated integral.
    """
    if not antiwindup_flag:
        integral = integral + e * dt
    return gains.Kp * e + gains.Ki * integral, integral


class PiController(ControllerBase):
    """PI on speed and fuel normalized without flight correction."""

    name = "pi"

    def __init__(self, gains: PiGains, spec: NormalizationSpec, dt: float) -> None:
        super().__init__(spec, dt)
        self._gains: PiGains = gains
        self._integral: float = 0.0
        self._pending: float = 0.0
        self._bias: float = 0.0

    @classmethod
    def from_design(cls, design: dict[str, Any], spec: NormalizationSpec, dt: float) -> PiController:
        return cls(PiGains(Kp=float(design["Kp"]), Ki=float(design["Ki"])), spec, dt)

    @property
    def gains(self) -> PiGains:
        return self._gains

    @property
    def integral(self) -> float:
        return self._integral

    def reset(self, N0: float, W_f0: float, ambient: Ambient) -> None:
        v0: float = self._spec.normalize_fuel(W_f0)
        if self._gains.Ki > 0.0:
            self._integral, self._bias = v0 / self._gains.Ki, 0.0
        else:
            self._integral, self._bias = 0.0, v0
        self._pending = self._integral
        self._clamped = False

    def step(self, inp: ControlInput) -> ControlAction:
        e: float = (inp.N_d - inp.N_meas) / self._spec.S_N
        v, self._pending = pi_step(self._gains, e, self._dt, self._integral, antiwindup_flag=False)
        return ControlAction(fuel=self._spec.denormalize_fuel(v + self._bias))

    def on_applied(self, fuel: float, clamped: bool) -> None:
        super().on_applied(fuel, clamped)
        if not clamped:
            self._integral = self._pending
