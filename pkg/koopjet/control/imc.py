"""Internal model control built on the SINDy linearization and a first-order fuel lag."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Any

import numpy as np
from pydantic import BaseModel, model_validator

from koopjet.control.base import ControlAction, ControlInput, ControllerBase
from koopjet.datakit.normalization import NormalizationSpec
from koopjet.datakit.processing import SG_ORDER, SG_WINDOW
from koopjet.numerics.signal import causal_savgol_derivative_coeffs
from koopjet.plant.atmosphere import Ambient
from koopjet.sindy.model import Linearization, SindyModel, linearize

logger = logging.getLogger(__name__)


class ImcConfig(BaseModel):
    """Filter time constant, fuel lag and error-derivative filter."""

    tau_f: float = 0.05  # s
    T_f: float = 0.1  # s
    window: int = SG_WINDOW
    order: int = SG_ORDER

    @model_validator(mode="after")
    def _check(self) -> ImcConfig:
        if self.tau_f <= 0.0 or self.T_f <= 0.0:
            raise ValueError(f"tau_f and T_f must be positive, got tau_f={self.tau_f}, T_f={self.T_f}.")
        if self.window % 2 != 1 or self.order >= self.window:
            raise ValueError(f"Derivative filter needs an odd window above the order, got {self.window}/{self.order}.")
        return self


DEFAULT_IMC_CONFIG: ImcConfig = ImcConfig()


@dataclass(frozen=True)
class PidGains:
    Kp: float
    Ki: float
    Kd: float


def imc_gains(K_e: float, T_e: float, T_f: float, tau_f: float) -> PidGains:
    """Corrected PID gains equivalent to the IMC law at one operating point."""
    scale: float = 1.0 / (K_e * tau_f**2)
    return PidGains(Kp=(T_e + T_f) * scale, Ki=scale, Kd=T_e * T_f * scale)


@dataclass
class ImcState:
    """Command v and the integral of Ki e."""

    v: float = 0.0
    integral: float = 0.0


def imc_step(
    state: ImcState,
    e: float,
    de: float,
    K_e: float,
    T_e: float,
    dt: float,
    config: ImcConfig = DEFAULT_IMC_CONFIG,
    antiwindup_flag: bool = False,
) -> ImcState:
    """Advance the IMC law by one sample.

    dv/dt = Kp e + Ki int(e) + Kd de - (2 / tau_f) v, with the forcing held
    over the sample and the -2/tau_f pole discretized exactly. The integral
    is frozen while `antiwindup_flag` is set.
    """
    gains: PidGains = imc_gains(K_e, T_e, config.T_f, config.tau_f)
    integral: float = state.integral if antiwindup_flag else state.integral + gains.Ki * e * dt
    forcing: float = gains.Kp * e + integral + gains.Kd * de
    pole: float = 2.0 / config.tau_f
    decay: float = math.exp(-pole * dt)
    v: float = decay * state.v + (1.0 - decay) * forcing / pole
    return ImcState(v=v, integral=integral)


class ImcController(ControllerBase):
    """Gain-scheduled IMC in corrected normalized coordinates.

    K_e and T_e come from the SINDy linearization at the measured speed; an
    unstable linearization reuses the last stable one. The error derivative
    is the causal Savitzky-Golay derivative over the last `window` errors,
    falling back to a first difference until the window fills.
    """

    name = "imc"

    def __init__(self, model: SindyModel, spec: NormalizationSpec, dt: float, config: ImcConfig = DEFAULT_IMC_CONFIG) -> None:
        super().__init__(spec, dt)
        self._model: SindyModel = model
        self._config: ImcConfig = config
        self._coeffs: np.ndarray = causal_savgol_derivative_coeffs(config.window, config.order, dt)
        self._errors: deque[float] = deque(maxlen=config.window)
        self._state: ImcState = ImcState()
        self._pending: ImcState = ImcState()
        self._last_lin: Linearization | None = None

    @classmethod
    def from_design(cls, design: dict[str, Any], spec: NormalizationSpec, dt: float) -> ImcController:
        return cls(SindyModel.from_dict(design["sindy"]), spec, dt, ImcConfig(**design.get("config", {})))

    @property
    def config(self) -> ImcConfig:
        return self._config

    @property
    def state(self) -> ImcState:
        return self._state

    def reset(self, N0: float, W_f0: float, ambient: Ambient) -> None:
        _, v0 = self.to_model(N0, W_f0, ambient)
        # Steady v = (tau_f / 2) * integral when e = 0.
        self._state = ImcState(v=v0, integral=2.0 * v0 / self._config.tau_f)
        self._pending = self._state
        self._errors.clear()
        self._last_lin = None
        self._clamped = False

    def _linearization(self, N: float) -> Linearization:
        lin: Linearization = linearize(self._model, float(np.clip(N, 0.0, 1.0)))
        if lin.stable and lin.K_e > 0.0:
            self._last_lin = lin
            return lin
        if self._last_lin is None:
            raise ValueError(f"IMC has no stable linearization at N={N:.4g}.")
        return self._last_lin

    def _derivative(self, e: float) -> float:
        self._errors.append(e)
        if len(self._errors) == self._config.window:
            return float(np.dot(self._coeffs, np.asarray(self._errors)))
        if len(self._errors) >= 2:
            return (self._errors[-1] - self._errors[-2]) / self._dt
        return 0.0

    def step(self, inp: ControlInput) -> ControlAction:
        N, _ = self.to_model(inp.N_meas, 0.0, inp.ambient)
        N_d, _ = self.to_model(inp.N_d, 0.0, inp.ambient)
        e: float = N_d - N
        de: float = self._derivative(e)
        lin: Linearization = self._linearization(N)
        self._pending = imc_step(self._state, e, de, lin.K_e, lin.T_e, self._dt, self._config)
        return ControlAction(fuel=self.fuel_to_physical(self._pending.v, inp.ambient))

    def on_applied(self, fuel: float, clamped: bool) -> None:
        super().on_applied(fuel, clamped)
        if clamped:
            self._state = ImcState(v=self._pending.v, integral=self._state.integral)
        else:
            self._state = self._pending


@dataclass(frozen=True)
class ImcDesign:
    """IMC settings plus the linearization table and equivalent PID gains over a speed grid."""

    model: SindyModel
    config: ImcConfig
    linearizations: tuple[Linearization, ...]
    gains: tuple[PidGains, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "sindy": self.model.to_dict(),
            "config": self.config.model_dump(),
            "table": [
                {
                    "N": lin.N,
                    "W_f": lin.W_f,
                    "a": lin.a,
                    "b": lin.b,
                    "K_e": lin.K_e,
                    "T_e": lin.T_e,
                    "Kp": g.Kp,
                    "Ki": g.Ki,
                    "Kd": g.Kd,
                }
                for lin, g in zip(self.linearizations, self.gains)
            ],
        }


def imc_design(model: SindyModel, config: ImcConfig = DEFAULT_IMC_CONFIG, grid_points: int = 11) -> ImcDesign:
    """Tabulate the scheduled IMC gains; unstable points are skipped with a warning."""
    lins: list[Linearization] = []
    gains: list[PidGains] = []
    for N_i in np.linspace(0.0, 1.0, grid_points):
        lin: Linearization = linearize(model, float(N_i))
        if not lin.stable or lin.K_e <= 0.0:
            logger.warning("IMC table point N=%.3f skipped: a=%.4g, K_e=%.4g.", N_i, lin.a, lin.K_e)
            continue
        lins.append(lin)
        gains.append(imc_gains(lin.K_e, lin.T_e, config.T_f, config.tau_f))
    logger.info("IMC designed: tau_f=%.3g s, %d tabulated points", config.tau_f, len(lins))
    return ImcDesign(model=model, config=config, linearizations=tuple(lins), gains=tuple(gains))
