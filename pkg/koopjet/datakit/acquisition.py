"""Closed-loop data acquisition on the reference engine."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from pydantic import BaseModel
from tqdm import tqdm

from koopjet.config import DT, NOISE_SIGMA_RPM
from koopjet.control.base import ControlAction, ControlInput
from koopjet.control.pi import PiController, PiGains
from koopjet.datakit.dataset import Dataset
from koopjet.datakit.normalization import NormalizationSpec, to_physical
from koopjet.datakit.processing import SG_ORDER, SG_WINDOW, add_noise, prepare_regression
from koopjet.datakit.profiles import CommandProfile
from koopjet.errors import NumericalError
from koopjet.plant.atmosphere import Ambient
from koopjet.plant.engine import Plant, PlantState
from koopjet.plant.limiters import LimiterResult

logger = logging.getLogger(__name__)


class AcquisitionConfig(BaseModel):
    """Measurement, filtering and governor settings of one simulated experiment."""

    sigma_rpm: float = NOISE_SIGMA_RPM
    seed: int = 0
    window: int = SG_WINDOW
    order: int = SG_ORDER
    dt: float = DT
    H: float = 0.0
    M0: float = 0.0
    Kp: float = 1.0
    Ki: float = 3.0
    label: str = "training"
    progress: bool = False


DEFAULT_ACQUISITION_CONFIG: AcquisitionConfig = AcquisitionConfig()


@dataclass(frozen=True)
class Acquisition:
    """Prepared dataset plus the clean plant channels of the same run."""

    dataset: Dataset
    trace: pd.DataFrame


def fuel_normalization_from_plant(plant: Plant, base: NormalizationSpec) -> NormalizationSpec:
    """Fuel offset and scale from the steady operating line.

    The offset is the corrected ground-idle fuel flow (speed offset O_N) and
    the scale the span up to the top of the normalized speed range.
    """
    idle: float = plant.limiter.steady_fuel_corrected(base.O_N)
    top: float = plant.limiter.steady_fuel_corrected(base.O_N + base.S_N)
    if top <= idle:
        raise NumericalError(f"Operating line is not increasing: idle {idle:.5f} kg/s, top {top:.5f} kg/s.")
    return base.model_copy(update={"O_W": idle, "S_W": top - idle})


def simulate_dataset(
    plant: Plant,
    profile: CommandProfile,
    spec: NormalizationSpec,
    config: AcquisitionConfig = DEFAULT_ACQUISITION_CONFIG,
) -> Acquisition:
    """Drive the engine through a setpoint profile under PI control and record it.

    The governor sees the noisy speed; the dataset keeps the noisy channel,
    the trace keeps the clean speed, delivered fuel, command and thrust.

    Raises:
        NumericalError: If the engine solver fails; the message names the time.
    """
    ambient: Ambient = plant.ambient(config.H, config.M0)
    n: int = len(profile)
    N_d_phys, _ = to_physical(profile.N_d, 0.0, ambient.T1t, ambient.p1t, spec)
    noise: np.ndarray = add_noise(np.zeros(n), config.sigma_rpm, config.seed)

    state: PlantState = plant.trim(float(N_d_phys[0]), ambient)
    controller: PiController = PiController(PiGains(Kp=config.Kp, Ki=config.Ki), spec, config.dt)
    controller.reset(state.N, state.W_f, ambient)

    columns: dict[str, np.ndarray] = {
        name: np.empty(n) for name in ("N", "W_f", "v_cmd", "thrust", "T_t", "clamp", "N_meas")
    }
    for k in tqdm(range(n), desc=config.label, disable=not config.progress):
        N_meas: float = state.N + float(noise[k])
        action: ControlAction = controller.step(
            ControlInput(t=float(profile.t[k]), N_meas=N_meas, N_d=float(N_d_phys[k]), ambient=ambient)
        )
        try:
            next_state, limited = plant.step(state, action.fuel, ambient, config.dt)
        except NumericalError as e:
            raise NumericalError(f"Engine simulation failed at t={profile.t[k]:.2f} s: {e}") from e
        controller.on_applied(limited.v, limited.clamped)
        _record(columns, k, state, N_meas, limited)
        state = next_state

    dataset: Dataset = prepare_regression(
        profile.t,
        columns["N_meas"],
        columns["W_f"],
        spec,
        ambient.T1t,
        ambient.p1t,
        window=config.window,
        order=config.order,
        segment=profile.segment,
        sigma_rpm=config.sigma_rpm,
        seed=config.seed,
        label=config.label,
    )
    trace: pd.DataFrame = pd.DataFrame(
        {
            "t": profile.t,
            "N": columns["N"],
            "W_f": columns["W_f"],
            "v_cmd": columns["v_cmd"],
            "thrust": columns["thrust"],
            "T_t": columns["T_t"],
            "clamp": columns["clamp"].astype(int),
        }
    )
    logger.info(
        "Simulated %s: %d samples, clamped %.1f%% of the time",
        config.label,
        n,
        100.0 * float(np.mean(columns["clamp"])),
    )
    return Acquisition(dataset=dataset, trace=trace)


def _record(columns: dict[str, np.ndarray], k: int, state: PlantState, N_meas: float, limited: LimiterResult) -> None:
    columns["N"][k] = state.N
    columns["W_f"][k] = state.W_f
    columns["v_cmd"][k] = limited.v
    columns["thrust"][k] = state.thrust
    columns["T_t"][k] = state.T_t
    columns["clamp"][k] = float(limited.clamped)
    columns["N_meas"][k] = N_meas
