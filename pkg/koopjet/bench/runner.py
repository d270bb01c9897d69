"""Closed-loop runs of designed controllers against the component-level engine."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd
from tqdm import tqdm

from koopjet.bench.metrics import Metrics, compute_metrics
from koopjet.bench.scenarios import Scenario
from koopjet.config import N_NOMINAL, NOISE_SIGMA_RPM
from koopjet.control.base import ControlAction, ControlInput, ControllerBase
from koopjet.datakit.processing import add_noise
from koopjet.errors import NumericalError
from koopjet.plant.atmosphere import Ambient
from koopjet.plant.engine import Plant, PlantState

logger = logging.getLogger(__name__)

TRACE_COLUMNS: list[str] = ["t", "Nd_rel", "N_rel", "N_hat_rel", "v", "Wf", "clamp"]


@dataclass(frozen=True)
class TrackingResult:
    """Trace of one run; `failed` marks a run truncated by an engine solver failure."""

    controller: str
    scenario: str
    trace: pd.DataFrame
    failed: bool = False
    message: str = ""


def run_tracking(
    controller: ControllerBase,
    plant: Plant,
    scenario: Scenario,
    sigma_rpm: float = NOISE_SIGMA_RPM,
    progress: bool = False,
) -> TrackingResult:
    """Drive the engine through the scenario under `controller`.

    The controller sees the speed with sensor noise seeded by the scenario;
    the trace records the clean speed. A solver failure truncates the trace.
    """
    n: int = len(scenario)
    dt: float = float(scenario.t[1] - scenario.t[0])
    if not math.isclose(dt, controller.dt, rel_tol=1e-9):
        raise ValueError(f"Scenario step {dt} s differs from the controller period {controller.dt} s.")
    noise: np.ndarray = add_noise(np.zeros(n), sigma_rpm, scenario.seed)
    N_d: np.ndarray = scenario.N_d

    ambient: Ambient = plant.ambient(float(scenario.H[0]), float(scenario.M0[0]))
    state: PlantState = plant.trim(float(N_d[0]), ambient)
    controller.reset(state.N, state.W_f, ambient)

    rows: dict[str, np.ndarray] = {name: np.full(n, np.nan) for name in TRACE_COLUMNS}
    failed: bool = False
    message: str = ""
    k: int = 0
    for k in tqdm(range(n), desc=f"{controller.name}/{scenario.name}", disable=not progress):
        H, M0 = float(scenario.H[k]), float(scenario.M0[k])
        try:
            if (H, M0) != (ambient.H, ambient.M0):
                ambient = plant.ambient(H, M0)
                state = plant.match(state, ambient)
            action: ControlAction = controller.step(
                ControlInput(t=float(scenario.t[k]), N_meas=state.N + float(noise[k]), N_d=float(N_d[k]), ambient=ambient)
            )
            next_state, limited = plant.step(state, action.fuel, ambient, dt)
        except (NumericalError, ValueError) as e:
            failed, message = True, f"t={scenario.t[k]:.2f} s: {e}"
            logger.warning("Run %s/%s truncated at %s", controller.name, scenario.name, message)
            break
        controller.on_applied(limited.v, limited.clamped)
        rows["t"][k] = scenario.t[k]
        rows["Nd_rel"][k] = scenario.N_rel_d[k]
        rows["N_rel"][k] = state.N / N_NOMINAL
        rows["N_hat_rel"][k] = np.nan if action.N_hat is None else action.N_hat / N_NOMINAL
        rows["v"][k] = limited.v
        rows["Wf"][k] = state.W_f
        rows["clamp"][k] = float(limited.clamped)
        state = next_state

    trace = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    if failed:
        trace = trace.iloc[:k].reset_index(drop=True)
    return TrackingResult(controller=controller.name, scenario=scenario.name, trace=trace, failed=failed, message=message)


ControllerFactory = Callable[[], ControllerBase]


def _run_one(job: tuple[str, ControllerFactory, Scenario], plant: Plant, sigma_rpm: float) -> tuple[TrackingResult, Metrics | None]:
    name, factory, scenario = job
    result: TrackingResult = run_tracking(factory(), plant, scenario, sigma_rpm)
    result = TrackingResult(name, scenario.name, result.trace, result.failed, result.message)
    metrics: Metrics | None = compute_metrics(result.trace, scenario) if len(result.trace) >= 2 else None
    return result, metrics


def run_tournament(
    factories: dict[str, ControllerFactory],
    plant: Plant,
    scenarios: list[Scenario],
    sigma_rpm: float = NOISE_SIGMA_RPM,
    workers: int = 1,
) -> list[tuple[TrackingResult, Metrics | None]]:
    """Every controller on every scenario, each run with a fresh controller instance.

    With `workers` above one, runs execute in separate processes; factories
    must then be picklable.
    """
    jobs: list[tuple[str, ControllerFactory, Scenario]] = [
        (name, factory, scenario) for name, factory in factories.items() for scenario in scenarios
    ]
    if workers <= 1:
        results = [_run_one(job, plant, sigma_rpm) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, [plant] * len(jobs), [sigma_rpm] * len(jobs)))
    for result, metrics in results:
        if metrics is not None:
            logger.info(
                "%s on %s: wIAE=%.1f RPM s, IAE=%.1f RPM s, MST=%s",
                result.controller,
                result.scenario,
                metrics.wIAE,
                metrics.IAE,
                "n/a" if metrics.MST is None else f"{metrics.MST:.2f} s",
            )
    return results
