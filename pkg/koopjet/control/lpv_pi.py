"""Gain-scheduled PI designed on the SINDy linearizations, with flight correction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.integrate
import scipy.signal
from pydantic import BaseModel, model_validator

from koopjet.config import P_REF, T_REF
from koopjet.control.base import ControlAction, ControlInput, ControllerBase
from koopjet.datakit.normalization import NormalizationSpec
from koopjet.errors import InfeasibleDesignError
from koopjet.numerics.swarm import SwarmConfig, pso_minimize
from koopjet.plant.atmosphere import Ambient
from koopjet.sindy.model import Linearization, SindyModel, linearize

logger = logging.getLogger(__name__)

UNSTABLE_COST: float = 1e6
GAIN_FLOOR: float = 1e-6


class LpvPiConfig(BaseModel):
    """Grid, search box and cost weights of the per-point PI tuning."""

    grid_points: int = 11
    degree: int = 5
    T_f: float = 0.1  # s, fuel-system lag of the local model
    Kp_bounds: tuple[float, float] = (0.01, 20.0)
    Ki_bounds: tuple[float, float] = (0.01, 60.0)
    regularization: float = 1e-4
    overshoot_tol: float = 1e-3
    overshoot_penalty: float = 100.0
    horizon: float = 5.0  # s
    step_dt: float = 0.01
    population: int = 30
    iterations: int = 40
    seed: int = 0
    progress: bool = False

    @model_validator(mode="after")
    def _check(self) -> LpvPiConfig:
        if self.grid_points < 2:
            raise ValueError(f"grid_points must be >= 2, got {self.grid_points}.")
        if self.T_f <= 0.0 or self.horizon <= 0.0 or self.step_dt <= 0.0:
            raise ValueError("T_f, horizon and step_dt must be positive.")
        return self

    def swarm(self) -> SwarmConfig:
        return SwarmConfig(
            population=self.population,
            bounds=[self.Kp_bounds, self.Ki_bounds],
            max_iters=self.iterations,
            seed=self.seed,
            progress=self.progress,
        )


DEFAULT_LPV_PI_CONFIG: LpvPiConfig = LpvPiConfig()


def local_loop(lin: Linearization, Kp: float, Ki: float, T_f: float) -> scipy.signal.StateSpace:
    """Closed loop of PI, fuel lag and first-order engine from setpoint to speed.

    States are (speed deviation, fuel deviation, error integral).
    """
    A: np.ndarray = np.array(
        [
            [lin.a, lin.b, 0.0],
            [-Kp / T_f, -1.0 / T_f, Ki / T_f],
            [-1.0, 0.0, 0.0],
        ]
    )
    B: np.ndarray = np.array([[0.0], [Kp / T_f], [1.0]])
    C: np.ndarray = np.array([[1.0, 0.0, 0.0]])
    return scipy.signal.StateSpace(A, B, C, np.zeros((1, 1)))


def step_cost(lin: Linearization, Kp: float, Ki: float, config: LpvPiConfig) -> float:
    """Integral of the squared step error plus gain regularization and an overshoot penalty."""
    loop: scipy.signal.StateSpace = local_loop(lin, Kp, Ki, config.T_f)
    if not np.all(np.linalg.eigvals(loop.A).real < 0.0):
        return UNSTABLE_COST
    t: np.ndarray = np.arange(0.0, config.horizon + 0.5 * config.step_dt, config.step_dt)
    _, y = scipy.signal.step(loop, T=t)
    e: np.ndarray = 1.0 - y
    ise: float = float(scipy.integrate.trapezoid(e**2, t))
    overshoot: float = max(0.0, float(np.max(y)) - (1.0 + config.overshoot_tol))
    return ise + config.regularization * (Kp**2 + Ki**2) + config.overshoot_penalty * overshoot


def step_peak_ratio(lin: Linearization, Kp: float, Ki: float, T_f: float, horizon: float = 20.0) -> float:
    """Peak over final value of the local closed-loop step response."""
    t: np.ndarray = np.linspace(0.0, horizon, 4001)
    _, y = scipy.signal.step(local_loop(lin, Kp, Ki, T_f), T=t)
    return float(np.max(y) / y[-1])


@dataclass(frozen=True)
class LpvPiSchedule:
    """Polynomial Kp(N), Ki(N) in corrected normalized coordinates.

    Coefficients are ordered highest power first, as `numpy.polyval` expects.
    """

    poly_Kp: np.ndarray
    poly_Ki: np.ndarray
    grid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Kp_points: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Ki_points: np.ndarray = field(default_factory=lambda: np.zeros(0))
    linearizations: tuple[Linearization, ...] = ()
    rejected: tuple[float, ...] = ()

    def gains(self, N: float) -> tuple[float, float]:
        """Corrected gains at N, clipped to the unit range and floored at a small positive value."""
        x: float = float(np.clip(N, 0.0, 1.0))
        Kp: float = max(float(np.polyval(self.poly_Kp, x)), GAIN_FLOOR)
        Ki: float = max(float(np.polyval(self.poly_Ki, x)), GAIN_FLOOR)
        return Kp, Ki

    def to_dict(self) -> dict[str, Any]:
        return {
            "poly_Kp": self.poly_Kp.tolist(),
            "poly_Ki": self.poly_Ki.tolist(),
            "grid": self.grid.tolist(),
            "Kp_points": self.Kp_points.tolist(),
            "Ki_points": self.Ki_points.tolist(),
            "linearizations": [
                {"N": lin.N, "W_f": lin.W_f, "a": lin.a, "b": lin.b, "K_e": lin.K_e, "T_e": lin.T_e}
                for lin in self.linearizations
            ],
            "rejected": list(self.rejected),
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> LpvPiSchedule:
        return cls(
            poly_Kp=np.asarray(payload["poly_Kp"], dtype=float),
            poly_Ki=np.asarray(payload["poly_Ki"], dtype=float),
            grid=np.asarray(payload.get("grid", []), dtype=float),
            Kp_points=np.asarray(payload.get("Kp_points", []), dtype=float),
            Ki_points=np.asarray(payload.get("Ki_points", []), dtype=float),
            linearizations=tuple(
                Linearization(stable=item["a"] < 0.0, **item) for item in payload.get("linearizations", [])
            ),
            rejected=tuple(payload.get("rejected", [])),
        )


def tune_point(lin: Linearization, config: LpvPiConfig = DEFAULT_LPV_PI_CONFIG) -> tuple[float, float, float]:
    """PSO search of (Kp, Ki) for one linearization. Returns Kp, Ki and the cost."""
    best, cost = pso_minimize(lambda x: step_cost(lin, float(x[0]), float(x[1]), config), config.swarm())
    return float(best[0]), float(best[1]), float(cost)


def lpv_pi_design(model: SindyModel, config: LpvPiConfig = DEFAULT_LPV_PI_CONFIG) -> LpvPiSchedule:
    """Tune a PI at evenly spaced steady points and fit polynomial schedules.

    Points whose linearization or tuned loop is unstable are dropped with a
    warning; the polynomial degree is capped by the remaining point count.

    Raises:
        InfeasibleDesignError: If fewer than two points survive.
    """
    grid: np.ndarray = np.linspace(0.0, 1.0, config.grid_points)
    kept_N: list[float] = []
    Kp_list: list[float] = []
    Ki_list: list[float] = []
    lins: list[Linearization] = []
    rejected: list[float] = []
    for N_i in grid:
        try:
            lin: Linearization = linearize(model, float(N_i))
        except ValueError as e:
            logger.warning("LPV-PI point N=%.3f rejected: %s", N_i, e)
            rejected.append(float(N_i))
            continue
        if not lin.stable:
            logger.warning("LPV-PI point N=%.3f rejected: local engine model unstable (a=%.4g).", N_i, lin.a)
            rejected.append(float(N_i))
            continue
        Kp, Ki, cost = tune_point(lin, config)
        if cost >= UNSTABLE_COST:
            logger.warning("LPV-PI point N=%.3f rejected: no stabilizing gains found.", N_i)
            rejected.append(float(N_i))
            continue
        logger.debug("LPV-PI point N=%.3f: Kp=%.4g Ki=%.4g cost=%.4g", N_i, Kp, Ki, cost)
        kept_N.append(float(N_i))
        Kp_list.append(Kp)
        Ki_list.append(Ki)
        lins.append(lin)

    if len(kept_N) < 2:
        raise InfeasibleDesignError(
            f"LPV-PI design kept {len(kept_N)} of {len(grid)} grid points.",
            report={"rejected": rejected},
        )
    degree: int = min(config.degree, len(kept_N) - 1)
    N_arr: np.ndarray = np.asarray(kept_N)
    schedule = LpvPiSchedule(
        poly_Kp=np.polyfit(N_arr, Kp_list, degree),
        poly_Ki=np.polyfit(N_arr, Ki_list, degree),
        grid=N_arr,
        Kp_points=np.asarray(Kp_list),
        Ki_points=np.asarray(Ki_list),
        linearizations=tuple(lins),
        rejected=tuple(rejected),
    )
    dense: np.ndarray = np.linspace(0.0, 1.0, 101)
    if np.any(np.polyval(schedule.poly_Kp, dense) <= 0.0) or np.any(np.polyval(schedule.poly_Ki, dense) <= 0.0):
        logger.warning("LPV-PI polynomial schedule is not positive on [0, 1]; gains are floored at %g.", GAIN_FLOOR)
    logger.info("LPV-PI designed on %d points (degree %d), %d rejected", len(kept_N), degree, len(rejected))
    return schedule


def flight_gain_correction(Kp_corr: float, Ki_corr: float, ambient: Ambient) -> tuple[float, float]:
    """Physical gains from corrected gains at the measured inlet total conditions."""
    Kp: float = Kp_corr * (P_REF / ambient.p1t)
    Ki: float = Ki_corr * np.sqrt(T_REF / ambient.T1t) * (ambient.p1t / P_REF)
    return Kp, float(Ki)


class LpvPiController(ControllerBase):
    """PI with gains scheduled on corrected speed and corrected online for flight conditions.

    The error and command are scaled by S_N and S_W without flight correction;
    the gain correction carries it instead. The integral accumulates Ki e so
    gain changes do not bump the command.
    """

    name = "lpv-pi"

    def __init__(self, schedule: LpvPiSchedule, spec: NormalizationSpec, dt: float) -> None:
        super().__init__(spec, dt)
        self._schedule: LpvPiSchedule = schedule
        self._integral: float = 0.0
        self._pending: float = 0.0

    @classmethod
    def from_design(cls, design: dict[str, Any], spec: NormalizationSpec, dt: float) -> LpvPiController:
        return cls(LpvPiSchedule.from_dict(design), spec, dt)

    @property
    def schedule(self) -> LpvPiSchedule:
        return self._schedule

    def reset(self, N0: float, W_f0: float, ambient: Ambient) -> None:
        self._integral = (W_f0 - self._spec.O_W) / self._spec.S_W
        self._pending = self._integral
        self._clamped = False

    def step(self, inp: ControlInput) -> ControlAction:
        N_sched, _ = self.to_model(inp.N_meas, 0.0, inp.ambient)
        Kp, Ki = flight_gain_correction(*self._schedule.gains(N_sched), inp.ambient)
        e: float = (inp.N_d - inp.N_meas) / self._spec.S_N
        self._pending = self._integral + Ki * e * self._dt
        v: float = Kp * e + self._pending
        return ControlAction(fuel=v * self._spec.S_W + self._spec.O_W)

    def on_applied(self, fuel: float, clamped: bool) -> None:
        super().on_applied(fuel, clamped)
        if not clamped:
            self._integral = self._pending
