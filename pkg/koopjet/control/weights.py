"""Genetic search of the K-LQGI weights against a closed-loop tracking cost with margin constraints."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any

import numpy as np
import scipy.linalg
from pydantic import BaseModel

from koopjet.bench.metrics import weighted_iae
from koopjet.bench.scenarios import DEFAULT_SCENARIO_CONFIG, N_REL_MAX, N_REL_MIN, ScenarioConfig, canonical_profile, error_weight
from koopjet.config import N_NOMINAL
from koopjet.control.lqgi import LqgiWeights, LqiSchedule, lqi_design
from koopjet.control.margins import GM_MIN_DB, PM_MIN_DEG, MarginReport, margins
from koopjet.errors import CareError, InfeasibleDesignError
from koopjet.koopman.model import KoopmanModel
from koopjet.numerics.genetic import GaConfig, ga_minimize
from koopjet.plant.engine import fuel_lag_factor
from koopjet.sindy.model import steady_fuel

logger = logging.getLogger(__name__)

TABLE_POINTS: int = 1001


class WeightSearchConfig(BaseModel):
    """GA sizing, decision bounds, cost weights and the simulated command limits.

    The decision vector is (log10 Q_i, log10 Q_f, log10 R_c, d_1 .. d_n) with
    Q_N = 1 fixed as the scale anchor.
    """

    population: int = 100
    generations: int = 100
    elite_count: int = 3
    seed: int = 0
    log_bounds: tuple[float, float] = (-2.0, 4.0)
    dq_bound: float = 0.5
    alpha_os: float = 100.0
    alpha_us: float = 100.0
    gm_min: float = GM_MIN_DB
    pm_min: float = PM_MIN_DEG
    margin_penalty: float = 1e3
    grid_points: int = 21
    T_f: float = 0.1  # s
    dt: float = 0.01  # s
    v_bounds: tuple[float, float] = (-0.05, 1.2)  # normalized corrected fuel command
    scenario: ScenarioConfig = DEFAULT_SCENARIO_CONFIG
    workers: int = 1
    progress: bool = False

    def ga(self, n: int) -> GaConfig:
        lo, hi = self.log_bounds
        bounds: list[tuple[float, float]] = [(lo, hi)] * 3 + [(-self.dq_bound, self.dq_bound)] * n
        return GaConfig(
            population=self.population,
            generations=self.generations,
            elite_count=self.elite_count,
            bounds=bounds,
            seed=self.seed,
            progress=self.progress,
        )


DEFAULT_WEIGHT_SEARCH_CONFIG: WeightSearchConfig = WeightSearchConfig()
# Reduced GA sizing for quick runs and tests.
SMOKE_WEIGHT_SEARCH_CONFIG: WeightSearchConfig = WeightSearchConfig(population=30, generations=30)


def decision_dimension(n: int) -> int:
    return 3 + n


def decode(x: np.ndarray) -> LqgiWeights:
    x = np.asarray(x, dtype=float)
    return LqgiWeights(Q_N=1.0, Q_i=10.0 ** x[0], Q_f=10.0 ** x[1], R_c=10.0 ** x[2], dQ=x[3:].tolist())


def encode(weights: LqgiWeights, n: int) -> np.ndarray:
    """Decision vector of `weights` relative to Q_N; missing perturbations are zero."""
    d: list[float] = list(weights.dQ) if weights.dQ else [0.0] * n
    scale: float = weights.Q_N
    return np.array(
        [math.log10(weights.Q_i / scale), math.log10(weights.Q_f / scale), math.log10(weights.R_c / scale), *d]
    )


@dataclass(frozen=True)
class KemLoop:
    """Discrete closed loop of the KEM under state feedback, tabulated on a speed grid.

    Phi advances by exp(Lambda dt) and the zero-order-hold input map; the fuel
    follows the exact first-order lag and the command is clipped to
    `v_bounds`, the error integral being held while clipped.
    """

    model: KoopmanModel
    t: np.ndarray
    N_d: np.ndarray  # normalized demand
    N_rel_d: np.ndarray
    dt: float
    T_f: float
    v_bounds: tuple[float, float]
    Ad: np.ndarray = field(init=False)
    Gd_table: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        n: int = self.model.n
        block: np.ndarray = np.zeros((2 * n, 2 * n))
        block[:n, :n] = self.model.Lambda
        block[:n, n:] = np.eye(n)
        E: np.ndarray = scipy.linalg.expm(block * self.dt)
        grid: np.ndarray = np.linspace(0.0, 1.0, TABLE_POINTS)
        object.__setattr__(self, "Ad", E[:n, :n])
        object.__setattr__(self, "Gd_table", (E[:n, n:] @ self.model.input_map(grid)).T)

    def _lookup(self, table: np.ndarray, N: float) -> np.ndarray:
        p: float = min(max(N, 0.0), 1.0) * (TABLE_POINTS - 1)
        i: int = min(int(p), TABLE_POINTS - 2)
        frac: float = p - i
        return (1.0 - frac) * table[i] + frac * table[i + 1]

    def simulate(self, schedule: LqiSchedule) -> np.ndarray:
        """Normalized speed response to the demand under the scheduled LQI law."""
        model: KoopmanModel = self.model
        K_table: np.ndarray = schedule.K(np.linspace(0.0, 1.0, TABLE_POINTS))
        lag: float = fuel_lag_factor(self.dt, self.T_f)
        v_lo, v_hi = self.v_bounds

        N0: float = float(self.N_d[0])
        Phi: np.ndarray = model.phi(N0)
        W_f: float = float(steady_fuel(model.sindy, N0))
        K0: np.ndarray = self._lookup(K_table, N0)
        eta: float = -(W_f + float(K0[:-1] @ np.append(Phi, W_f))) / float(K0[-1]) if abs(K0[-1]) > 1e-12 else 0.0

        out: np.ndarray = np.empty(len(self.t))
        for k in range(len(self.t)):
            N: float = float(model.C @ Phi)
            out[k] = N
            if not math.isfinite(N) or abs(N) > 10.0:
                out[k:] = np.nan
                break
            K: np.ndarray = self._lookup(K_table, N)
            eta_next: float = eta + (float(self.N_d[k]) - N) * self.dt
            v: float = -float(K[:-1] @ np.append(Phi, W_f)) - float(K[-1]) * eta_next
            v_applied: float = min(max(v, v_lo), v_hi)
            if v_applied == v:
                eta = eta_next
            Phi = self.Ad @ Phi + self._lookup(self.Gd_table, N) * W_f
            W_f = W_f + lag * (v_applied - W_f)
        return out

    def tracking_cost(self, N: np.ndarray, alpha_os: float, alpha_us: float) -> float:
        """Weighted IAE of the relative speed plus terminal overshoot and undershoot terms."""
        if not np.all(np.isfinite(N)):
            return math.inf
        N_rel: np.ndarray = np.asarray(self.model.normalization.denormalize_speed(N)) / N_NOMINAL
        wiae: float = weighted_iae(self.t, self.N_rel_d - N_rel, error_weight(self.t))
        return wiae + alpha_os * abs(float(np.max(N_rel)) - N_REL_MAX) + alpha_us * abs(float(np.min(N_rel)) - N_REL_MIN)


def build_loop(model: KoopmanModel, config: WeightSearchConfig = DEFAULT_WEIGHT_SEARCH_CONFIG) -> KemLoop:
    """Closed-loop simulator on the canonical profile at sea-level static conditions."""
    scenario = canonical_profile(config.scenario.model_copy(update={"dt": config.dt}))
    N_d: np.ndarray = np.asarray(model.normalization.normalize_speed(scenario.N_d))
    return KemLoop(
        model=model,
        t=scenario.t,
        N_d=N_d,
        N_rel_d=scenario.N_rel_d,
        dt=config.dt,
        T_f=config.T_f,
        v_bounds=config.v_bounds,
    )


@dataclass(frozen=True)
class WeightEvaluation:
    weights: LqgiWeights
    cost: float
    tracking: float
    penalty: float
    feasible: bool
    schedule: LqiSchedule | None = None
    report: MarginReport | None = None

    def summary(self) -> dict[str, Any]:
        return {
            "weights": self.weights.model_dump(),
            "cost": self.cost,
            "tracking": self.tracking,
            "penalty": self.penalty,
            "feasible": self.feasible,
            "margins": None if self.report is None else self.report.to_dict(),
        }


def evaluate_weights(
    loop: KemLoop, weights: LqgiWeights, config: WeightSearchConfig = DEFAULT_WEIGHT_SEARCH_CONFIG
) -> WeightEvaluation:
    """Design the schedule for `weights`, check margins and simulate the tracking cost.

    A failed Riccati solve or an unstable grid point gives an infinite cost.
    """
    try:
        schedule: LqiSchedule = lqi_design(loop.model, weights, config.T_f, config.grid_points)
    except CareError as e:
        logger.debug("Candidate rejected: %s", e)
        return WeightEvaluation(weights=weights, cost=math.inf, tracking=math.inf, penalty=math.inf, feasible=False)
    report: MarginReport = margins(loop.model, schedule, config.T_f)
    if np.any(report.table["max_real_cl"] >= 0.0):
        return WeightEvaluation(weights, math.inf, math.inf, math.inf, False, schedule, report)
    shortfall: float = max(0.0, config.gm_min - report.gm_min) / config.gm_min + max(0.0, config.pm_min - report.pm_min) / config.pm_min
    penalty: float = config.margin_penalty * shortfall
    tracking: float = loop.tracking_cost(loop.simulate(schedule), config.alpha_os, config.alpha_us)
    return WeightEvaluation(
        weights=weights,
        cost=tracking + penalty,
        tracking=tracking,
        penalty=penalty,
        feasible=shortfall == 0.0,
        schedule=schedule,
        report=report,
    )


def _candidate_cost(x: np.ndarray, loop: KemLoop, config: WeightSearchConfig) -> float:
    return evaluate_weights(loop, decode(x), config).cost


def _population_cost(pop: np.ndarray, loop: KemLoop, config: WeightSearchConfig) -> np.ndarray:
    task = partial(_candidate_cost, loop=loop, config=config)
    if config.workers <= 1:
        return np.array([task(x) for x in pop])
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return np.fromiter(pool.map(task, pop), dtype=float, count=len(pop))


@dataclass(frozen=True)
class WeightSearchResult:
    best: WeightEvaluation
    seed: WeightEvaluation
    history: list[float]


def optimize_weights(
    model: KoopmanModel,
    config: WeightSearchConfig = DEFAULT_WEIGHT_SEARCH_CONFIG,
    seed_weights: LqgiWeights | None = None,
) -> WeightSearchResult:
    """GA minimization of the closed-loop tracking cost under the margin constraints.

    The seed weights (Q = I, R = 1 unless given) join the first population,
    so elitism keeps the result no worse than the seed.

    Raises:
        InfeasibleDesignError: If the best candidate violates the margin
            constraints; the report carries that candidate.
    """
    n: int = model.n
    loop: KemLoop = build_loop(model, config)
    seed: LqgiWeights = seed_weights or LqgiWeights(dQ=[0.0] * n)
    x_seed: np.ndarray = encode(seed, n)
    history: list[float] = []

    def record(generation: int, best_x: np.ndarray, best_cost: float) -> None:
        history.append(best_cost)
        logger.debug("GA generation %d: cost=%.6g", generation, best_cost)

    best_x: np.ndarray = ga_minimize(
        partial(_population_cost, loop=loop, config=config),
        config.ga(n),
        initial_positions=x_seed[None, :],
        vectorized=True,
        callback=record,
    )
    best: WeightEvaluation = evaluate_weights(loop, decode(best_x), config)
    seed_eval: WeightEvaluation = evaluate_weights(loop, decode(x_seed), config)
    logger.info(
        "Weight search: cost %.6g (seed %.6g), GM_min=%.2f dB, PM_min=%.1f deg",
        best.cost,
        seed_eval.cost,
        best.report.gm_min if best.report else math.nan,
        best.report.pm_min if best.report else math.nan,
    )
    if not best.feasible:
        raise InfeasibleDesignError("No candidate weights met the margin constraints.", report=best.summary())
    return WeightSearchResult(best=best, seed=seed_eval, history=history)
