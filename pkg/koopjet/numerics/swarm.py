"""Particle swarm optimization over a box."""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np
from pydantic import BaseModel, field_validator, model_validator
from tqdm import tqdm

logger = logging.getLogger(__name__)


class SwarmConfig(BaseModel):
    """Swarm size, search box and velocity weights."""

    population: int = 200
    bounds: list[tuple[float, float]]
    max_iters: int = 100
    inertia: float = 0.729
    cognitive: float = 1.49
    social: float = 1.49
    seed: int = 0
    velocity_fraction: float = 0.2  # Max speed as a fraction of the box width
    progress: bool = False

    @field_validator("population")
    @classmethod
    def _check_population(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f"population must be >= 2, got {value}.")
        return value

    @model_validator(mode="after")
    def _check_bounds(self) -> SwarmConfig:
        if not self.bounds:
            raise ValueError("bounds must contain at least one dimension.")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"Each bound needs lo < hi, got ({lo}, {hi}).")
        return self

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper bound vectors."""
        arr: np.ndarray = np.asarray(self.bounds, dtype=float)
        return arr[:, 0], arr[:, 1]


def _evaluate(
    objective: Callable,
    positions: np.ndarray,
    vectorized: bool,
) -> np.ndarray:
    if vectorized:
        return np.asarray(objective(positions), dtype=float).reshape(len(positions))
    return np.array([float(objective(p)) for p in positions])


def pso_minimize(
    objective: Callable[[np.ndarray], float],
    config: SwarmConfig,
    initial_positions: np.ndarray | None = None,
    vectorized: bool = False,
) -> tuple[np.ndarray, float]:
    """Minimize `objective` inside the configured box.

    Positions are clamped to the box after every move, so the objective is
    never evaluated outside it. Non-finite costs are treated as +inf.

    Args:
        objective: Cost of one position vector, or of a (population, dim)
            matrix when `vectorized` is set.
        config: Swarm configuration.
        initial_positions: Optional candidates placed into the first
            population (rows beyond the population size are ignored).
        vectorized: Whether `objective` evaluates the whole swarm at once.

    Returns:
        Best position found and its cost.
    """
    lo, hi = config.box()
    dim: int = len(lo)
    width: np.ndarray = hi - lo
    rng: np.random.Generator = np.random.default_rng(config.seed)

    positions: np.ndarray = lo + rng.random((config.population, dim)) * width
    if initial_positions is not None:
        seeds: np.ndarray = np.atleast_2d(np.asarray(initial_positions, dtype=float))
        if seeds.shape[1] != dim:
            raise ValueError(f"initial_positions have {seeds.shape[1]} columns, expected {dim}.")
        count: int = min(len(seeds), config.population)
        positions[:count] = np.clip(seeds[:count], lo, hi)

    v_max: np.ndarray = config.velocity_fraction * width
    velocities: np.ndarray = rng.uniform(-v_max, v_max, size=(config.population, dim))

    costs: np.ndarray = _evaluate(objective, positions, vectorized)
    costs = np.where(np.isfinite(costs), costs, np.inf)
    personal_best: np.ndarray = positions.copy()
    personal_cost: np.ndarray = costs.copy()
    best_idx: int = int(np.argmin(personal_cost))
    global_best: np.ndarray = personal_best[best_idx].copy()
    global_cost: float = float(personal_cost[best_idx])

    for _ in tqdm(range(config.max_iters), desc="pso", disable=not config.progress):
        r1: np.ndarray = rng.random((config.population, dim))
        r2: np.ndarray = rng.random((config.population, dim))
        velocities = (
            config.inertia * velocities
            + config.cognitive * r1 * (personal_best - positions)
            + config.social * r2 * (global_best - positions)
        )
        velocities = np.clip(velocities, -v_max, v_max)
        positions = np.clip(positions + velocities, lo, hi)

        costs = _evaluate(objective, positions, vectorized)
        costs = np.where(np.isfinite(costs), costs, np.inf)
        improved: np.ndarray = costs < personal_cost
        personal_best[improved] = positions[improved]
        personal_cost[improved] = costs[improved]

        best_idx = int(np.argmin(personal_cost))
        if personal_cost[best_idx] < global_cost:
            global_cost = float(personal_cost[best_idx])
            global_best = personal_best[best_idx].copy()

    logger.debug("PSO finished: cost=%.6g dim=%d iters=%d", global_cost, dim, config.max_iters)
    return global_best, global_cost
