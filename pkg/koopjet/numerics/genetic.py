"""Elitist real-coded genetic algorithm."""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np
from pydantic import BaseModel, model_validator
from scipy.stats import qmc
from tqdm import tqdm

logger = logging.getLogger(__name__)


class GaConfig(BaseModel):
    """Population sizing and operator rates of the genetic algorithm."""

    population: int = 100
    generations: int = 100
    elite_count: int = 3
    bounds: list[tuple[float, float]]
    seed: int = 0
    latin_hypercube: bool = True
    tournament_size: int = 3
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    mutation_scale: float = 0.1  # Gaussian sigma as a fraction of the box width
    progress: bool = False

    @model_validator(mode="after")
    def _check(self) -> GaConfig:
        if not self.bounds:
            raise ValueError("bounds must contain at least one dimension.")
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"Each bound needs finite lo < hi, got ({lo}, {hi}).")
        if self.population < 2:
            raise ValueError(f"population must be >= 2, got {self.population}.")
        if not 1 <= self.elite_count < self.population:
            raise ValueError(
                f"elite_count must lie in [1, population), got {self.elite_count} for population {self.population}."
            )
        return self

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper bound vectors."""
        arr: np.ndarray = np.asarray(self.bounds, dtype=float)
        return arr[:, 0], arr[:, 1]


def _initial_population(config: GaConfig, rng: np.random.Generator) -> np.ndarray:
    lo, hi = config.box()
    if config.latin_hypercube:
        sampler: qmc.LatinHypercube = qmc.LatinHypercube(d=len(lo), seed=rng)
        return qmc.scale(sampler.random(n=config.population), lo, hi)
    return lo + rng.random((config.population, len(lo))) * (hi - lo)


def _tournament(costs: np.ndarray, size: int, count: int, rng: np.random.Generator) -> np.ndarray:
    contenders: np.ndarray = rng.integers(0, len(costs), size=(count, size))
    winners: np.ndarray = np.argmin(costs[contenders], axis=1)
    return contenders[np.arange(count), winners]


def ga_minimize(
    objective: Callable[[np.ndarray], float],
    config: GaConfig,
    initial_positions: np.ndarray | None = None,
    vectorized: bool = False,
    callback: Callable[[int, np.ndarray, float], None] | None = None,
) -> np.ndarray:
    """Minimize `objective` with tournament selection, uniform crossover and Gaussian mutation.

    The `elite_count` best individuals are copied unchanged into every new
    generation, so the best cost never increases.

    Args:
        objective: Cost of one decision vector, or of a (population, dim)
            matrix when `vectorized` is set.
        config: GA configuration.
        initial_positions: Optional individuals that replace the first rows
            of the initial population.
        vectorized: Whether `objective` evaluates a whole population at once.
        callback: Called after every generation with (generation, best_x, best_cost).

    Returns:
        Best decision vector found.
    """
    lo, hi = config.box()
    dim: int = len(lo)
    rng: np.random.Generator = np.random.default_rng(config.seed)

    population: np.ndarray = _initial_population(config, rng)
    if initial_positions is not None:
        seeds: np.ndarray = np.atleast_2d(np.asarray(initial_positions, dtype=float))
        if seeds.shape[1] != dim:
            raise ValueError(f"initial_positions have {seeds.shape[1]} columns, expected {dim}.")
        count: int = min(len(seeds), config.population)
        population[:count] = np.clip(seeds[:count], lo, hi)

    def evaluate(pop: np.ndarray) -> np.ndarray:
        if vectorized:
            values: np.ndarray = np.asarray(objective(pop), dtype=float).reshape(len(pop))
        else:
            values = np.array([float(objective(p)) for p in pop])
        return np.where(np.isfinite(values), values, np.inf)

    costs: np.ndarray = evaluate(population)
    sigma: np.ndarray = config.mutation_scale * (hi - lo)
    n_children: int = config.population - config.elite_count

    for generation in tqdm(range(config.generations), desc="ga", disable=not config.progress):
        order: np.ndarray = np.argsort(costs, kind="stable")
        elites: np.ndarray = population[order[: config.elite_count]]
        elite_costs: np.ndarray = costs[order[: config.elite_count]]

        parents_a: np.ndarray = population[_tournament(costs, config.tournament_size, n_children, rng)]
        parents_b: np.ndarray = population[_tournament(costs, config.tournament_size, n_children, rng)]
        mask: np.ndarray = rng.random((n_children, dim)) < 0.5
        crossed: np.ndarray = np.where(mask, parents_a, parents_b)
        do_cross: np.ndarray = rng.random(n_children) < config.crossover_rate
        children: np.ndarray = np.where(do_cross[:, None], crossed, parents_a)

        mutate: np.ndarray = rng.random((n_children, dim)) < config.mutation_rate
        children = children + mutate * rng.normal(0.0, 1.0, size=(n_children, dim)) * sigma
        children = np.clip(children, lo, hi)

        population = np.vstack([elites, children])
        costs = np.concatenate([elite_costs, evaluate(children)])

        best: int = int(np.argmin(costs))
        if callback is not None:
            callback(generation, population[best].copy(), float(costs[best]))

    best_idx: int = int(np.argmin(costs))
    logger.debug("GA finished: cost=%.6g generations=%d", costs[best_idx], config.generations)
    return population[best_idx].copy()
