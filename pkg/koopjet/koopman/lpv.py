"""Parameter-affine approximation of the input map G(N) ~ G_tilde rho(N)."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from koopjet.numerics.linalg import ridge_solve
from koopjet.numerics.swarm import SwarmConfig, pso_minimize
from koopjet.sindy.logistic import logistic_matrix

logger = logging.getLogger(__name__)

ALPHA_G: float = 1e-8
EPS_BOUNDS: tuple[float, float] = (0.5, 50.0)
MU_BOUNDS: tuple[float, float] = (-0.2, 1.2)
LPV_GRID_POINTS: int = 201


@dataclass(frozen=True)
class LpvInputModel:
    """Scheduling functions rho = [1, LF_1, ..., LF_{m-1}] and basis matrices G_tilde (n x m)."""

    eps: np.ndarray
    mu: np.ndarray
    G_tilde: np.ndarray

    @property
    def m(self) -> int:
        return self.G_tilde.shape[1]

    def rho(self, N: np.ndarray | float) -> np.ndarray:
        """Scheduling values, shape (m, len(N))."""
        N_arr: np.ndarray = np.atleast_1d(np.asarray(N, dtype=float))
        return np.vstack([np.ones((1, len(N_arr))), logistic_matrix(N_arr, self.eps, self.mu).T])

    def G(self, N: np.ndarray | float) -> np.ndarray:
        """Approximate input map, shape (n, len(N))."""
        return self.G_tilde @ self.rho(N)

    def discrete_basis(self, Lam: np.ndarray, dt: float) -> np.ndarray:
        """G_tilde_d = Lambda^-1 (exp(Lambda dt) - I) G_tilde."""
        L: np.ndarray = scipy.linalg.expm(Lam * dt)
        return np.linalg.solve(Lam, (L - np.eye(len(Lam))) @ self.G_tilde)

    def to_dict(self) -> dict:
        return {"eps": self.eps.tolist(), "mu": self.mu.tolist(), "G_tilde": self.G_tilde.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> LpvInputModel:
        return cls(
            eps=np.asarray(payload["eps"], dtype=float),
            mu=np.asarray(payload["mu"], dtype=float),
            G_tilde=np.atleast_2d(np.asarray(payload["G_tilde"], dtype=float)),
        )


def _solve(G: np.ndarray, N: np.ndarray, eps: np.ndarray, mu: np.ndarray, alpha_g: float) -> tuple[LpvInputModel, float]:
    rho: np.ndarray = np.vstack([np.ones((1, len(N))), logistic_matrix(N, eps, mu).T])
    G_tilde: np.ndarray = ridge_solve(rho, G, alpha_g)
    err: float = float(np.sum((G - G_tilde @ rho) ** 2))
    return LpvInputModel(eps=eps, mu=mu, G_tilde=G_tilde), err


def lpv_decompose(
    input_map: Callable[[np.ndarray], np.ndarray],
    m: int,
    swarm: SwarmConfig | None = None,
    N_grid: np.ndarray | None = None,
    alpha_g: float = ALPHA_G,
    initial: LpvInputModel | None = None,
) -> tuple[LpvInputModel, float]:
    """Fit m scheduling functions and their basis matrices.

    PSO searches the logistic parameters; for each candidate G_tilde is the
    ridge solution. `initial`, a decomposition with fewer functions, seeds
    the swarm so the error never exceeds the smaller decomposition's.

    Returns:
        The decomposition and its relative Frobenius reconstruction error.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}.")
    N: np.ndarray = np.linspace(0.0, 1.0, LPV_GRID_POINTS) if N_grid is None else np.asarray(N_grid, dtype=float)
    G: np.ndarray = np.atleast_2d(input_map(N))
    scale: float = float(np.linalg.norm(G)) or 1.0
    k: int = m - 1

    if k == 0:
        model, err = _solve(G, N, np.zeros(0), np.zeros(0), alpha_g)
        return model, float(np.sqrt(err)) / scale

    bounds: list[tuple[float, float]] = [EPS_BOUNDS] * k + [MU_BOUNDS] * k
    swarm = (swarm or SwarmConfig(bounds=bounds)).model_copy(update={"bounds": bounds})

    def objective(x: np.ndarray) -> float:
        try:
            return _solve(G, N, x[:k], x[k:], alpha_g)[1]
        except ValueError:
            return float("inf")

    seeds: np.ndarray | None = None
    if initial is not None and initial.m <= m:
        extra: int = m - initial.m
        eps_seed: np.ndarray = np.concatenate([initial.eps, np.full(extra, 10.0)])
        mu_seed: np.ndarray = np.concatenate([initial.mu, np.linspace(0.2, 0.8, extra)])
        seeds = np.concatenate([eps_seed, mu_seed])[None, :]

    best_x, _ = pso_minimize(objective, swarm, initial_positions=seeds)
    model, err = _solve(G, N, best_x[:k], best_x[k:], alpha_g)
    rel: float = float(np.sqrt(err)) / scale
    logger.info(f"LPV decomposition with m={m}: relative error {rel:.3g}.")
    return model, rel


def lpv_sweep(
    input_map: Callable[[np.ndarray], np.ndarray],
    m_values: list[int],
    swarm: SwarmConfig | None = None,
    alpha_g: float = ALPHA_G,
) -> dict[int, tuple[LpvInputModel, float]]:
    """Decompositions for increasing m, each seeded by the previous one."""
    results: dict[int, tuple[LpvInputModel, float]] = {}
    previous: LpvInputModel | None = None
    for m in sorted(m_values):
        results[m] = lpv_decompose(input_map, m, swarm=swarm, alpha_g=alpha_g, initial=previous)
        previous = results[m][0]
    return results
