"""Mode amplitudes C with N = C Phi(N)."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from koopjet.koopman.eigenfunctions import Eigenfunction
from koopjet.numerics.linalg import ridge_solve

logger = logging.getLogger(__name__)

ALPHA_C: float = 1e-6
PRUNE_TOL: float = 1e-4


@dataclass(frozen=True)
class ModeFit:
    """Amplitudes per state and which eigenfunctions survived pruning."""

    C: np.ndarray
    active: np.ndarray  # bool per eigenfunction
    mae: float


def stack_phi(eigenfunctions: list[Eigenfunction] | tuple[Eigenfunction, ...], N: np.ndarray) -> np.ndarray:
    """Stacked component values, shape (n_states, len(N))."""
    return np.vstack([ef.value(N) for ef in eigenfunctions])


def _state_slices(eigenfunctions: list[Eigenfunction] | tuple[Eigenfunction, ...]) -> list[slice]:
    slices: list[slice] = []
    start: int = 0
    for ef in eigenfunctions:
        slices.append(slice(start, start + ef.dimension))
        start += ef.dimension
    return slices


def _prune(C: np.ndarray, eigenfunctions, tol: float) -> np.ndarray:
    active: np.ndarray = np.array([np.max(np.abs(C[s])) > tol for s in _state_slices(eigenfunctions)])
    # A distinct eigenfunction stays while a generalized partner uses it.
    for i, ef in enumerate(eigenfunctions):
        if active[i] and ef.partner is not None:
            active[ef.partner] = True
    return active


def fit_modes(
    eigenfunctions: list[Eigenfunction] | tuple[Eigenfunction, ...],
    N_grid: np.ndarray,
    alpha_C: float = ALPHA_C,
    prune_tol: float = PRUNE_TOL,
) -> ModeFit:
    """Spatial fit: ridge regression of N on Phi(N) over a grid.

    Eigenfunctions whose amplitudes all fall below `prune_tol` are marked
    inactive and the remaining amplitudes are refit.
    """
    if not eigenfunctions:
        raise ValueError("At least one eigenfunction is required.")
    N_grid = np.asarray(N_grid, dtype=float)
    Phi: np.ndarray = stack_phi(eigenfunctions, N_grid)
    C: np.ndarray = ridge_solve(Phi, N_grid[None, :], alpha_C)[0]
    active: np.ndarray = _prune(C, eigenfunctions, prune_tol)
    if not np.all(active):
        keep: np.ndarray = np.concatenate(
            [np.full(ef.dimension, on) for ef, on in zip(eigenfunctions, active)]
        )
        C = np.zeros_like(C)
        if np.any(keep):
            C[keep] = ridge_solve(Phi[keep], N_grid[None, :], alpha_C)[0]
        logger.info(f"Pruned {int(np.sum(~active))} inactive mode(s).")
    mae: float = float(np.mean(np.abs(N_grid - C @ Phi)))
    return ModeFit(C=C, active=active, mae=mae)


def lambda_matrix(eigenfunctions: list[Eigenfunction] | tuple[Eigenfunction, ...]) -> np.ndarray:
    """Real block form of the spectrum with secular couplings.

    A generalized eigenfunction evolves as d/dt phi_g = M phi_g + phi_partner.
    """
    slices: list[slice] = _state_slices(eigenfunctions)
    n: int = slices[-1].stop if slices else 0
    Lam: np.ndarray = np.zeros((n, n))
    for ef, s in zip(eigenfunctions, slices):
        Lam[s, s] = ef.block
        if ef.partner is not None:
            ps: slice = slices[ef.partner]
            Lam[s, ps] += np.eye(ef.dimension)
    return Lam


def fit_modes_temporal(
    eigenfunctions: list[Eigenfunction] | tuple[Eigenfunction, ...],
    t: np.ndarray,
    N_traj: np.ndarray,
    alpha_C: float = ALPHA_C,
) -> np.ndarray:
    """Temporal fit: regress trajectories on exp(Lambda t) Phi(N0) of each row."""
    N_traj = np.atleast_2d(np.asarray(N_traj, dtype=float))
    t = np.asarray(t, dtype=float)
    Lam: np.ndarray = lambda_matrix(eigenfunctions)
    step: np.ndarray = scipy.linalg.expm(Lam * (t[1] - t[0])) if len(t) > 1 else np.eye(len(Lam))
    blocks: list[np.ndarray] = []
    for row in N_traj:
        phi: np.ndarray = stack_phi(eigenfunctions, np.array([row[0]]))[:, 0]
        states: np.ndarray = np.empty((len(Lam), len(t)))
        for k in range(len(t)):
            states[:, k] = phi
            phi = step @ phi
        blocks.append(states)
    Phi_t: np.ndarray = np.hstack(blocks)
    return ridge_solve(Phi_t, N_traj.ravel()[None, :], alpha_C)[0]
