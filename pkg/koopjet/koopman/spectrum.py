"""Eigenvalue selection by temporal projection of autonomous trajectories."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, model_validator

from koopjet.errors import FitError
from koopjet.numerics.linalg import ridge_solve
from koopjet.numerics.swarm import SwarmConfig, pso_minimize

logger = logging.getLogger(__name__)

Tag = Literal["distinct", "repeated-secular", "merged-out"]

INVALID_COST: float = 1e6


class SpectrumConfig(BaseModel):
    """Admissible region and merge rules for eigenvalue candidates."""

    alpha_min: float = -10.0  # 1/s
    alpha_max: float = -0.3  # 1/s
    beta_max: float = 10.0  # rad/s
    ratio_max: float = 2.5  # |beta/alpha|
    merge_tol: float = 0.05
    beta_merge: float = 0.05  # pairs with |beta| below this become one real eigenvalue
    alpha_K: float = 1e-8

    @model_validator(mode="after")
    def _check(self) -> SpectrumConfig:
        if not self.alpha_min < self.alpha_max < 0.0:
            raise ValueError(f"Need alpha_min < alpha_max < 0, got {self.alpha_min}, {self.alpha_max}.")
        if self.beta_max <= 0.0 or self.ratio_max <= 0.0:
            raise ValueError("beta_max and ratio_max must be positive.")
        return self


DEFAULT_SPECTRUM_CONFIG: SpectrumConfig = SpectrumConfig()


@dataclass(frozen=True)
class EigenEntry:
    """One real eigenvalue, or a conjugate pair alpha +/- i*beta when beta > 0.

    A `repeated-secular` entry shares its value with the active entry
    right before it and contributes the secular basis rows.
    """

    alpha: float
    beta: float = 0.0
    tag: Tag = "distinct"

    @property
    def is_complex(self) -> bool:
        return self.beta > 0.0

    @property
    def dimension(self) -> int:
        if self.tag == "merged-out":
            return 0
        return 2 if self.is_complex else 1

    @property
    def value(self) -> complex:
        return complex(self.alpha, self.beta)


@dataclass(frozen=True)
class EigenvalueSet:
    entries: tuple[EigenEntry, ...] = field(default_factory=tuple)

    @property
    def active(self) -> tuple[EigenEntry, ...]:
        return tuple(e for e in self.entries if e.tag != "merged-out")

    @property
    def order(self) -> int:
        return sum(e.dimension for e in self.entries)

    def eigenvalues(self) -> np.ndarray:
        """Complex eigenvalues of the active entries, conjugates included."""
        values: list[complex] = []
        for e in self.active:
            values.append(e.value)
            if e.is_complex:
                values.append(e.value.conjugate())
        return np.array(values, dtype=complex)

    def to_dict(self) -> dict:
        return {"entries": [{"alpha": e.alpha, "beta": e.beta, "tag": e.tag} for e in self.entries]}

    @classmethod
    def from_dict(cls, payload: dict) -> EigenvalueSet:
        return cls(
            entries=tuple(
                EigenEntry(alpha=float(item["alpha"]), beta=float(item.get("beta", 0.0)), tag=item.get("tag", "distinct"))
                for item in payload["entries"]
            )
        )


def exp_basis(eigs: EigenvalueSet, t: np.ndarray) -> np.ndarray:
    """Exponential trajectories of the active entries, one row per state.

    Real entries give exp(lambda t); complex pairs give exp(alpha t) cos(beta t)
    and exp(alpha t) sin(beta t). Secular entries use (1 + t) times the same
    rows.

    Raises:
        ValueError: If no entry is active.
    """
    t = np.asarray(t, dtype=float)
    active: tuple[EigenEntry, ...] = eigs.active
    if not active:
        raise ValueError("Eigenvalue set has no active entry.")
    rows: list[np.ndarray] = []
    for e in active:
        decay: np.ndarray = np.exp(e.alpha * t)
        if e.tag == "repeated-secular":
            decay = (1.0 + t) * decay
        if e.is_complex:
            rows.append(decay * np.cos(e.beta * t))
            rows.append(decay * np.sin(e.beta * t))
        else:
            rows.append(decay)
    return np.vstack(rows)


def _pair_close(entries: list[EigenEntry], tol: float) -> list[EigenEntry]:
    """Greedy pairing of entries closer than `tol` in the complex plane.

    Entries must already be sorted by descending real part. Each pair is
    replaced by its mean; the second member becomes secular. Only entries
    of the same kind (real with real, complex with complex) are paired.
    """
    out: list[EigenEntry] = list(entries)
    paired: set[int] = set()
    for i in range(len(out)):
        if i in paired or out[i].tag == "merged-out":
            continue
        for j in range(i + 1, len(out)):
            if j in paired or out[j].tag == "merged-out" or out[j].is_complex != out[i].is_complex:
                continue
            distance: float = abs(out[i].value - out[j].value)
            if distance < tol:
                alpha: float = 0.5 * (out[i].alpha + out[j].alpha)
                beta: float = 0.5 * (out[i].beta + out[j].beta)
                out[i] = EigenEntry(alpha=alpha, beta=beta, tag="distinct")
                out[j] = EigenEntry(alpha=alpha, beta=beta, tag="repeated-secular")
                paired.update((i, j))
                break
    # Secular entries directly follow their partner.
    ordered: list[EigenEntry] = []
    pending: list[EigenEntry] = list(out)
    while pending:
        head: EigenEntry = pending.pop(0)
        ordered.append(head)
        if head.tag == "distinct":
            for k, cand in enumerate(pending):
                if cand.tag == "repeated-secular" and cand.value == head.value:
                    ordered.append(pending.pop(k))
                    break
    return ordered


def resolve_real(lambdas: np.ndarray | list[float], tol: float) -> EigenvalueSet:
    """Sort real candidates descending and merge neighbours closer than `tol`."""
    values: np.ndarray = np.sort(np.asarray(lambdas, dtype=float))[::-1]
    return EigenvalueSet(entries=tuple(_pair_close([EigenEntry(alpha=float(v)) for v in values], tol)))


def resolve_complex(
    alphas: np.ndarray | list[float],
    betas: np.ndarray | list[float],
    config: SpectrumConfig = DEFAULT_SPECTRUM_CONFIG,
) -> EigenvalueSet:
    """Apply the real-merge, oscillation-exclusion and pairing rules to candidates."""
    entries: list[EigenEntry] = []
    for a, b in zip(np.asarray(alphas, dtype=float), np.abs(np.asarray(betas, dtype=float))):
        if b < config.beta_merge:
            entries.append(EigenEntry(alpha=float(a)))
        elif abs(b / a) > config.ratio_max:
            entries.append(EigenEntry(alpha=float(a), beta=float(b), tag="merged-out"))
        else:
            entries.append(EigenEntry(alpha=float(a), beta=float(b)))
    entries.sort(key=lambda e: (-e.alpha, e.beta))
    return EigenvalueSet(entries=tuple(_pair_close(entries, config.merge_tol)))


def projection_error(eigs: EigenvalueSet, t: np.ndarray, N_traj: np.ndarray, alpha_K: float) -> tuple[float, np.ndarray]:
    """Squared Frobenius residual of N_traj against its ridge projection onto exp_basis.

    Returns:
        The residual and the amplitude matrix K of shape (n_traj, n_rows).
    """
    N_traj = np.atleast_2d(np.asarray(N_traj, dtype=float))
    E: np.ndarray = exp_basis(eigs, t)
    K: np.ndarray = ridge_solve(E, N_traj, alpha_K)
    residual: np.ndarray = N_traj - K @ E
    return float(np.sum(residual**2)), K


def eig_objective_real(
    lambdas: np.ndarray | list[float],
    t: np.ndarray,
    N_traj: np.ndarray,
    config: SpectrumConfig = DEFAULT_SPECTRUM_CONFIG,
) -> float:
    """Projection residual for real candidates, with automatic secular switching."""
    try:
        return projection_error(resolve_real(lambdas, config.merge_tol), t, N_traj, config.alpha_K)[0]
    except ValueError:
        return INVALID_COST


def eig_objective_complex(
    alphas: np.ndarray | list[float],
    betas: np.ndarray | list[float],
    t: np.ndarray,
    N_traj: np.ndarray,
    config: SpectrumConfig = DEFAULT_SPECTRUM_CONFIG,
) -> float:
    """Projection residual for complex candidates.

    Over-oscillatory pairs are left out of the basis, so they never lower
    the residual.
    """
    try:
        return projection_error(resolve_complex(alphas, betas, config), t, N_traj, config.alpha_K)[0]
    except ValueError:
        return INVALID_COST


@dataclass(frozen=True)
class SpectrumFit:
    eigs: EigenvalueSet
    cost: float
    mae: float
    K: np.ndarray


def _decode(x: np.ndarray, order: int, mode: str, config: SpectrumConfig) -> EigenvalueSet:
    if mode == "real":
        return resolve_real(x, config.merge_tol)
    n_pairs: int = order // 2
    alphas: list[float] = list(x[:n_pairs])
    betas: list[float] = list(x[n_pairs: 2 * n_pairs])
    if order % 2:
        alphas.append(float(x[-1]))
        betas.append(0.0)
    return resolve_complex(alphas, betas, config)


def optimize_eigenvalues(
    t: np.ndarray,
    N_traj: np.ndarray,
    order: int,
    mode: Literal["real", "complex"] = "complex",
    swarm: SwarmConfig | None = None,
    config: SpectrumConfig = DEFAULT_SPECTRUM_CONFIG,
) -> SpectrumFit:
    """Search the eigenvalues whose exponential trajectories best span N_traj.

    Args:
        t: Common time grid of the trajectories.
        N_traj: Trajectory matrix (n_traj, len(t)).
        order: Target state dimension. In complex mode it is covered by
            order // 2 conjugate pairs plus one real candidate when odd.
        mode: Candidate kind.
        swarm: PSO settings; its bounds are replaced by the admissible box.
        config: Admissible region and merge rules.

    Raises:
        FitError: If every candidate ends up excluded.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}.")
    if mode not in ("real", "complex"):
        raise ValueError(f"mode must be 'real' or 'complex', got '{mode}'.")
    N_traj = np.atleast_2d(np.asarray(N_traj, dtype=float))

    alpha_box: tuple[float, float] = (config.alpha_min, config.alpha_max)
    if mode == "real":
        bounds: list[tuple[float, float]] = [alpha_box] * order
    else:
        n_pairs: int = order // 2
        bounds = [alpha_box] * n_pairs + [(0.0, config.beta_max)] * n_pairs + [alpha_box] * (order % 2)
    swarm = (swarm or SwarmConfig(bounds=bounds)).model_copy(update={"bounds": bounds})

    def objective(x: np.ndarray) -> float:
        eigs: EigenvalueSet = _decode(x, order, mode, config)
        if not eigs.active:
            return INVALID_COST
        try:
            return projection_error(eigs, t, N_traj, config.alpha_K)[0]
        except ValueError:
            return INVALID_COST

    best_x, best_cost = pso_minimize(objective, swarm)
    eigs: EigenvalueSet = _decode(best_x, order, mode, config)
    if not eigs.active:
        raise FitError("Every eigenvalue candidate was excluded.", loss_trace=[best_cost])
    cost, K = projection_error(eigs, t, N_traj, config.alpha_K)
    mae: float = float(np.mean(np.abs(N_traj - K @ exp_basis(eigs, t))))
    logger.info(
        f"Eigenvalues ({mode}, order {order}): "
        + ", ".join(f"{e.alpha:.4g}{'' if not e.is_complex else f'±{e.beta:.4g}i'} [{e.tag}]" for e in eigs.entries)
        + f"; MAE {mae:.3g}."
    )
    return SpectrumFit(eigs=eigs, cost=cost, mae=mae, K=K)
