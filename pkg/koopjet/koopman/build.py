"""End-to-end Koopman model construction from an identified SINDy model."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field

from koopjet.config import DT
from koopjet.datakit.normalization import DEFAULT_NORMALIZATION, NormalizationSpec
from koopjet.errors import FitError
from koopjet.koopman.eigenfunctions import (
    DEFAULT_EIGENFUNCTION_CONFIG,
    Eigenfunction,
    EigenfunctionConfig,
    EigenfunctionFit,
    fit_eigenfunction,
)
from koopjet.koopman.lpv import lpv_decompose
from koopjet.koopman.model import KoopmanModel
from koopjet.koopman.modes import ALPHA_C, PRUNE_TOL, ModeFit, fit_modes, fit_modes_temporal
from koopjet.koopman.sampling import nonlinear_sampling
from koopjet.koopman.spectrum import (
    DEFAULT_SPECTRUM_CONFIG,
    EigenvalueSet,
    SpectrumConfig,
    SpectrumFit,
    optimize_eigenvalues,
)
from koopjet.numerics.swarm import SwarmConfig
from koopjet.sindy.model import SindyModel
from koopjet.sindy.simulate import AUTONOMOUS_FLOOR, AUTONOMOUS_T_MAX, gen_autonomous

logger = logging.getLogger(__name__)


class KoopmanConfig(BaseModel):
    """Settings of spectrum search, eigenfunction fits and the input map."""

    order: int = 6
    mode: Literal["real", "complex"] = "complex"
    sweep_orders: list[int] = Field(default_factory=lambda: [4, 5, 6, 7, 8])
    n_initial_conditions: int = 10
    ic_range: tuple[float, float] = (0.1, 1.0)
    dt: float = DT
    t_max: float = AUTONOMOUS_T_MAX
    floor: float = AUTONOMOUS_FLOOR
    spectrum: SpectrumConfig = DEFAULT_SPECTRUM_CONFIG
    swarm_population: int = 200
    swarm_iters: int = 100
    seed: int = 0
    sampling_kind: Literal["exponential", "power"] = "exponential"
    sampling_count: int = 500
    sampling_param: float = 5.0
    eigenfunction: EigenfunctionConfig = DEFAULT_EIGENFUNCTION_CONFIG
    alpha_C: float = ALPHA_C
    prune_tol: float = PRUNE_TOL
    mode_grid_points: int = 201
    lpv_m: int = 8  # 0 disables the decomposition
    use_lpv: bool = False
    progress: bool = False

    def swarm(self, seed_offset: int = 0) -> SwarmConfig:
        # Bounds are replaced by the caller.
        return SwarmConfig(
            population=self.swarm_population,
            max_iters=self.swarm_iters,
            seed=self.seed + seed_offset,
            bounds=[(0.0, 1.0)],
            progress=self.progress,
        )


DEFAULT_KOOPMAN_CONFIG: KoopmanConfig = KoopmanConfig()


@dataclass
class KoopmanBuild:
    model: KoopmanModel
    spectrum: SpectrumFit
    eigenfunction_fits: list[EigenfunctionFit]
    modes: ModeFit
    temporal_C: np.ndarray
    lpv_error: float | None = None
    report: dict[str, Any] = field(default_factory=dict)


def autonomous_trajectories(sindy: SindyModel, config: KoopmanConfig) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = config.ic_range
    ics: np.ndarray = np.linspace(lo, hi, config.n_initial_conditions)
    return gen_autonomous(sindy, ics, dt=config.dt, t_max=config.t_max, floor=config.floor)


def _fit_all(sindy: SindyModel, fit: SpectrumFit, config: KoopmanConfig) -> list[EigenfunctionFit]:
    samples: np.ndarray = nonlinear_sampling(config.sampling_count, config.sampling_kind, config.sampling_param)
    eigen_config: EigenfunctionConfig = config.eigenfunction.model_copy(update={"progress": config.progress})
    fits: list[EigenfunctionFit] = []
    for entry in fit.eigs.active:
        partner: Eigenfunction | None = None
        partner_index: int | None = None
        if entry.tag == "repeated-secular":
            partner_index = len(fits) - 1
            partner = fits[partner_index].eigenfunction
        fits.append(fit_eigenfunction(entry, sindy.f, samples, eigen_config, partner, partner_index))
    return fits


def _keep(eigenfunctions: list[Eigenfunction], active: np.ndarray) -> list[Eigenfunction]:
    index: dict[int, int] = {}
    kept: list[Eigenfunction] = []
    for old, (ef, on) in enumerate(zip(eigenfunctions, active)):
        if not on:
            continue
        index[old] = len(kept)
        partner: int | None = index.get(ef.partner) if ef.partner is not None else None
        kept.append(replace(ef, partner=partner))
    return kept


def kept_spectrum(eigenfunctions: list[Eigenfunction]) -> EigenvalueSet:
    """Spectrum of the eigenfunctions that survived pruning, in model order."""
    return EigenvalueSet(entries=tuple(ef.entry for ef in eigenfunctions))


def build_koopman(
    sindy: SindyModel,
    config: KoopmanConfig = DEFAULT_KOOPMAN_CONFIG,
    normalization: NormalizationSpec = DEFAULT_NORMALIZATION,
    order: int | None = None,
    mode: Literal["real", "complex"] | None = None,
) -> KoopmanBuild:
    """Spectrum, eigenfunctions, amplitudes and input map for `sindy`.

    Raises:
        FitError: If no mode survives or an eigenfunction fit fails.
    """
    order = order or config.order
    mode = mode or config.mode
    t, N_traj = autonomous_trajectories(sindy, config)
    spectrum_config: SpectrumConfig = config.spectrum
    fit: SpectrumFit = optimize_eigenvalues(t, N_traj, order, mode, config.swarm(), spectrum_config)

    eigen_fits: list[EigenfunctionFit] = _fit_all(sindy, fit, config)
    eigenfunctions: list[Eigenfunction] = [f.eigenfunction for f in eigen_fits]
    grid: np.ndarray = np.linspace(0.0, 1.0, config.mode_grid_points)
    modes: ModeFit = fit_modes(eigenfunctions, grid, config.alpha_C, config.prune_tol)
    if not np.any(modes.active):
        raise FitError("Every mode amplitude was pruned.")
    kept: list[Eigenfunction] = _keep(eigenfunctions, modes.active)
    state_keep: np.ndarray = np.concatenate([np.full(ef.dimension, on) for ef, on in zip(eigenfunctions, modes.active)])
    C: np.ndarray = modes.C[state_keep]
    temporal_C: np.ndarray = fit_modes_temporal(kept, t, N_traj, config.alpha_C)
    cross_check: float = float(np.linalg.norm(C - temporal_C) / max(np.linalg.norm(C), 1e-12))

    model = KoopmanModel(
        eigs=kept_spectrum(kept),
        eigenfunctions=tuple(kept),
        C=C,
        sindy=sindy,
        normalization=normalization,
        use_lpv=config.use_lpv,
        lineage={"order": order, "mode": mode, "spectrum_mae": fit.mae, "mode_mae": modes.mae},
    )

    lpv_error: float | None = None
    if config.lpv_m > 0:
        lpv, lpv_error = lpv_decompose(model.input_map_exact, config.lpv_m, swarm=config.swarm(seed_offset=1))
        model = replace(model, lpv=lpv)

    report: dict[str, Any] = {
        "order": order,
        "mode": mode,
        "spectrum": fit.eigs.to_dict(),
        "spectrum_cost": fit.cost,
        "spectrum_mae": fit.mae,
        "kpde_residuals": [f.residual for f in eigen_fits],
        "mode_mae": modes.mae,
        "active_modes": modes.active.tolist(),
        "temporal_vs_spatial_C": cross_check,
        "lpv_m": config.lpv_m,
        "lpv_relative_error": lpv_error,
    }
    logger.info(
        f"KEM order {order} ({mode}): spectrum MAE {fit.mae:.3g}, reconstruction MAE {modes.mae:.3g}, "
        f"{model.n} states."
    )
    return KoopmanBuild(
        model=model,
        spectrum=fit,
        eigenfunction_fits=eigen_fits,
        modes=modes,
        temporal_C=temporal_C,
        lpv_error=lpv_error,
        report=report,
    )


def order_sweep(
    sindy: SindyModel,
    config: KoopmanConfig = DEFAULT_KOOPMAN_CONFIG,
    normalization: NormalizationSpec = DEFAULT_NORMALIZATION,
    modes: tuple[Literal["real", "complex"], ...] = ("complex",),
) -> list[KoopmanBuild]:
    """One KEM per (order, mode) combination; failures are logged and skipped."""
    builds: list[KoopmanBuild] = []
    for mode in modes:
        for order in config.sweep_orders:
            try:
                builds.append(build_koopman(sindy, config, normalization, order=order, mode=mode))
            except FitError as e:
                logger.warning(f"KEM order {order} ({mode}) failed: {e}")
    return builds
