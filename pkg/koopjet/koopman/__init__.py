"""Koopman spectrum, eigenfunctions and the eigenfunction model (KEM)."""

from koopjet.koopman.build import DEFAULT_KOOPMAN_CONFIG, KoopmanBuild, KoopmanConfig, build_koopman, order_sweep
from koopjet.koopman.eigenfunctions import (
    DEFAULT_EIGENFUNCTION_CONFIG,
    EigenComponent,
    Eigenfunction,
    EigenfunctionConfig,
    EigenfunctionFit,
    fit_eigenfunction,
)
from koopjet.koopman.lpv import LpvInputModel, lpv_decompose, lpv_sweep
from koopjet.koopman.model import KoopmanModel, kem_rhs
from koopjet.koopman.modes import ModeFit, fit_modes, fit_modes_temporal, lambda_matrix
from koopjet.koopman.sampling import nonlinear_sampling
from koopjet.koopman.spectrum import (
    DEFAULT_SPECTRUM_CONFIG,
    EigenEntry,
    EigenvalueSet,
    SpectrumConfig,
    SpectrumFit,
    eig_objective_complex,
    eig_objective_real,
    exp_basis,
    optimize_eigenvalues,
    resolve_complex,
    resolve_real,
)
from koopjet.koopman.thrust import ThrustOutput, fit_thrust_output, normalize_thrust, thrust_mape

__all__ = [
    "DEFAULT_EIGENFUNCTION_CONFIG",
    "DEFAULT_KOOPMAN_CONFIG",
    "DEFAULT_SPECTRUM_CONFIG",
    "EigenComponent",
    "EigenEntry",
    "Eigenfunction",
    "EigenfunctionConfig",
    "EigenfunctionFit",
    "EigenvalueSet",
    "KoopmanBuild",
    "KoopmanConfig",
    "KoopmanModel",
    "LpvInputModel",
    "ModeFit",
    "SpectrumConfig",
    "SpectrumFit",
    "ThrustOutput",
    "build_koopman",
    "eig_objective_complex",
    "eig_objective_real",
    "exp_basis",
    "fit_eigenfunction",
    "fit_modes",
    "fit_modes_temporal",
    "fit_thrust_output",
    "kem_rhs",
    "lambda_matrix",
    "lpv_decompose",
    "lpv_sweep",
    "nonlinear_sampling",
    "normalize_thrust",
    "optimize_eigenvalues",
    "order_sweep",
    "resolve_complex",
    "resolve_real",
    "thrust_mape",
]
