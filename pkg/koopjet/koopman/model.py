"""Koopman eigenfunction model of the spool dynamics.

    dPhi/dt = Lambda Phi + grad Phi(N) g(N) W_f,    N = C Phi
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd
import scipy.linalg

from koopjet.datakit.dataset import Dataset
from koopjet.datakit.normalization import DEFAULT_NORMALIZATION, NormalizationSpec
from koopjet.errors import NumericalError
from koopjet.koopman.eigenfunctions import Eigenfunction
from koopjet.koopman.lpv import LpvInputModel
from koopjet.koopman.modes import lambda_matrix, stack_phi
from koopjet.koopman.spectrum import EigenvalueSet
from koopjet.koopman.thrust import ThrustOutput
from koopjet.numerics.integrate import rk4_step
from koopjet.sindy.model import SindyModel
from koopjet.sindy.simulate import PredictionResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KoopmanModel:
    """Spectrum, eigenfunctions, amplitudes and input map.

    `sindy` supplies g(N) for the exact input map. With `use_lpv` set and an
    `lpv` decomposition present, the affine approximation is used instead.
    """

    eigs: EigenvalueSet
    eigenfunctions: tuple[Eigenfunction, ...]
    C: np.ndarray
    sindy: SindyModel
    normalization: NormalizationSpec = DEFAULT_NORMALIZATION
    lpv: LpvInputModel | None = None
    thrust: ThrustOutput | None = None
    use_lpv: bool = False
    lineage: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        Lam: np.ndarray = lambda_matrix(self.eigenfunctions)
        if Lam.shape[0] != len(self.C):
            raise ValueError(f"C has {len(self.C)} entries but the eigenfunctions span {Lam.shape[0]} states.")
        if self.eigs.order != Lam.shape[0]:
            raise ValueError(f"The spectrum spans {self.eigs.order} states but the eigenfunctions span {Lam.shape[0]}.")
        object.__setattr__(self, "_Lambda", Lam)

    @property
    def n(self) -> int:
        return len(self.C)

    @property
    def Lambda(self) -> np.ndarray:
        return self._Lambda  # type: ignore[attr-defined]

    def phi(self, N: np.ndarray | float) -> np.ndarray:
        """Eigenfunction values; (n,) for a scalar N, else (n, len(N))."""
        values: np.ndarray = stack_phi(self.eigenfunctions, N)
        return values[:, 0] if np.ndim(N) == 0 else values

    def grad_phi(self, N: np.ndarray | float) -> np.ndarray:
        values: np.ndarray = np.vstack([ef.slope(N) for ef in self.eigenfunctions])
        return values[:, 0] if np.ndim(N) == 0 else values

    def N_hat(self, Phi: np.ndarray) -> np.ndarray | float:
        out = self.C @ Phi
        return float(out) if np.ndim(out) == 0 else out

    def input_map_exact(self, N: np.ndarray | float) -> np.ndarray:
        """grad Phi(N) g(N)."""
        return self.grad_phi(N) * np.asarray(self.sindy.g(N))

    def input_map(self, N: np.ndarray | float) -> np.ndarray:
        if self.use_lpv and self.lpv is not None:
            G: np.ndarray = self.lpv.G(N)
            return G[:, 0] if np.ndim(N) == 0 else G
        return self.input_map_exact(N)

    def discrete_input_map(self, N: float, dt: float) -> np.ndarray:
        """G_d(N) = Lambda^-1 (exp(Lambda dt) - I) G(N)."""
        L: np.ndarray = scipy.linalg.expm(self.Lambda * dt)
        return np.linalg.solve(self.Lambda, (L - np.eye(self.n)) @ self.input_map(N))

    def simulate(self, W_f: np.ndarray, N0: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Open-loop prediction with zero-order-hold fuel flow.

        Returns:
            Normalized spool speed (T,) and states (n, T).
        """
        W_f = np.asarray(W_f, dtype=float)
        states: np.ndarray = np.empty((self.n, len(W_f)))
        Phi: np.ndarray = self.phi(float(N0))
        for k in range(len(W_f)):
            states[:, k] = Phi
            if k == len(W_f) - 1:
                break
            w: float = float(W_f[k])
            Phi = rk4_step(lambda _t, x: kem_rhs(self, x, self.N_hat(x), w), k * dt, Phi, dt)
            if not np.all(np.isfinite(Phi)):
                raise NumericalError(f"KEM prediction diverged at sample {k + 1}.")
        return self.C @ states, states

    def validate(self, dataset: Dataset) -> PredictionResult:
        """Open-loop prediction on a dataset, errors in corrected RPM."""
        spec: NormalizationSpec = dataset.lineage.normalization
        N_norm, _ = self.simulate(dataset.Wf_norm, float(dataset.N_norm[0]), dataset.dt)
        N_pred: np.ndarray = np.asarray(spec.denormalize_speed(N_norm))
        N_ref: np.ndarray = np.asarray(spec.denormalize_speed(dataset.N_norm))
        abs_err: np.ndarray = np.abs(N_pred - N_ref)
        return PredictionResult(
            t=dataset.t,
            N_pred=N_pred,
            N_ref=N_ref,
            mae_rpm=float(np.mean(abs_err)),
            mape=float(100.0 * np.mean(abs_err / np.abs(N_ref))),
        )

    def phi_grid_frame(self, N_grid: np.ndarray | None = None) -> pd.DataFrame:
        """Phi(N) on a grid, one column per state plus the reconstruction C Phi."""
        N: np.ndarray = np.linspace(0.0, 1.0, 201) if N_grid is None else np.asarray(N_grid, dtype=float)
        Phi: np.ndarray = stack_phi(self.eigenfunctions, N)
        frame = pd.DataFrame({"N": N})
        for i, row in enumerate(Phi):
            frame[f"phi_{i}"] = row
        frame["N_hat"] = self.C @ Phi
        return frame

    def to_dict(self) -> dict[str, Any]:
        return {
            "spectrum": self.eigs.to_dict(),
            "eigenfunctions": [ef.to_dict() for ef in self.eigenfunctions],
            "C": self.C.tolist(),
            "sindy": self.sindy.to_dict(),
            "normalization": self.normalization.model_dump(),
            "lpv": self.lpv.to_dict() if self.lpv is not None else None,
            "thrust": self.thrust.to_dict() if self.thrust is not None else None,
            "use_lpv": self.use_lpv,
            "lineage": self.lineage,
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> KoopmanModel:
        return cls(
            eigs=EigenvalueSet.from_dict(payload["spectrum"]),
            eigenfunctions=tuple(Eigenfunction.from_dict(e) for e in payload["eigenfunctions"]),
            C=np.asarray(payload["C"], dtype=float),
            sindy=SindyModel.from_dict(payload["sindy"]),
            normalization=NormalizationSpec(**payload.get("normalization", {})),
            lpv=LpvInputModel.from_dict(payload["lpv"]) if payload.get("lpv") else None,
            thrust=ThrustOutput.from_dict(payload["thrust"]) if payload.get("thrust") else None,
            use_lpv=bool(payload.get("use_lpv", False)),
            lineage=dict(payload.get("lineage", {})),
        )


def kem_rhs(model: KoopmanModel, Phi: np.ndarray, N_hat: float, W_f: float) -> np.ndarray:
    """Lambda Phi + G(N_hat) W_f with N_hat supplied by the caller."""
    return model.Lambda @ Phi + model.input_map(float(N_hat)) * W_f
