"""Thrust read-out F = C_F Phi + D_F W_f."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from koopjet.config import P_REF

THRUST_MAPE_FLOOR: float = 0.05  # normalized thrust below which samples are left out of MAPE


def normalize_thrust(F: np.ndarray | float, p1t: np.ndarray | float, F_DP: float) -> np.ndarray:
    """Normalized corrected thrust F (101325 / p1t) / F_DP."""
    if F_DP <= 0.0:
        raise ValueError(f"Design-point thrust must be positive, got {F_DP}.")
    return np.asarray(F, dtype=float) * (P_REF / np.asarray(p1t, dtype=float)) / F_DP


@dataclass(frozen=True)
class ThrustOutput:
    C_F: np.ndarray
    D_F: float
    F_DP: float = 1.0

    def predict(self, Phi: np.ndarray, W_f: np.ndarray | float) -> np.ndarray:
        """Normalized corrected thrust from states Phi (n, T) and fuel W_f."""
        return self.C_F @ np.atleast_2d(Phi) + self.D_F * np.asarray(W_f, dtype=float)

    def to_dict(self) -> dict:
        return {"C_F": self.C_F.tolist(), "D_F": self.D_F, "F_DP": self.F_DP}

    @classmethod
    def from_dict(cls, payload: dict) -> ThrustOutput:
        return cls(C_F=np.asarray(payload["C_F"], dtype=float), D_F=float(payload["D_F"]), F_DP=float(payload.get("F_DP", 1.0)))


def fit_thrust_output(Phi: np.ndarray, W_f: np.ndarray, F_cn: np.ndarray, F_DP: float = 1.0) -> ThrustOutput:
    """Least-squares projection of F_cn onto the rows of [Phi; W_f]."""
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    W_f = np.asarray(W_f, dtype=float)
    F_cn = np.asarray(F_cn, dtype=float)
    if Phi.shape[1] != len(W_f) or len(W_f) != len(F_cn):
        raise ValueError(f"Mismatched lengths: Phi {Phi.shape}, W_f {W_f.shape}, thrust {F_cn.shape}.")
    X: np.ndarray = np.vstack([Phi, W_f[None, :]]).T
    coef: np.ndarray = scipy.linalg.lstsq(X, F_cn)[0]
    return ThrustOutput(C_F=coef[:-1], D_F=float(coef[-1]), F_DP=F_DP)


def thrust_mape(predicted: np.ndarray, reference: np.ndarray, floor: float = THRUST_MAPE_FLOOR) -> float:
    """MAPE in percent over samples with |reference| >= floor."""
    reference = np.asarray(reference, dtype=float)
    mask: np.ndarray = np.abs(reference) >= floor
    if not np.any(mask):
        return float("nan")
    err: np.ndarray = np.abs(np.asarray(predicted)[mask] - reference[mask]) / np.abs(reference[mask])
    return float(100.0 * np.mean(err))
