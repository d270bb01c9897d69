"""Corrected and normalized engine quantities."""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, field_validator

from koopjet.config import O_N, O_W, P_REF, S_N, S_W, T_REF

ArrayLike = float | np.ndarray


class NormalizationSpec(BaseModel):
    """Offsets and scales mapping corrected quantities to the unit range.

    Ground idle maps to zero; the top of the identified range maps to one.
    """

    O_N: float = O_N  # RPM
    S_N: float = S_N  # RPM
    O_W: float = O_W  # kg/s
    S_W: float = S_W  # kg/s

    @field_validator("S_N", "S_W")
    @classmethod
    def _check_scale(cls, value: float) -> float:
        if value <= 0.0:
            raise ValueError(f"Normalization scales must be positive, got {value}.")
        return value

    def normalize_speed(self, N_corr: ArrayLike) -> ArrayLike:
        return (N_corr - self.O_N) / self.S_N

    def denormalize_speed(self, N: ArrayLike) -> ArrayLike:
        return N * self.S_N + self.O_N

    def normalize_fuel(self, Wf_corr: ArrayLike) -> ArrayLike:
        return (Wf_corr - self.O_W) / self.S_W

    def denormalize_fuel(self, W_f: ArrayLike) -> ArrayLike:
        return W_f * self.S_W + self.O_W


# Module-level default using the published offsets and scales.
DEFAULT_NORMALIZATION: NormalizationSpec = NormalizationSpec()


def correct(N_phys: ArrayLike, Wf_phys: ArrayLike, T1t: ArrayLike, p1t: ArrayLike) -> tuple[ArrayLike, ArrayLike]:
    """Corrected spool speed and fuel flow at inlet total temperature T1t and pressure p1t."""
    temp_factor = np.sqrt(T_REF / np.asarray(T1t, dtype=float))
    return N_phys * temp_factor, Wf_phys * temp_factor * (P_REF / np.asarray(p1t, dtype=float))


def uncorrect(N_corr: ArrayLike, Wf_corr: ArrayLike, T1t: ArrayLike, p1t: ArrayLike) -> tuple[ArrayLike, ArrayLike]:
    """Physical spool speed and fuel flow from corrected values."""
    temp_factor = np.sqrt(np.asarray(T1t, dtype=float) / T_REF)
    return N_corr * temp_factor, Wf_corr * temp_factor * (np.asarray(p1t, dtype=float) / P_REF)


def normalize(N_corr: ArrayLike, Wf_corr: ArrayLike, spec: NormalizationSpec = DEFAULT_NORMALIZATION) -> tuple[ArrayLike, ArrayLike]:
    return spec.normalize_speed(N_corr), spec.normalize_fuel(Wf_corr)


def denormalize(N: ArrayLike, W_f: ArrayLike, spec: NormalizationSpec = DEFAULT_NORMALIZATION) -> tuple[ArrayLike, ArrayLike]:
    return spec.denormalize_speed(N), spec.denormalize_fuel(W_f)


def to_model_coordinates(
    N_phys: ArrayLike, Wf_phys: ArrayLike, T1t: ArrayLike, p1t: ArrayLike, spec: NormalizationSpec
) -> tuple[ArrayLike, ArrayLike]:
    """Physical measurements to normalized corrected coordinates."""
    N_corr, Wf_corr = correct(N_phys, Wf_phys, T1t, p1t)
    return normalize(N_corr, Wf_corr, spec)


def to_physical(
    N: ArrayLike, W_f: ArrayLike, T1t: ArrayLike, p1t: ArrayLike, spec: NormalizationSpec
) -> tuple[ArrayLike, ArrayLike]:
    """Normalized corrected coordinates back to physical spool speed and fuel flow."""
    N_corr, Wf_corr = denormalize(N, W_f, spec)
    return uncorrect(N_corr, Wf_corr, T1t, p1t)
