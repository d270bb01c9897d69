"""Tracking metrics: weighted and plain integral of absolute error, settling time, peak deviation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
import pandas as pd

from koopjet.bench.scenarios import N_REL_MAX, N_REL_MIN, Scenario, error_weight
from koopjet.config import N_NOMINAL

SETTLING_BAND: float = 0.01  # relative to the demand
LEVEL_TOL: float = 1e-6


def weighted_iae(t: np.ndarray, e: np.ndarray, w: np.ndarray | None = None) -> float:
    """Trapezoidal sum of w_k (|e_k| + |e_k+1|) / 2 dt_k, weights taken at the left sample."""
    t = np.asarray(t, dtype=float)
    a: np.ndarray = np.abs(np.asarray(e, dtype=float))
    weights: np.ndarray = np.ones(len(t) - 1) if w is None else np.asarray(w, dtype=float)[:-1]
    return float(np.sum(weights * 0.5 * (a[:-1] + a[1:]) * np.diff(t)))


def iae(t: np.ndarray, e: np.ndarray) -> float:
    return weighted_iae(t, e)


def acceleration_onset(t: np.ndarray, N_rel_d: np.ndarray) -> tuple[int, int] | None:
    """Index range (onset, end) of the first full acceleration from 0.5 to 1.0 in the demand."""
    jumps: np.ndarray = np.nonzero(
        (np.abs(N_rel_d[:-1] - N_REL_MIN) < LEVEL_TOL) & (np.abs(N_rel_d[1:] - N_REL_MAX) < LEVEL_TOL)
    )[0]
    if len(jumps) == 0:
        return None
    onset: int = int(jumps[0]) + 1
    changes: np.ndarray = np.nonzero(np.abs(np.diff(N_rel_d[onset:])) > LEVEL_TOL)[0]
    end: int = onset + int(changes[0]) + 1 if len(changes) else len(t)
    return onset, end


def max_settling_time(t: np.ndarray, N_rel: np.ndarray, N_rel_d: np.ndarray, band: float = SETTLING_BAND) -> float | None:
    """Time from the 0.5 -> 1 demand step until the response last enters the +-band around the demand.

    Returns None when the demand has no such step and inf when the response
    is still outside the band at the end of the step window.
    """
    window: tuple[int, int] | None = acceleration_onset(t, N_rel_d)
    if window is None:
        return None
    onset, end = window
    outside: np.ndarray = np.abs(N_rel[onset:end] - N_rel_d[onset:end]) > band * N_rel_d[onset:end]
    idx: np.ndarray = np.nonzero(outside)[0]
    if len(idx) == 0:
        return 0.0
    last: int = onset + int(idx[-1])
    if last + 1 >= end:
        return math.inf
    return float(t[last + 1] - t[onset])


def peak_deviation(t: np.ndarray, N_rel: np.ndarray, N_rel_d: np.ndarray, onset: float) -> float:
    """Largest |N_rel - N_rel_d| from `onset` on."""
    mask: np.ndarray = np.asarray(t) >= onset
    return float(np.max(np.abs(N_rel[mask] - N_rel_d[mask]))) if np.any(mask) else 0.0


@dataclass(frozen=True)
class Metrics:
    """Scenario metrics; integrals in RPM s, times in s."""

    wIAE: float
    IAE: float
    MST: float | None
    N_rel_max: float
    N_rel_min: float
    peak_deviation: float | None = None

    def to_dict(self) -> dict[str, Any]:
        units: dict[str, str] = {"wIAE": "RPM*s", "IAE": "RPM*s", "MST": "s", "N_rel_max": "-", "N_rel_min": "-", "peak_deviation": "-"}
        return {name: {"value": value, "unit": units[name]} for name, value in asdict(self).items()}


def compute_metrics(trace: pd.DataFrame, scenario: Scenario) -> Metrics:
    """Metrics of a tracking trace with columns t, Nd_rel and N_rel.

    Raises:
        ValueError: For a trace with fewer than two samples.
    """
    if len(trace) < 2:
        raise ValueError(f"Trace needs at least two samples, got {len(trace)}.")
    t: np.ndarray = trace["t"].to_numpy(dtype=float)
    N_rel: np.ndarray = trace["N_rel"].to_numpy(dtype=float)
    N_rel_d: np.ndarray = trace["Nd_rel"].to_numpy(dtype=float)
    e_rpm: np.ndarray = (N_rel_d - N_rel) * N_NOMINAL
    peak: float | None = None
    if scenario.disturbance_onset is not None:
        peak = peak_deviation(t, N_rel, N_rel_d, scenario.disturbance_onset)
    return Metrics(
        wIAE=weighted_iae(t, e_rpm, error_weight(t)),
        IAE=iae(t, e_rpm),
        MST=max_settling_time(t, N_rel, N_rel_d),
        N_rel_max=float(np.max(N_rel)),
        N_rel_min=float(np.min(N_rel)),
        peak_deviation=peak,
    )
