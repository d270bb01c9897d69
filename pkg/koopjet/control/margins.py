"""Frequency-domain robustness of the scheduled K-LQGI loop.

The loop is broken at the fuel-command input. In the closed-loop matrix the
integral row -C is replaced by zero, so the integral state carries no signal
and the estimation error, being uncontrollable from the command, drops out:
the loop transfer is K_LQI (sI - A_ol)^-1 B_aug.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

from koopjet.control.lqgi import LqgiDesign, LqiSchedule, augment_system, plant_blocks
from koopjet.koopman.model import KoopmanModel
from utils.json_helpers import to_jsonable

logger = logging.getLogger(__name__)

GM_MIN_DB: float = 6.0
PM_MIN_DEG: float = 60.0
OMEGA_MIN: float = 1e-2  # rad/s
OMEGA_MAX: float = 1e3  # rad/s
OMEGA_POINTS: int = 2000


def default_omega() -> np.ndarray:
    return np.logspace(math.log10(OMEGA_MIN), math.log10(OMEGA_MAX), OMEGA_POINTS)


def loop_response(A: np.ndarray, B: np.ndarray, C: np.ndarray, D: float = 0.0, omega: np.ndarray | None = None) -> np.ndarray:
    """Scalar L(j omega) = C (j omega I - A)^-1 B + D on the frequency grid."""
    w: np.ndarray = default_omega() if omega is None else np.asarray(omega, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(-1, 1)
    C = np.asarray(C, dtype=float).reshape(1, -1)
    n: int = A.shape[0]
    pencil: np.ndarray = 1j * w[:, None, None] * np.eye(n)[None, :, :] - A[None, :, :]
    X: np.ndarray = np.linalg.solve(pencil, np.broadcast_to(B, (len(w), n, 1)).astype(complex))
    return (C @ X)[:, 0, 0] + D


@dataclass(frozen=True)
class LoopMargins:
    """Classical margins; inf when the corresponding crossover does not occur."""

    gm_db: float
    pm_deg: float
    w_gc: float  # rad/s, gain crossover
    w_pc: float  # rad/s, phase crossover
    peak_sensitivity: float


def _crossings(values: np.ndarray, level: float) -> np.ndarray:
    """Indices k where values crosses `level` between k and k+1."""
    s: np.ndarray = np.sign(values - level)
    return np.nonzero(s[:-1] * s[1:] < 0.0)[0]


def _interp_log(omega: np.ndarray, y: np.ndarray, k: int, level: float) -> tuple[float, float]:
    """Log-frequency and fraction of the linear crossing between samples k and k+1."""
    frac: float = (level - y[k]) / (y[k + 1] - y[k])
    lw: float = math.log10(omega[k]) + frac * (math.log10(omega[k + 1]) - math.log10(omega[k]))
    return 10.0**lw, frac


def margins_from_response(omega: np.ndarray, L: np.ndarray) -> LoopMargins:
    """Gain and phase margins from a sampled loop response.

    Phase is unwrapped from the lowest frequency; phase crossovers are the
    crossings of -180 deg modulo 360.
    """
    mag: np.ndarray = np.abs(L)
    mag_db: np.ndarray = 20.0 * np.log10(np.maximum(mag, 1e-300))
    phase: np.ndarray = np.degrees(np.unwrap(np.angle(L)))

    pm: float = math.inf
    w_gc: float = math.nan
    for k in _crossings(mag_db, 0.0):
        w, frac = _interp_log(omega, mag_db, int(k), 0.0)
        ph: float = phase[k] + frac * (phase[k + 1] - phase[k])
        candidate: float = (ph + 180.0) % 360.0
        candidate = candidate - 360.0 if candidate > 180.0 else candidate
        if candidate < pm:
            pm, w_gc = candidate, w

    gm: float = math.inf
    w_pc: float = math.nan
    shifted: np.ndarray = (phase + 180.0) / 360.0
    levels: np.ndarray = np.arange(math.floor(shifted.min()), math.ceil(shifted.max()) + 1)
    for level in levels:
        for k in _crossings(shifted, float(level)):
            w, frac = _interp_log(omega, shifted, int(k), float(level))
            g: float = -(mag_db[k] + frac * (mag_db[k + 1] - mag_db[k]))
            if g < gm:
                gm, w_pc = g, w

    S: np.ndarray = 1.0 / (1.0 + L)
    return LoopMargins(gm_db=gm, pm_deg=pm, w_gc=w_gc, w_pc=w_pc, peak_sensitivity=float(np.max(np.abs(S))))


def loop_margins(A: np.ndarray, B: np.ndarray, C: np.ndarray, D: float = 0.0, omega: np.ndarray | None = None) -> LoopMargins:
    w: np.ndarray = default_omega() if omega is None else np.asarray(omega, dtype=float)
    return margins_from_response(w, loop_response(A, B, C, D, w))


def open_loop(model: KoopmanModel, K: np.ndarray, N_i: float, T_f: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(A_ol, B_ol, C_ol) of the loop broken at the fuel command, integral row zeroed."""
    A_aug, B_aug, _ = augment_system(model, N_i, T_f)
    A_aug[-1, :] = 0.0
    return A_aug, B_aug, np.asarray(K, dtype=float).reshape(1, -1)


def frequency_response_frame(
    model: KoopmanModel, schedule: LqiSchedule, N_i: float, T_f: float, omega: np.ndarray | None = None
) -> pd.DataFrame:
    """L, S = 1/(1+L) and T = L/(1+L) at one scheduling speed."""
    w: np.ndarray = default_omega() if omega is None else np.asarray(omega, dtype=float)
    A, B, C = open_loop(model, schedule.K(float(N_i)), N_i, T_f)
    L: np.ndarray = loop_response(A, B, C, 0.0, w)
    S: np.ndarray = 1.0 / (1.0 + L)
    T: np.ndarray = L * S
    return pd.DataFrame(
        {
            "omega": w,
            "L_mag": np.abs(L),
            "L_mag_db": 20.0 * np.log10(np.abs(L)),
            "L_phase_deg": np.degrees(np.unwrap(np.angle(L))),
            "S_mag_db": 20.0 * np.log10(np.abs(S)),
            "T_mag_db": 20.0 * np.log10(np.abs(T)),
        }
    )


def closed_loop_matrix(
    A_i: np.ndarray, B_i: np.ndarray, C_i: np.ndarray, K_zeta: np.ndarray, K_i: float, L_zeta: np.ndarray
) -> np.ndarray:
    """Closed loop over (zeta, estimation error, eta) with the observer-based law."""
    m: int = A_i.shape[0]
    K_zeta = np.asarray(K_zeta, dtype=float).reshape(1, m)
    L_zeta = np.asarray(L_zeta, dtype=float).reshape(m, 1)
    M: np.ndarray = np.zeros((2 * m + 1, 2 * m + 1))
    M[:m, :m] = A_i - B_i @ K_zeta
    M[:m, m : 2 * m] = B_i @ K_zeta
    M[:m, 2 * m] = -B_i[:, 0] * K_i
    M[m : 2 * m, m : 2 * m] = A_i - L_zeta @ C_i
    M[2 * m, :m] = -C_i[0]
    return M


def _design_blocks(design: LqgiDesign, N_i: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float, np.ndarray]:
    A_i, B_i, C_i = plant_blocks(design.model, N_i, design.T_f)
    K: np.ndarray = design.schedule.K(float(N_i))
    L_zeta: np.ndarray = np.append(design.L, 0.0)
    return A_i, B_i, C_i, K[:-1], float(K[-1]), L_zeta


def separation_error(design: LqgiDesign, N_i: float) -> float:
    """Largest distance between the closed-loop spectrum and the union of regulator and observer spectra."""
    A_i, B_i, C_i, K_zeta, K_i, L_zeta = _design_blocks(design, N_i)
    full: np.ndarray = np.linalg.eigvals(closed_loop_matrix(A_i, B_i, C_i, K_zeta, K_i, L_zeta))
    A_aug, B_aug, _ = augment_system(design.model, N_i, design.T_f)
    K: np.ndarray = np.append(K_zeta, K_i).reshape(1, -1)
    regulator: np.ndarray = np.linalg.eigvals(A_aug - B_aug @ K)
    observer: np.ndarray = np.linalg.eigvals(A_i - np.outer(L_zeta, C_i[0]))
    union: np.ndarray = np.concatenate([regulator, observer])
    cost: np.ndarray = np.abs(full[:, None] - union[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


@dataclass(frozen=True)
class MarginReport:
    """Per-point margins and closed-loop stability over the scheduling grid."""

    table: pd.DataFrame  # N, gm_db, pm_deg, w_gc, w_pc, peak_sensitivity, max_real_cl
    gm_min: float
    pm_min: float

    def feasible(self, gm_required: float = GM_MIN_DB, pm_required: float = PM_MIN_DEG) -> bool:
        stable: bool = bool(np.all(self.table["max_real_cl"] < 0.0))
        return stable and self.gm_min >= gm_required and self.pm_min >= pm_required

    def to_dict(self) -> dict[str, Any]:
        return {
            "gm_min_db": self.gm_min,
            "pm_min_deg": self.pm_min,
            "points": to_jsonable(self.table.to_dict(orient="records")),
        }


def margins(
    model: KoopmanModel,
    schedule: LqiSchedule,
    T_f: float,
    grid: np.ndarray | None = None,
    L: np.ndarray | None = None,
    omega: np.ndarray | None = None,
) -> MarginReport:
    """Margins of the scheduled loop and closed-loop spectral abscissa at each grid speed.

    The closed loop includes the observer when `L` is given, otherwise it is
    the state-feedback loop on the augmented system.
    """
    N_grid: np.ndarray = schedule.grid if grid is None else np.asarray(grid, dtype=float)
    w: np.ndarray = default_omega() if omega is None else np.asarray(omega, dtype=float)
    rows: list[dict[str, float]] = []
    for N_i in N_grid:
        K: np.ndarray = schedule.K(float(N_i))
        A, B, C = open_loop(model, K, float(N_i), T_f)
        lm: LoopMargins = margins_from_response(w, loop_response(A, B, C, 0.0, w))
        if L is None:
            A_aug, B_aug, _ = augment_system(model, float(N_i), T_f)
            cl: np.ndarray = A_aug - B_aug @ K.reshape(1, -1)
        else:
            A_i, B_i, C_i = plant_blocks(model, float(N_i), T_f)
            cl = closed_loop_matrix(A_i, B_i, C_i, K[:-1], float(K[-1]), np.append(L, 0.0))
        rows.append(
            {
                "N": float(N_i),
                "gm_db": lm.gm_db,
                "pm_deg": lm.pm_deg,
                "w_gc": lm.w_gc,
                "w_pc": lm.w_pc,
                "peak_sensitivity": lm.peak_sensitivity,
                "max_real_cl": float(np.max(np.linalg.eigvals(cl).real)),
            }
        )
    table = pd.DataFrame(rows)
    report = MarginReport(table=table, gm_min=float(table["gm_db"].min()), pm_min=float(table["pm_deg"].min()))
    logger.debug("Margins over %d points: GM_min=%.2f dB, PM_min=%.1f deg", len(N_grid), report.gm_min, report.pm_min)
    return report


def design_margins(design: LqgiDesign, grid: np.ndarray | None = None) -> MarginReport:
    return margins(design.model, design.schedule, design.T_f, grid, design.L)


def closed_loop_spectrum(design: LqgiDesign, grid: np.ndarray | None = None) -> pd.DataFrame:
    """Eigenvalues of the observer-based closed loop at each grid speed, one row per eigenvalue."""
    N_grid: np.ndarray = design.schedule.grid if grid is None else np.asarray(grid, dtype=float)
    rows: list[dict[str, float]] = []
    for N_i in N_grid:
        A_i, B_i, C_i, K_zeta, K_i, L_zeta = _design_blocks(design, float(N_i))
        for lam in np.linalg.eigvals(closed_loop_matrix(A_i, B_i, C_i, K_zeta, K_i, L_zeta)):
            rows.append({"N": float(N_i), "real": float(lam.real), "imag": float(lam.imag)})
    return pd.DataFrame(rows).sort_values(["N", "real", "imag"], kind="stable").reset_index(drop=True)
