"""Open-loop prediction and autonomous trajectories of an identified model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from koopjet.config import DT
from koopjet.datakit.dataset import Dataset
from koopjet.errors import NumericalError
from koopjet.numerics.integrate import integrate_ode, rk4_step
from koopjet.sindy.model import SindyModel, eval_model

AUTONOMOUS_T_MAX: float = 15.0  # s
AUTONOMOUS_FLOOR: float = 1e-4  # normalized speed


@dataclass(frozen=True)
class PredictionResult:
    """Predicted and reference corrected spool speed (RPM) on the dataset grid."""

    t: np.ndarray
    N_pred: np.ndarray
    N_ref: np.ndarray
    mae_rpm: float
    mape: float

    @property
    def errors(self) -> np.ndarray:
        return self.N_pred - self.N_ref

    def summary(self, bins: int = 20) -> dict[str, Any]:
        """Error statistics with a histogram of prediction errors."""
        counts, edges = np.histogram(self.errors, bins=bins)
        return {
            "mae_rpm": self.mae_rpm,
            "mape_percent": self.mape,
            "error_mean_rpm": float(np.mean(self.errors)),
            "error_std_rpm": float(np.std(self.errors)),
            "error_histogram": {"counts": counts.tolist(), "edges": edges.tolist()},
        }


def predict(model: SindyModel, N0: float, W_f: np.ndarray, dt: float) -> np.ndarray:
    """Integrate the model with zero-order-hold input; returns normalized N per sample."""
    N: np.ndarray = np.empty(len(W_f))
    N[0] = N0
    x: np.ndarray = np.array([N0])
    for k in range(len(W_f) - 1):
        w: float = float(W_f[k])
        x = rk4_step(lambda _t, s: np.asarray(eval_model(model, s, w)), k * dt, x, dt)
        if not np.isfinite(x[0]):
            raise NumericalError(f"SINDy prediction diverged at sample {k + 1}.")
        N[k + 1] = x[0]
    return N


def validate_predict(model: SindyModel, dataset: Dataset) -> PredictionResult:
    """Integrate from the dataset's first sample with its recorded fuel flow.

    Errors are taken on the denormalized corrected spool speed against the
    filtered channel.
    """
    if len(dataset) < 2:
        raise ValueError("Validation needs at least two samples.")
    spec = dataset.lineage.normalization
    N_norm: np.ndarray = predict(model, float(dataset.N_norm[0]), dataset.Wf_norm, dataset.dt)
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


def gen_autonomous(
    model: SindyModel,
    initial_conditions: np.ndarray | list[float],
    dt: float = DT,
    t_max: float = AUTONOMOUS_T_MAX,
    floor: float = AUTONOMOUS_FLOOR,
) -> tuple[np.ndarray, np.ndarray]:
    """Unforced trajectories dN/dt = f(N), one row per initial condition.

    All rows share one grid, which ends at t_max or once every row has
    decayed to `floor`.

    Returns:
        Time grid (K,) and trajectories (n_ic, K).
    """
    N0: np.ndarray = np.asarray(initial_conditions, dtype=float).ravel()
    if len(N0) == 0:
        raise ValueError("At least one initial condition is required.")
    if np.any(N0 <= 0.0) or np.any(N0 > 1.0):
        raise ValueError(f"Initial conditions must lie in (0, 1], got {N0.tolist()}.")
    times, states = integrate_ode(
        lambda _t, x: np.asarray(model.f(x)),
        N0,
        (0.0, t_max),
        dt,
        stop=lambda _t, x: bool(np.all(x <= floor)),
    )
    return times, states.T
