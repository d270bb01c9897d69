"""Koopman LQI with a steady Kalman observer in eigenfunction coordinates.

The augmented state is z = (Phi, W_f, eta): eigenfunctions, delivered fuel
and the integral of the speed error, all in normalized corrected units.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from pydantic import BaseModel, field_validator
from scipy.interpolate import CubicSpline

from koopjet.config import NOISE_SIGMA_RPM
from koopjet.control.base import ControlAction, ControlInput, ControllerBase
from koopjet.datakit.dataset import Dataset
from koopjet.datakit.normalization import NormalizationSpec, to_model_coordinates
from koopjet.errors import CareError, NumericalError
from koopjet.koopman.model import KoopmanModel
from koopjet.numerics.integrate import rk4_step
from koopjet.numerics.linalg import CareProblem, is_hurwitz, solve_care
from koopjet.plant.atmosphere import Ambient
from koopjet.plant.engine import fuel_lag_factor

logger = logging.getLogger(__name__)

LQI_GRID_POINTS: int = 21
OBSERVABILITY_TOL: float = 1e-9
STEADY_RATE: float = 0.01  # normalized speed per second regarded as steady


class LqgiWeights(BaseModel):
    """Weights of the LQI cost.

    `dQ` holds one relative perturbation per eigenfunction state; an empty
    list leaves Q_Phi = C^T Q_N C unperturbed.
    """

    Q_N: float = 1.0
    Q_f: float = 1.0
    Q_i: float = 1.0
    R_c: float = 1.0
    dQ: list[float] = []

    @field_validator("Q_N", "Q_f", "Q_i")
    @classmethod
    def _check_nonnegative(cls, value: float) -> float:
        if value < 0.0:
            raise ValueError(f"State weights must be non-negative, got {value}.")
        return value

    @field_validator("R_c")
    @classmethod
    def _check_positive(cls, value: float) -> float:
        if value <= 0.0:
            raise ValueError(f"R_c must be positive, got {value}.")
        return value


DEFAULT_LQGI_WEIGHTS: LqgiWeights = LqgiWeights()


def phi_weight(C: np.ndarray, Q_N: float, dQ: list[float] | np.ndarray | None = None) -> np.ndarray:
    """Q_Phi = C^T Q_N C, optionally perturbed around a positive floor.

    With perturbations d_j the result is Q_Phi + 0.5 b I + diag(d_j b),
    b = mean(diag(Q_Phi)), which stays positive semidefinite for |d_j| <= 0.5.
    """
    C = np.asarray(C, dtype=float)
    Q: np.ndarray = Q_N * np.outer(C, C)
    if dQ is None or len(dQ) == 0:
        return Q
    d: np.ndarray = np.asarray(dQ, dtype=float)
    if d.shape != C.shape:
        raise ValueError(f"dQ has {d.size} entries, expected {C.size}.")
    b: float = float(np.mean(np.diag(Q)))
    return Q + np.diag((0.5 + d) * b)


def state_weight(model: KoopmanModel, weights: LqgiWeights) -> np.ndarray:
    """Block-diagonal Q_z over (Phi, W_f, eta)."""
    n: int = model.n
    Q_z: np.ndarray = np.zeros((n + 2, n + 2))
    Q_z[:n, :n] = phi_weight(model.C, weights.Q_N, weights.dQ)
    Q_z[n, n] = weights.Q_f
    Q_z[n + 1, n + 1] = weights.Q_i
    return Q_z


def plant_blocks(model: KoopmanModel, N_i: float, T_f: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(A_i, B_i, C_i) of the eigenfunction model with the fuel lag appended."""
    n: int = model.n
    A: np.ndarray = np.zeros((n + 1, n + 1))
    A[:n, :n] = model.Lambda
    A[:n, n] = model.input_map(float(N_i))
    A[n, n] = -1.0 / T_f
    B: np.ndarray = np.zeros((n + 1, 1))
    B[n, 0] = 1.0 / T_f
    C: np.ndarray = np.zeros((1, n + 1))
    C[0, :n] = model.C
    return A, B, C


def augment_system(model: KoopmanModel, N_i: float, T_f: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Augmented (A_aug, B_aug, C_aug) at the scheduling speed N_i, with the error integral last."""
    A_i, B_i, C_i = plant_blocks(model, N_i, T_f)
    m: int = A_i.shape[0]
    A_aug: np.ndarray = np.zeros((m + 1, m + 1))
    A_aug[:m, :m] = A_i
    A_aug[m, :m] = -C_i[0]
    B_aug: np.ndarray = np.vstack([B_i, np.zeros((1, 1))])
    C_aug: np.ndarray = np.hstack([C_i, np.zeros((1, 1))])
    return A_aug, B_aug, C_aug


def lqr_gain(
    A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray | float, initial_gain: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Continuous LQR gain K = R^-1 B^T P and the CARE solution P."""
    problem = CareProblem(A=A, B=B, Q=Q, R=np.atleast_2d(R))
    P: np.ndarray = solve_care(problem, initial_gain)
    return problem.gain(P), P


@dataclass(frozen=True)
class LqiSchedule:
    """LQI gain rows tabulated on a speed grid and interpolated by cubic splines."""

    grid: np.ndarray
    gains: np.ndarray  # (grid points, n + 2)

    def __post_init__(self) -> None:
        grid: np.ndarray = np.asarray(self.grid, dtype=float)
        gains: np.ndarray = np.atleast_2d(np.asarray(self.gains, dtype=float))
        if len(grid) != len(gains) or len(grid) < 2:
            raise ValueError(f"Schedule needs matching grid and gain rows, got {len(grid)} and {len(gains)}.")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "_spline", CubicSpline(grid, gains, axis=0))

    @property
    def width(self) -> int:
        return self.gains.shape[1]

    def K(self, N: float | np.ndarray) -> np.ndarray:
        """Gain row at N (clipped to the grid); rows stacked for an array of N."""
        x = np.clip(N, self.grid[0], self.grid[-1])
        return self._spline(x)  # type: ignore[attr-defined]

    def to_dict(self) -> dict[str, Any]:
        return {"grid": self.grid.tolist(), "gains": self.gains.tolist()}

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> LqiSchedule:
        return cls(grid=np.asarray(payload["grid"], dtype=float), gains=np.asarray(payload["gains"], dtype=float))


def lqi_design(
    model: KoopmanModel,
    weights: LqgiWeights = DEFAULT_LQGI_WEIGHTS,
    T_f: float = 0.1,
    grid_points: int = LQI_GRID_POINTS,
) -> LqiSchedule:
    """Solve the LQI CARE on an even speed grid, warm-starting each point from its neighbour.

    Raises:
        CareError: Naming the grid point where the Riccati solve failed.
    """
    grid: np.ndarray = np.linspace(0.0, 1.0, grid_points)
    Q_z: np.ndarray = state_weight(model, weights)
    rows: list[np.ndarray] = []
    K_prev: np.ndarray | None = None
    for N_i in grid:
        A_aug, B_aug, _ = augment_system(model, float(N_i), T_f)
        try:
            K, _ = lqr_gain(A_aug, B_aug, Q_z, weights.R_c, K_prev)
        except CareError as e:
            raise CareError(f"LQI design failed at N_i={N_i:.3f}: {e}") from e
        rows.append(K[0])
        K_prev = K
    logger.debug("LQI schedule solved on %d points", grid_points)
    return LqiSchedule(grid=grid, gains=np.vstack(rows))


@dataclass(frozen=True)
class ObserverNoise:
    """Process covariance Q_o, measurement variance R_o and noise gain G_o (identity when omitted)."""

    Q_o: np.ndarray
    R_o: float
    G_o: np.ndarray | None = None

    def __post_init__(self) -> None:
        Q: np.ndarray = np.atleast_2d(np.asarray(self.Q_o, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q_o must be square, got {Q.shape}.")
        if self.R_o <= 0.0 or not math.isfinite(self.R_o):
            raise ValueError(f"R_o must be positive and finite, got {self.R_o}.")
        Q = 0.5 * (Q + Q.T)
        eigvals, eigvecs = np.linalg.eigh(Q)
        if eigvals.min() < 0.0:
            Q = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
            Q = 0.5 * (Q + Q.T)
        object.__setattr__(self, "Q_o", Q)
        object.__setattr__(self, "R_o", float(self.R_o))
        if self.G_o is not None:
            object.__setattr__(self, "G_o", np.atleast_2d(np.asarray(self.G_o, dtype=float)))

    def gain_matrix(self) -> np.ndarray:
        return np.eye(self.Q_o.shape[0]) if self.G_o is None else self.G_o

    def to_dict(self) -> dict[str, Any]:
        return {
            "Q_o": self.Q_o.tolist(),
            "R_o": self.R_o,
            "G_o": None if self.G_o is None else self.G_o.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> ObserverNoise:
        G = payload.get("G_o")
        return cls(Q_o=np.asarray(payload["Q_o"], dtype=float), R_o=float(payload["R_o"]), G_o=None if G is None else np.asarray(G))


def default_noise(n: int, spec: NormalizationSpec, sigma_rpm: float = NOISE_SIGMA_RPM, q: float = 1e-4) -> ObserverNoise:
    """Isotropic process noise and the sensor variance of `sigma_rpm` in normalized units."""
    return ObserverNoise(Q_o=q * np.eye(n), R_o=(sigma_rpm / spec.S_N) ** 2)


def is_observable(A: np.ndarray, C: np.ndarray, tol: float = OBSERVABILITY_TOL) -> bool:
    """Popov-Belevitch-Hautus rank test."""
    A = np.atleast_2d(A)
    C = np.atleast_2d(C)
    n: int = A.shape[0]
    scale: float = 1.0 + float(np.linalg.norm(A)) + float(np.linalg.norm(C))
    for lam in np.linalg.eigvals(A):
        pencil: np.ndarray = np.vstack([lam * np.eye(n) - A, C])
        if np.linalg.matrix_rank(pencil, tol=tol * scale) < n:
            return False
    return True


def kalman_design(model: KoopmanModel, noise: ObserverNoise) -> np.ndarray:
    """Steady Kalman gain L = P_o C^T / R_o for (Lambda, C).

    Raises:
        NumericalError: If (Lambda, C) is unobservable or Lambda - L C is not Hurwitz.
        CareError: If the observer Riccati equation has no stabilizing solution.
    """
    Lam: np.ndarray = model.Lambda
    C: np.ndarray = np.atleast_2d(model.C)
    if noise.Q_o.shape != Lam.shape:
        raise ValueError(f"Q_o has shape {noise.Q_o.shape}, expected {Lam.shape}.")
    if not is_observable(Lam, C):
        raise NumericalError("The pair (Lambda, C) is not observable; drop the unobserved eigenfunctions.")
    G: np.ndarray = noise.gain_matrix()
    problem = CareProblem(A=Lam.T, B=C.T, Q=G @ noise.Q_o @ G.T, R=np.array([[noise.R_o]]))
    P_o: np.ndarray = solve_care(problem)
    L: np.ndarray = (P_o @ C.T / noise.R_o)[:, 0]
    if not is_hurwitz(Lam - np.outer(L, C[0])):
        raise NumericalError("Observer error dynamics Lambda - L C are not Hurwitz.")
    return L


def estimate_noise(model: KoopmanModel, dataset: Dataset, steady_rate: float = STEADY_RATE) -> ObserverNoise:
    """Process covariance from the eigenfunction-derivative residual and sensor variance from the raw channel.

    The residual is dPhi/dN(N) dN/dt - Lambda Phi(N) - G(N_hat) u with N the
    filtered speed and N_hat the open-loop model prediction. R_o is the
    variance of raw minus filtered speed over samples whose rate is below
    `steady_rate`, all samples being used when too few qualify.
    """
    N: np.ndarray = dataset.N_norm
    u: np.ndarray = dataset.Wf_norm
    N_hat, _ = model.simulate(u, float(N[0]), dataset.dt)
    residual: np.ndarray = (
        model.grad_phi(N) * dataset.dN_dt - model.Lambda @ model.phi(N) - model.input_map(N_hat) * u
    )
    Q_o: np.ndarray = np.atleast_2d(np.cov(residual))

    lineage = dataset.lineage
    raw, _ = to_model_coordinates(dataset.N_raw, 0.0, lineage.T1t, lineage.p1t, lineage.normalization)
    filt, _ = to_model_coordinates(dataset.N_filt, 0.0, lineage.T1t, lineage.p1t, lineage.normalization)
    deviation: np.ndarray = np.asarray(raw) - np.asarray(filt)
    steady: np.ndarray = np.abs(dataset.dN_dt) <= steady_rate
    if np.count_nonzero(steady) < max(lineage.window, 10):
        steady = np.ones_like(steady, dtype=bool)
    R_o: float = float(np.var(deviation[steady]))
    if R_o <= 0.0:
        fallback: float = (max(lineage.sigma_rpm, 1.0) / lineage.normalization.S_N) ** 2
        logger.warning("Raw channel carries no noise; R_o set from sigma=%.3g RPM.", max(lineage.sigma_rpm, 1.0))
        R_o = fallback
    logger.info("Noise estimate: trace(Q_o)=%.3e, R_o=%.3e over %d steady samples", np.trace(Q_o), R_o, np.count_nonzero(steady))
    return ObserverNoise(Q_o=Q_o, R_o=R_o)


@dataclass(frozen=True)
class LqgiDesign:
    """Everything the K-LQGI law needs at run time."""

    model: KoopmanModel
    schedule: LqiSchedule
    L: np.ndarray
    T_f: float
    weights: LqgiWeights = DEFAULT_LQGI_WEIGHTS
    noise: ObserverNoise | None = None
    margins: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.schedule.width != self.model.n + 2:
            raise ValueError(f"Schedule rows have {self.schedule.width} gains, expected {self.model.n + 2}.")
        object.__setattr__(self, "L", np.asarray(self.L, dtype=float).reshape(self.model.n))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kem": self.model.to_dict(),
            "schedule": self.schedule.to_dict(),
            "L": self.L.tolist(),
            "T_f": self.T_f,
            "weights": self.weights.model_dump(),
            "noise": None if self.noise is None else self.noise.to_dict(),
            "margins": self.margins,
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> LqgiDesign:
        noise = payload.get("noise")
        return cls(
            model=KoopmanModel.from_dict(payload["kem"]),
            schedule=LqiSchedule.from_dict(payload["schedule"]),
            L=np.asarray(payload["L"], dtype=float),
            T_f=float(payload["T_f"]),
            weights=LqgiWeights(**payload.get("weights", {})),
            noise=None if noise is None else ObserverNoise.from_dict(noise),
            margins=dict(payload.get("margins", {})),
        )


@dataclass
class LqgiState:
    """Observer estimate, fuel-lag estimate and error integral."""

    Phi_hat: np.ndarray
    W_f_hat: float
    eta: float

    @property
    def zeta(self) -> np.ndarray:
        return np.append(self.Phi_hat, self.W_f_hat)


def initial_state(design: LqgiDesign, N0: float, W_f0: float) -> LqgiState:
    """Observer at Phi(N0) with the integral chosen so the first command equals W_f0."""
    Phi: np.ndarray = design.model.phi(float(N0))
    state = LqgiState(Phi_hat=Phi, W_f_hat=float(W_f0), eta=0.0)
    K: np.ndarray = design.schedule.K(float(design.model.N_hat(Phi)))
    K_i: float = float(K[-1])
    if abs(K_i) > 1e-12:
        state.eta = -(float(W_f0) + float(K[:-1] @ state.zeta)) / K_i
    return state


def lqgi_command(design: LqgiDesign, state: LqgiState, N_meas: float, N_d: float, dt: float) -> tuple[float, float, float]:
    """Command from the estimate and the advanced integral.

    Gains are evaluated at the estimate N_hat; the integral uses the measured speed.

    Returns:
        Command v, the advanced integral and N_hat.
    """
    N_hat: float = float(design.model.N_hat(state.Phi_hat))
    K: np.ndarray = design.schedule.K(N_hat)
    eta_next: float = state.eta + (N_d - N_meas) * dt
    v: float = -float(K[:-1] @ state.zeta) - float(K[-1]) * eta_next
    return v, eta_next, N_hat


def lqgi_advance(
    design: LqgiDesign, state: LqgiState, N_meas: float, v_applied: float, eta_next: float, clamped: bool, dt: float
) -> LqgiState:
    """Propagate the observer over one sample with the applied command.

    Phi_hat follows Lambda Phi + G(C Phi) W_f_hat + L (N - C Phi) by one RK4
    step; the fuel estimate follows the exact lag. The integral is held while
    the limiter clamps.
    """
    model: KoopmanModel = design.model
    W_f: float = state.W_f_hat

    def rhs(_t: float, Phi: np.ndarray) -> np.ndarray:
        N_est: float = float(model.N_hat(Phi))
        return model.Lambda @ Phi + model.input_map(N_est) * W_f + design.L * (N_meas - N_est)

    Phi_next: np.ndarray = rk4_step(rhs, 0.0, state.Phi_hat, dt)
    if not np.all(np.isfinite(Phi_next)):
        raise NumericalError("K-LQGI observer diverged.")
    W_next: float = W_f + fuel_lag_factor(dt, design.T_f) * (v_applied - W_f)
    return LqgiState(Phi_hat=Phi_next, W_f_hat=W_next, eta=state.eta if clamped else eta_next)


def lqgi_step(
    design: LqgiDesign,
    state: LqgiState,
    N_meas: float,
    N_d: float,
    dt: float,
    limit: Callable[[float], tuple[float, bool]] | None = None,
) -> tuple[float, LqgiState, float]:
    """One K-LQGI sample in normalized corrected coordinates.

    Args:
        limit: Optional limiter returning the applied command and the clamp flag.

    Returns:
        Applied command, next state and the speed estimate used for scheduling.
    """
    v, eta_next, N_hat = lqgi_command(design, state, N_meas, N_d, dt)
    v_applied, clamped = (v, False) if limit is None else limit(v)
    return v_applied, lqgi_advance(design, state, N_meas, v_applied, eta_next, clamped, dt), N_hat


class LqgiController(ControllerBase):
    """K-LQGI governor; physical quantities are corrected and normalized at the boundary."""

    name = "klqgi"

    def __init__(self, design: LqgiDesign, spec: NormalizationSpec, dt: float) -> None:
        super().__init__(spec, dt)
        self._design: LqgiDesign = design
        self._state: LqgiState = LqgiState(Phi_hat=np.zeros(design.model.n), W_f_hat=0.0, eta=0.0)
        self._pending: tuple[float, float, Ambient] | None = None

    @classmethod
    def from_design(cls, design: dict[str, Any], spec: NormalizationSpec, dt: float) -> LqgiController:
        return cls(LqgiDesign.from_dict(design), spec, dt)

    @property
    def design(self) -> LqgiDesign:
        return self._design

    @property
    def state(self) -> LqgiState:
        return self._state

    def reset(self, N0: float, W_f0: float, ambient: Ambient) -> None:
        N, W_f = self.to_model(N0, W_f0, ambient)
        self._state = initial_state(self._design, N, W_f)
        self._pending = None
        self._clamped = False

    def step(self, inp: ControlInput) -> ControlAction:
        N, _ = self.to_model(inp.N_meas, 0.0, inp.ambient)
        N_d, _ = self.to_model(inp.N_d, 0.0, inp.ambient)
        v, eta_next, N_hat = lqgi_command(self._design, self._state, N, N_d, self._dt)
        self._pending = (N, eta_next, inp.ambient)
        N_hat_phys: float = float(self._spec.denormalize_speed(N_hat)) * math.sqrt(inp.ambient.theta)
        return ControlAction(fuel=self.fuel_to_physical(v, inp.ambient), N_hat=N_hat_phys)

    def on_applied(self, fuel: float, clamped: bool) -> None:
        super().on_applied(fuel, clamped)
        if self._pending is None:
            return
        N, eta_next, ambient = self._pending
        _, v_applied = self.to_model(0.0, fuel, ambient)
        self._state = lqgi_advance(self._design, self._state, N, v_applied, eta_next, clamped, self._dt)
        self._pending = None
