"""Fixed-step classical Runge-Kutta integration."""

from __future__ import annotations

from typing import Callable

import numpy as np

from koopjet.errors import NumericalError

Rhs = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(rhs: Rhs, t: float, x: np.ndarray, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    k1: np.ndarray = rhs(t, x)
    k2: np.ndarray = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3: np.ndarray = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4: np.ndarray = rhs(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_ode(
    rhs: Rhs,
    x0: np.ndarray | float,
    t_span: tuple[float, float],
    dt: float,
    stop: Callable[[float, np.ndarray], bool] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate x' = rhs(t, x) on the grid t0 + i*dt.

    Args:
        rhs: Right-hand side returning an array shaped like x.
        x0: Initial state (scalar or vector).
        t_span: (t0, t_end); the last grid point lies within dt of t_end.
        dt: Positive step.
        stop: Optional predicate; integration ends after the first grid
            point where it returns True.

    Returns:
        Time grid of shape (K,) and states of shape (K, *x0.shape).

    Raises:
        ValueError: If dt is not positive.
        NumericalError: If the state becomes non-finite.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}.")
    t0, t_end = float(t_span[0]), float(t_span[1])
    n_steps: int = max(0, int(round((t_end - t0) / dt)))
    x: np.ndarray = np.asarray(x0, dtype=float).copy()

    states: list[np.ndarray] = [x]
    for i in range(n_steps):
        t: float = t0 + i * dt
        x = rk4_step(rhs, t, x, dt)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"Non-finite state encountered at t={t + dt:.6g} s.")
        states.append(x)
        if stop is not None and stop(t + dt, x):
            break

    times: np.ndarray = t0 + dt * np.arange(len(states))
    return times, np.array(states)
