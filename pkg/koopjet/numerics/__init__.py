"""Shared numerical machinery: descent, swarm/genetic search, Riccati, integration, filtering."""

from koopjet.numerics.adam import AdamState, adam_step
from koopjet.numerics.genetic import GaConfig, ga_minimize
from koopjet.numerics.integrate import integrate_ode, rk4_step
from koopjet.numerics.linalg import CareProblem, is_hurwitz, ridge_solve, solve_care, solve_lyapunov
from koopjet.numerics.signal import central_diff, savitzky_golay
from koopjet.numerics.swarm import SwarmConfig, pso_minimize

__all__ = [
    "AdamState",
    "CareProblem",
    "GaConfig",
    "SwarmConfig",
    "adam_step",
    "central_diff",
    "ga_minimize",
    "integrate_ode",
    "is_hurwitz",
    "pso_minimize",
    "ridge_solve",
    "rk4_step",
    "savitzky_golay",
    "solve_care",
    "solve_lyapunov",
]
