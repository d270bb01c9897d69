"""Logistic basis functions with steepness `eps` and centre `mu`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

DEGENERATE_MU_BOUND: float = 3.0
DEGENERATE_EPS: float = 1e-3


def logistic(N: np.ndarray | float, eps: np.ndarray | float, mu: np.ndarray | float) -> np.ndarray:
    """1 / (1 + exp(-eps (N - mu))), broadcasting over its arguments."""
    return expit(np.multiply(eps, np.subtract(N, mu)))


def logistic_matrix(N: np.ndarray, eps: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Basis matrix of shape (len(N), len(eps))."""
    N = np.atleast_1d(np.asarray(N, dtype=float))
    return expit(eps[None, :] * (N[:, None] - mu[None, :]))


@dataclass(frozen=True)
class LogisticTerm:
    """Weighted logistic function xi * LF(N; eps, mu)."""

    xi: float
    eps: float
    mu: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.xi) and np.isfinite(self.eps) and np.isfinite(self.mu)):
            raise ValueError(f"Logistic term parameters must be finite, got {self}.")

    def __call__(self, N: np.ndarray | float) -> np.ndarray:
        return self.xi * logistic(N, self.eps, self.mu)

    def derivative(self, N: np.ndarray | float) -> np.ndarray:
        s: np.ndarray = logistic(N, self.eps, self.mu)
        return self.xi * self.eps * s * (1.0 - s)

    def is_degenerate(self, mu_bound: float = DEGENERATE_MU_BOUND, eps_min: float = DEGENERATE_EPS) -> bool:
        """Whether the function is effectively constant over the normalized range."""
        return abs(self.mu) > mu_bound or abs(self.eps) < eps_min

    def constant_value(self) -> float:
        """Constant this term collapses to when degenerate (mean over [0, 1])."""
        return float(np.mean(self(np.linspace(0.0, 1.0, 101))))
