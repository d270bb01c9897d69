"""Ridge regression and continuous-time Riccati/Lyapunov solvers."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from koopjet.errors import CareError

logger = logging.getLogger(__name__)

CARE_MAX_ITERS: int = 60
CARE_TOL: float = 1e-12
CARE_RESIDUAL_TOL: float = 1e-8


def ridge_solve(E: np.ndarray, Y: np.ndarray, alpha: float) -> np.ndarray:
    """Return K minimizing ||Y - K E||_F^2 + alpha ||K||_F^2.

    Args:
        E: Basis matrix of shape (k, T).
        Y: Target matrix of shape (m, T); a 1-D target is treated as one row.
        alpha: Non-negative ridge weight.

    Returns:
        Coefficient matrix of shape (m, k).

    Raises:
        ValueError: For negative alpha, mismatched shapes, or a singular
            system with alpha = 0.
    """
    E = np.atleast_2d(np.asarray(E, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if alpha < 0.0:
        raise ValueError(f"alpha must be non-negative, got {alpha}.")
    if E.shape[1] != Y.shape[1]:
        raise ValueError(f"E has {E.shape[1]} samples but Y has {Y.shape[1]}.")
    k: int = E.shape[0]
    if alpha == 0.0 and np.linalg.matrix_rank(E) < k:
        raise ValueError(f"Singular normal equations: rank(E) < {k} and alpha = 0.")

    gram: np.ndarray = E @ E.T + alpha * np.eye(k)
    rhs: np.ndarray = E @ Y.T
    try:
        coef_t: np.ndarray = scipy.linalg.solve(gram, rhs, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise ValueError(f"Ridge normal equations could not be solved: {e}.") from e
    return coef_t.T


def is_hurwitz(A: np.ndarray, margin: float = 0.0) -> bool:
    """Whether every eigenvalue of A has real part below -margin."""
    return bool(np.all(np.linalg.eigvals(A).real < -margin))


def solve_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve A X + X A^T = Q (Bartels-Stewart)."""
    return scipy.linalg.solve_continuous_lyapunov(A, Q)


@dataclass(frozen=True)
class CareProblem:
    """Data of A^T P + P A + Q - P B R^-1 B^T P = 0."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        n: int = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or Q.shape != (n, n) or R.shape != (B.shape[1], B.shape[1]):
            raise ValueError(f"Inconsistent CARE shapes: A {A.shape}, B {B.shape}, Q {Q.shape}, R {R.shape}.")
        if not np.allclose(Q, Q.T, atol=1e-10 * (1.0 + np.abs(Q).max())):
            raise ValueError("Q must be symmetric.")
        if not np.allclose(R, R.T, atol=1e-12 * (1.0 + np.abs(R).max())):
            raise ValueError("R must be symmetric.")
        if np.linalg.eigvalsh(R).min() <= 0.0:
            raise ValueError("R must be positive definite.")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", 0.5 * (Q + Q.T))
        object.__setattr__(self, "R", 0.5 * (R + R.T))

    def residual(self, P: np.ndarray) -> float:
        """Frobenius norm of the CARE residual at P."""
        gain_term: np.ndarray = P @ self.B @ np.linalg.solve(self.R, self.B.T @ P)
        return float(np.linalg.norm(self.A.T @ P + P @ self.A + self.Q - gain_term))

    def gain(self, P: np.ndarray) -> np.ndarray:
        """Feedback gain R^-1 B^T P."""
        return np.linalg.solve(self.R, self.B.T @ P)


def _shifted_stabilizing_gain(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gain placing the closed loop at Re(s) = -beta via the shifted Lyapunov solve.

    With (A + beta I) Z + Z (A + beta I)^T = 2 B B^T the gain B^T Z^+ moves
    every controllable eigenvalue onto Re(s) = -beta. Z is inverted in the
    least-squares sense so weakly controllable directions stay bounded.
    """
    n: int = A.shape[0]
    eigs: np.ndarray = np.linalg.eigvals(A)
    if np.all(eigs.real < 0.0):
        return np.zeros((B.shape[1], n))
    beta: float = max(0.0, float(-eigs.real.min())) + 1.0
    Z: np.ndarray = solve_lyapunov(A + beta * np.eye(n), 2.0 * B @ B.T)
    Z = 0.5 * (Z + Z.T)
    return B.T @ np.linalg.pinv(Z, rcond=1e-12)


def _newton_kleinman(problem: CareProblem, K0: np.ndarray) -> np.ndarray:
    A, B, Q, R = problem.A, problem.B, problem.Q, problem.R
    K: np.ndarray = K0
    P_prev: np.ndarray | None = None
    P: np.ndarray = np.zeros_like(A)
    for _ in range(CARE_MAX_ITERS):
        Ak: np.ndarray = A - B @ K
        P = solve_lyapunov(Ak.T, -(Q + K.T @ R @ K))
        P = 0.5 * (P + P.T)
        K = problem.gain(P)
        if P_prev is not None and np.linalg.norm(P - P_prev) <= CARE_TOL * (1.0 + np.linalg.norm(P)):
            break
        P_prev = P
    return P


def _accept(problem: CareProblem, P: np.ndarray) -> bool:
    if not np.all(np.isfinite(P)):
        return False
    bound: float = CARE_RESIDUAL_TOL * (1.0 + float(np.linalg.norm(P)))
    if problem.residual(P) > bound:
        return False
    return is_hurwitz(problem.A - problem.B @ problem.gain(P))


def solve_care(problem: CareProblem, initial_gain: np.ndarray | None = None) -> np.ndarray:
    """Stabilizing solution of the continuous algebraic Riccati equation.

    Newton-Kleinman iteration seeded by `initial_gain` when it stabilizes
    (A, B), otherwise by a shifted-Lyapunov stabilizing gain. When neither
    seed stabilizes, a Schur-based solve provides the seed instead.

    Args:
        problem: CARE data.
        initial_gain: Optional warm-start gain of shape (m, n).

    Returns:
        Symmetric positive semidefinite P.

    Raises:
        CareError: If no stabilizing solution meeting the residual bound exists.
    """
    A, B = problem.A, problem.B
    seeds: list[np.ndarray] = []
    if initial_gain is not None:
        K_init: np.ndarray = np.atleast_2d(np.asarray(initial_gain, dtype=float))
        if K_init.shape == (B.shape[1], A.shape[0]) and is_hurwitz(A - B @ K_init):
            seeds.append(K_init)
    K_shift: np.ndarray = _shifted_stabilizing_gain(A, B)
    if is_hurwitz(A - B @ K_shift):
        seeds.append(K_shift)

    for K0 in seeds:
        P: np.ndarray = _newton_kleinman(problem, K0)
        if _accept(problem, P):
            return P

    try:
        P_schur: np.ndarray = scipy.linalg.solve_continuous_are(A, B, problem.Q, problem.R)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as e:
        raise CareError(f"No stabilizing CARE solution: the pair (A, B) is not stabilizable ({e}).") from e
    if not np.all(np.isfinite(P_schur)) or not is_hurwitz(A - B @ problem.gain(P_schur)):
        raise CareError("No stabilizing CARE solution: the pair (A, B) is not stabilizable.")
    P = _newton_kleinman(problem, problem.gain(P_schur))
    if _accept(problem, P):
        return P
    residual: float = problem.residual(P)
    raise CareError(f"CARE residual {residual:.3e} exceeds tolerance after Newton refinement.")
