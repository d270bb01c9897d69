"""ADAM gradient descent with the stabilizer placed inside the square root."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class AdamState:
    """Moment estimates and schedule of one ADAM run.

    `k` is the index of the next step, starting at 1.
    `eta_p` may be a scalar or an array broadcastable to the parameters,
    which is how per-group learning rates are expressed.
    """

    v: np.ndarray
    s: np.ndarray
    k: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eta_p: float | np.ndarray = 1e-3
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 < self.beta1 < 1.0 or not 0.0 < self.beta2 < 1.0:
            raise ValueError(f"beta1 and beta2 must lie in (0, 1), got {self.beta1}, {self.beta2}.")
        if self.k < 1:
            raise ValueError(f"Iteration counter must be >= 1, got {self.k}.")
        if self.eps < 0.0:
            raise ValueError(f"eps must be non-negative, got {self.eps}.")

    @classmethod
    def zeros(
        cls,
        shape: int | tuple[int, ...],
        eta_p: float | np.ndarray = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> AdamState:
        """Fresh state with zero moments."""
        return cls(
            v=np.zeros(shape),
            s=np.zeros(shape),
            k=1,
            beta1=beta1,
            beta2=beta2,
            eta_p=eta_p,
            eps=eps,
        )

    @property
    def alpha(self) -> float | np.ndarray:
        """Bias-corrected step size for the current iteration."""
        return self.eta_p * (1.0 - self.beta2**self.k) / (1.0 - self.beta1**self.k)


def adam_step(
    params: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
) -> tuple[np.ndarray, AdamState]:
    """Advance parameters by one ADAM step.

    Args:
        params: Current parameter vector.
        grad: Gradient of the cost at `params`.
        state: Moment estimates before this step.

    Returns:
        Updated parameters and the advanced state.

    Raises:
        ValueError: If shapes differ or the gradient is not finite.
    """
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if params.shape != grad.shape or grad.shape != state.v.shape:
        raise ValueError(
            f"Shape mismatch: params {params.shape}, grad {grad.shape}, moments {state.v.shape}."
        )
    if not np.all(np.isfinite(grad)):
        bad: np.ndarray = np.flatnonzero(~np.isfinite(grad))
        raise ValueError(f"Non-finite gradient at iteration {state.k}, entries {bad[:10].tolist()}.")

    v: np.ndarray = state.beta1 * state.v + (1.0 - state.beta1) * grad
    s: np.ndarray = state.beta2 * state.s + (1.0 - state.beta2) * grad**2
    denom: np.ndarray = np.sqrt(s + state.eps)
    ratio: np.ndarray = np.divide(v, denom, out=np.zeros_like(v), where=denom > 0.0)
    new_params: np.ndarray = params - state.alpha * ratio

    return new_params, replace(state, v=v, s=s, k=state.k + 1)
