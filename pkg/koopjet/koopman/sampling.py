"""Sample patterns that grow denser towards N = 0."""

from __future__ import annotations

from typing import Literal

import numpy as np


def nonlinear_sampling(
    count: int,
    kind: Literal["exponential", "power"] = "exponential",
    param: float = 5.0,
    N_max: float = 1.0,
) -> np.ndarray:
    """Strictly increasing samples in (0, N_max].

    Relative positions s_i = i / count, i = 1..count, are mapped by
    `exponential`: (exp(param s) - 1) / (exp(param) - 1), or by
    `power`: s**param. param = 0 (exponential) or 1 (power) gives uniform
    spacing.
    """
    if count < 2:
        raise ValueError(f"count must be >= 2, got {count}.")
    if N_max <= 0.0:
        raise ValueError(f"N_max must be positive, got {N_max}.")
    s: np.ndarray = np.arange(1, count + 1, dtype=float) / count
    if kind == "exponential":
        if param < 0.0:
            raise ValueError(f"Exponential sampling needs param >= 0, got {param}.")
        mapped: np.ndarray = s if param == 0.0 else np.expm1(param * s) / np.expm1(param)
    elif kind == "power":
        if param < 1.0:
            raise ValueError(f"Power sampling needs param >= 1, got {param}.")
        mapped = s**param
    else:
        raise ValueError(f"Unknown sampling kind '{kind}'.")
    return N_max * mapped
