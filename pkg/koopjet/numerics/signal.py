"""Savitzky-Golay smoothing and finite differences."""

from __future__ import annotations

import numpy as np
import scipy.signal


def savitzky_golay(x: np.ndarray, window: int, order: int) -> np.ndarray:
    """Smooth a uniformly sampled series with a Savitzky-Golay filter.

    Edges are handled by fitting a polynomial to the first and last windows,
    so polynomials up to `order` pass through unchanged everywhere.

    Raises:
        ValueError: If the window is even, not longer than the order, or
            longer than the series.
    """
    x = np.asarray(x, dtype=float)
    if window % 2 != 1 or window < 1:
        raise ValueError(f"window must be a positive odd count, got {window}.")
    if order >= window:
        raise ValueError(f"order must be below window, got order={order}, window={window}.")
    if len(x) < window:
        raise ValueError(f"Series of length {len(x)} is shorter than the filter window {window}.")
    return scipy.signal.savgol_filter(x, window, order, mode="interp")


def causal_savgol_derivative_coeffs(window: int, order: int, dt: float) -> np.ndarray:
    """Weights giving the smoothed first derivative at the newest sample of a window.

    Dot the weights with the window ordered oldest to newest.
    """
    return scipy.signal.savgol_coeffs(window, order, deriv=1, delta=dt, pos=window - 1, use="dot")


def central_diff(x: np.ndarray, dt: float) -> np.ndarray:
    """Second-order derivative estimate: central inside, one-sided at the ends.

    Raises:
        ValueError: If the series has fewer than three samples.
    """
    x = np.asarray(x, dtype=float)
    if len(x) < 3:
        raise ValueError(f"Need at least 3 samples, got {len(x)}.")
    return np.gradient(x, dt, edge_order=2)
