"""Measurement noise, filtering, correction and differentiation of raw records."""

from __future__ import annotations

import logging

import numpy as np

from koopjet.datakit.dataset import Dataset, DatasetLineage
from koopjet.datakit.normalization import NormalizationSpec, to_model_coordinates
from koopjet.numerics.signal import central_diff, savitzky_golay

logger = logging.getLogger(__name__)

SG_WINDOW: int = 51  # samples, 0.51 s at 10 ms
SG_ORDER: int = 3


def add_noise(series: np.ndarray, sigma_rpm: float, seed: int | None) -> np.ndarray:
    """Additive Gaussian white noise with standard deviation `sigma_rpm`."""
    if sigma_rpm < 0.0:
        raise ValueError(f"Noise standard deviation must be non-negative, got {sigma_rpm}.")
    series = np.asarray(series, dtype=float)
    if sigma_rpm == 0.0:
        return series.copy()
    rng: np.random.Generator = np.random.default_rng(seed)
    return series + rng.normal(0.0, sigma_rpm, size=series.shape)


def prepare_regression(
    t: np.ndarray,
    N_raw: np.ndarray,
    Wf_phys: np.ndarray,
    spec: NormalizationSpec,
    T1t: float,
    p1t: float,
    window: int = SG_WINDOW,
    order: int = SG_ORDER,
    segment: np.ndarray | None = None,
    sigma_rpm: float = 0.0,
    seed: int | None = None,
    label: str = "dataset",
) -> Dataset:
    """Filter the measured speed, convert to normalized corrected units, then differentiate.

    Args:
        t: Uniform time grid, s.
        N_raw: Measured physical spool speed, RPM.
        Wf_phys: Delivered physical fuel flow, kg/s.
        spec: Normalization offsets and scales.
        T1t: Inlet total temperature of the record, K.
        p1t: Inlet total pressure of the record, Pa.
        window: Savitzky-Golay window length (odd).
        order: Savitzky-Golay polynomial order.
        segment: Optional segment index per sample.
        sigma_rpm: Noise level recorded in the lineage.
        seed: Noise seed recorded in the lineage.
        label: Dataset name recorded in the lineage.

    Raises:
        ValueError: If the series is shorter than the filter window.
    """
    t = np.asarray(t, dtype=float)
    N_raw = np.asarray(N_raw, dtype=float)
    N_filt: np.ndarray = savitzky_golay(N_raw, window, order)
    N_norm, Wf_norm = to_model_coordinates(N_filt, np.asarray(Wf_phys, dtype=float), T1t, p1t, spec)
    dN_dt: np.ndarray = central_diff(N_norm, float(t[1] - t[0]))
    lineage: DatasetLineage = DatasetLineage(
        sigma_rpm=sigma_rpm, seed=seed, window=window, order=order, normalization=spec, T1t=T1t, p1t=p1t, label=label
    )
    logger.debug("Prepared %s: %d rows, window=%d order=%d", label, len(t), window, order)
    return Dataset(
        t=t,
        N_raw=N_raw,
        N_filt=N_filt,
        N_norm=np.asarray(N_norm),
        Wf_norm=np.asarray(Wf_norm),
        dN_dt=dN_dt,
        segment=np.ones(len(t), dtype=int) if segment is None else np.asarray(segment, dtype=int),
        lineage=lineage,
    )
