"""Identification dataset container and its lineage record."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from pydantic import BaseModel

from koopjet.config import P_REF
from koopjet.datakit.normalization import DEFAULT_NORMALIZATION, NormalizationSpec
from koopjet.plant.atmosphere import ISA_T0

DATASET_COLUMNS: list[str] = ["t", "N_raw", "N_filt", "N_norm", "Wf_norm", "dNdt", "segment"]


class DatasetLineage(BaseModel):
    """How a dataset was produced: noise, filter, normalization and inlet conditions."""

    sigma_rpm: float = 0.0
    seed: int | None = None
    window: int = 51
    order: int = 3
    normalization: NormalizationSpec = DEFAULT_NORMALIZATION
    T1t: float = ISA_T0
    p1t: float = P_REF
    label: str = "dataset"


@dataclass(frozen=True)
class Dataset:
    """Uniformly sampled spool-speed and fuel records.

    N_raw and N_filt are physical RPM; N_norm, Wf_norm and dN_dt are in
    normalized corrected units, dN_dt computed from the filtered channel.
    """

    t: np.ndarray
    N_raw: np.ndarray
    N_filt: np.ndarray
    N_norm: np.ndarray
    Wf_norm: np.ndarray
    dN_dt: np.ndarray
    segment: np.ndarray
    lineage: DatasetLineage = field(default_factory=DatasetLineage)

    def __post_init__(self) -> None:
        n: int = len(self.t)
        for name in ("N_raw", "N_filt", "N_norm", "Wf_norm", "dN_dt", "segment"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"Channel {name} has {len(getattr(self, name))} samples, expected {n}.")
        if n >= 2:
            steps: np.ndarray = np.diff(self.t)
            if not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-9):
                raise ValueError("Dataset time grid must be uniform.")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def window(self, t_start: float, t_end: float) -> Dataset:
        """Rows with t_start <= t < t_end."""
        mask: np.ndarray = (self.t >= t_start) & (self.t < t_end)
        return replace(
            self,
            t=self.t[mask],
            N_raw=self.N_raw[mask],
            N_filt=self.N_filt[mask],
            N_norm=self.N_norm[mask],
            Wf_norm=self.Wf_norm[mask],
            dN_dt=self.dN_dt[mask],
            segment=self.segment[mask],
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.t,
                "N_raw": self.N_raw,
                "N_filt": self.N_filt,
                "N_norm": self.N_norm,
                "Wf_norm": self.Wf_norm,
                "dNdt": self.dN_dt,
                "segment": self.segment.astype(int),
            },
            columns=DATASET_COLUMNS,
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, lineage: DatasetLineage) -> Dataset:
        missing: list[str] = [c for c in DATASET_COLUMNS if c not in frame.columns]
        if missing:
            raise ValueError(f"Dataset table lacks columns {missing}.")
        return cls(
            t=frame["t"].to_numpy(dtype=float),
            N_raw=frame["N_raw"].to_numpy(dtype=float),
            N_filt=frame["N_filt"].to_numpy(dtype=float),
            N_norm=frame["N_norm"].to_numpy(dtype=float),
            Wf_norm=frame["Wf_norm"].to_numpy(dtype=float),
            dN_dt=frame["dNdt"].to_numpy(dtype=float),
            segment=frame["segment"].to_numpy(dtype=int),
            lineage=lineage,
        )
