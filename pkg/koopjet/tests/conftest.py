"""Shared pytest fixtures for koopjet tests."""
from dataclasses import replace
from typing import Callable

import numpy as np
import pytest

from koopjet.config import P_REF, T_REF
from koopjet.datakit.dataset import Dataset, DatasetLineage
from koopjet.datakit.normalization import DEFAULT_NORMALIZATION
from koopjet.errors import NumericalError
from koopjet.koopman.eigenfunctions import EigenComponent, Eigenfunction
from koopjet.koopman.model import KoopmanModel
from koopjet.koopman.spectrum import EigenEntry, EigenvalueSet
from koopjet.plant.atmosphere import Ambient
from koopjet.plant.engine import PlantState
from koopjet.plant.limiters import LimiterResult
from koopjet.sindy.model import SindyModel

SPEC = DEFAULT_NORMALIZATION


class LinearSpool:
    """Stand-in plant with dN/dt = -2 N + 0.8 W_f in normalized units and a fixed fuel box."""

    def __init__(self, fail_at: int | None = None) -> None:
        self._reference = Ambient(H=0.0, M0=0.0, p0=P_REF, T0=T_REF, p1t=P_REF, T1t=T_REF)
        self._fail_at = fail_at
        self.steps = 0

    def ambient(self, H: float = 0.0, M0: float = 0.0) -> Ambient:
        return self._reference

    def trim(self, N: float, ambient: Ambient | None = None) -> PlantState:
        W_f = float(SPEC.denormalize_fuel(2.0 * float(SPEC.normalize_speed(N)) / 0.8))
        return PlantState(N=N, W_f=W_f, beta_c=0.0, pi_t=0.0)

    def match(self, state: PlantState, ambient: Ambient) -> PlantState:
        return state

    def step(self, state: PlantState, v_cmd: float, ambient: Ambient, dt: float) -> tuple[PlantState, LimiterResult]:
        if self._fail_at is not None and self.steps == self._fail_at:
            raise NumericalError("match did not converge")
        self.steps += 1
        v = min(max(v_cmd, 0.0), 2.0)
        N = float(SPEC.normalize_speed(state.N))
        W = float(SPEC.normalize_fuel(state.W_f))
        N_next = N + dt * (-2.0 * N + 0.8 * W)
        return replace(state, N=float(SPEC.denormalize_speed(N_next)), W_f=v), LimiterResult(v=v, clamped=v != v_cmd, lower=0.0, upper=2.0)


def _linear_sindy(rate: float = -2.0, gain: float = 0.8) -> SindyModel:
    return SindyModel(f_linear=rate, g_const=gain)


def _linear_kem(rate: float = -2.0, gain: float = 0.8) -> KoopmanModel:
    component = EigenComponent(xi=np.zeros(0), eps=np.zeros(0), mu=np.zeros(0), linear=1.0)
    eigenfunction = Eigenfunction(entry=EigenEntry(alpha=rate), components=(component,), kind="distinct-real")
    return KoopmanModel(
        eigs=EigenvalueSet(entries=(EigenEntry(alpha=rate),)),
        eigenfunctions=(eigenfunction,),
        C=np.array([1.0]),
        sindy=_linear_sindy(rate, gain),
    )


@pytest.fixture
def linear_sindy() -> SindyModel:
    """Fixture providing dN/dt = -2 N + 0.8 W_f.

    Returns:
        SindyModel with only the linear and constant weights set
    """
    return _linear_sindy()


@pytest.fixture
def linear_kem() -> KoopmanModel:
    """Fixture providing the one-state KEM of the linear model, phi(N) = N."""
    return _linear_kem()


@pytest.fixture
def make_linear_kem() -> Callable[[float, float], KoopmanModel]:
    """Fixture providing a factory for one-state KEMs with a chosen rate and input gain."""
    return _linear_kem


@pytest.fixture
def step_dataset(linear_sindy: SindyModel) -> Dataset:
    """Fixture providing a noiseless fuel step response of the linear model.

    Returns:
        Dataset sampled at 10 ms over 4 s, starting from equilibrium at N = 0.2
    """
    dt: float = 0.01
    t: np.ndarray = np.arange(0.0, 4.0, dt)
    W0: float = 0.5
    W1: float = 1.0
    N0: float = 0.8 * W0 / 2.0
    N_inf: float = 0.8 * W1 / 2.0
    N: np.ndarray = N_inf + (N0 - N_inf) * np.exp(-2.0 * t)
    lineage = DatasetLineage(label="step")
    rpm: np.ndarray = np.asarray(lineage.normalization.denormalize_speed(N))
    return Dataset(
        t=t,
        N_raw=rpm,
        N_filt=rpm.copy(),
        N_norm=N,
        Wf_norm=np.full_like(t, W1),
        dN_dt=-2.0 * (N0 - N_inf) * np.exp(-2.0 * t),
        segment=np.zeros(len(t), dtype=int),
        lineage=lineage,
    )


@pytest.fixture
def linear_spool() -> type[LinearSpool]:
    """Fixture providing the stand-in plant class; call it with `fail_at` to inject a solver failure."""
    return LinearSpool
