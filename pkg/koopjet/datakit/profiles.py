"""Excitation command profiles for identification experiments.

Commands are normalized corrected spool-speed setpoints in [0, 1]; a
closed-loop controller turns them into fuel flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal
from pydantic import BaseModel, model_validator

from koopjet.config import DT


class ProfileConfig(BaseModel):
    """Timing of the three identification segments."""

    segment_duration: float = 500.0  # s
    dt: float = DT
    step_rise: tuple[float, float] = (1.0, 2.0)  # s, ramp duration of segment-1 commands
    step_interval: tuple[float, float] = (8.0, 12.0)  # s, time between segment-1 commands
    chirp_f1: float = 0.25  # Hz, final frequency of the segment-2 sweep
    chirp_center: float = 0.5
    chirp_amplitude: float = 0.4
    slow_ramp: tuple[float, float] = (10.0, 30.0)  # s, segment-3 ramp duration
    slow_dwell: tuple[float, float] = (20.0, 40.0)  # s, segment-3 hold time
    level_range: tuple[float, float] = (0.0, 1.0)

    @model_validator(mode="after")
    def _check(self) -> ProfileConfig:
        for name in ("step_rise", "step_interval", "slow_ramp", "slow_dwell", "level_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0.0:
                raise ValueError(f"{name} must be a non-negative (lo, hi) pair, got ({lo}, {hi}).")
        if self.step_rise[1] >= self.step_interval[0]:
            raise ValueError("Segment-1 ramps must finish before the next command.")
        lo, hi = self.level_range
        if self.chirp_center - self.chirp_amplitude < 0.0 or self.chirp_center + self.chirp_amplitude > 1.0:
            raise ValueError("Chirp must stay inside the normalized range.")
        if lo < 0.0 or hi > 1.0:
            raise ValueError("level_range must lie inside [0, 1].")
        return self


# Training data as used for identification.
DEFAULT_TRAINING_PROFILE: ProfileConfig = ProfileConfig()

# Held-out data with overall faster dynamics.
DEFAULT_TEST_PROFILE: ProfileConfig = ProfileConfig(
    step_rise=(0.5, 1.0),
    step_interval=(4.0, 8.0),
    chirp_f1=0.5,
    slow_ramp=(5.0, 15.0),
    slow_dwell=(10.0, 20.0),
)


@dataclass(frozen=True)
class CommandProfile:
    """Setpoint series on a uniform grid with the segment index of each sample."""

    t: np.ndarray
    N_d: np.ndarray
    segment: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def _ramp_hold(
    knots: list[tuple[float, float]],
    t_local: np.ndarray,
) -> np.ndarray:
    times, values = zip(*knots)
    return np.interp(t_local, np.asarray(times), np.asarray(values))


def _step_segment(config: ProfileConfig, t_local: np.ndarray, rng: np.random.Generator, start: float) -> np.ndarray:
    lo, hi = config.level_range
    knots: list[tuple[float, float]] = [(0.0, start)]
    level: float = start
    t_change: float = float(rng.uniform(*config.step_interval))
    while t_change < config.segment_duration:
        rise: float = float(rng.uniform(*config.step_rise))
        knots.append((t_change, level))
        level = float(rng.uniform(lo, hi))
        knots.append((t_change + rise, level))
        t_change += float(rng.uniform(*config.step_interval))
    return _ramp_hold(knots, t_local)


def chirp_instantaneous_frequency(t: np.ndarray | float, duration: float, f1: float) -> np.ndarray | float:
    """Frequency of the linear sweep from 0 Hz to f1 over `duration`."""
    return f1 * np.asarray(t) / duration


def _chirp_segment(config: ProfileConfig, t_local: np.ndarray) -> np.ndarray:
    # Phase -90 deg starts the sweep at the centre level.
    sweep: np.ndarray = scipy.signal.chirp(
        t_local, f0=0.0, t1=config.segment_duration, f1=config.chirp_f1, method="linear", phi=-90.0
    )
    return config.chirp_center + config.chirp_amplitude * sweep


def _slow_segment(config: ProfileConfig, t_local: np.ndarray, rng: np.random.Generator, start: float) -> np.ndarray:
    lo, hi = config.level_range
    knots: list[tuple[float, float]] = [(0.0, start)]
    t_now: float = float(rng.uniform(*config.slow_dwell))
    level: float = start
    while t_now < config.segment_duration:
        knots.append((t_now, level))
        t_now += float(rng.uniform(*config.slow_ramp))
        level = float(rng.uniform(lo, hi))
        knots.append((t_now, level))
        t_now += float(rng.uniform(*config.slow_dwell))
    return _ramp_hold(knots, t_local)


def gen_profiles(config: ProfileConfig, seed: int) -> CommandProfile:
    """Concatenate the step, chirp and slow-ramp segments on one uniform grid.

    Segment boundaries are joined by a short ramp so the setpoint stays
    continuous.
    """
    rng: np.random.Generator = np.random.default_rng(seed)
    n_seg: int = int(round(config.segment_duration / config.dt))
    t_local: np.ndarray = np.arange(n_seg) * config.dt

    chirp: np.ndarray = _chirp_segment(config, t_local)
    step: np.ndarray = _step_segment(config, t_local, rng, start=0.0)
    step = _blend_into(step, chirp[0], config)
    slow: np.ndarray = _slow_segment(config, t_local, rng, start=float(chirp[-1]))

    N_d: np.ndarray = np.clip(np.concatenate([step, chirp, slow]), 0.0, 1.0)
    t: np.ndarray = np.arange(3 * n_seg + 1) * config.dt
    N_d = np.append(N_d, N_d[-1])
    segment: np.ndarray = np.append(np.repeat(np.arange(1, 4), n_seg), 3)
    return CommandProfile(t=t, N_d=N_d, segment=segment)


def _blend_into(series: np.ndarray, target: float, config: ProfileConfig) -> np.ndarray:
    """Ramp the last seconds of a segment onto the next segment's first value."""
    n_blend: int = int(round(config.step_rise[1] / config.dt))
    tail_start: float = float(series[-n_blend - 1])
    series = series.copy()
    series[-n_blend - 1 :] = np.linspace(tail_start, target, n_blend + 1)
    return series


def gen_training_profiles(seed: int = 0, config: ProfileConfig = DEFAULT_TRAINING_PROFILE) -> CommandProfile:
    """Three 500 s identification segments: steps, frequency sweep, slow ramps."""
    return gen_profiles(config, seed)


def gen_test_profiles(seed: int = 1, config: ProfileConfig = DEFAULT_TEST_PROFILE) -> CommandProfile:
    """Held-out segments with faster rises, a wider sweep and shorter dwells."""
    return gen_profiles(config, seed)
