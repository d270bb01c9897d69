"""Excitation profiles, measurement simulation, preprocessing and dataset files.

`koopjet.datakit.acquisition` drives the engine in closed loop and is
imported explicitly by callers.
"""

from koopjet.datakit.dataset import Dataset, DatasetLineage
from koopjet.datakit.normalization import (
    DEFAULT_NORMALIZATION,
    NormalizationSpec,
    correct,
    denormalize,
    normalize,
    uncorrect,
)
from koopjet.datakit.processing import add_noise, prepare_regression
from koopjet.datakit.profiles import CommandProfile, gen_test_profiles, gen_training_profiles
from koopjet.datakit.storage import read_dataset, read_plant_trace, write_dataset, write_plant_trace

__all__ = [
    "CommandProfile",
    "DEFAULT_NORMALIZATION",
    "Dataset",
    "DatasetLineage",
    "NormalizationSpec",
    "add_noise",
    "correct",
    "denormalize",
    "gen_test_profiles",
    "gen_training_profiles",
    "normalize",
    "prepare_regression",
    "read_dataset",
    "read_plant_trace",
    "uncorrect",
    "write_dataset",
    "write_plant_trace",
]
