"""Single-document configuration of the identification-to-evaluation pipeline."""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ValidationError, field_validator, model_validator

from koopjet.bench.scenarios import DEFAULT_SCENARIO_CONFIG, ScenarioConfig
from koopjet.config import ENV_OUT, ENV_SEED, NOISE_SIGMA_RPM, SCHEMA_VERSION
from koopjet.control.imc import DEFAULT_IMC_CONFIG, ImcConfig
from koopjet.control.lpv_pi import DEFAULT_LPV_PI_CONFIG, LpvPiConfig
from koopjet.control.lqgi import DEFAULT_LQGI_WEIGHTS, LqgiWeights
from koopjet.control.weights import DEFAULT_WEIGHT_SEARCH_CONFIG, WeightSearchConfig
from koopjet.datakit.normalization import DEFAULT_NORMALIZATION, NormalizationSpec
from koopjet.datakit.profiles import DEFAULT_TEST_PROFILE, DEFAULT_TRAINING_PROFILE, ProfileConfig
from koopjet.errors import ConfigurationError
from koopjet.koopman.build import DEFAULT_KOOPMAN_CONFIG, KoopmanConfig
from koopjet.plant.config import PlantConfig
from koopjet.sindy.fit import DEFAULT_SINDY_CONFIG, SindyConfig

logger = logging.getLogger(__name__)

DEFAULT_PIPELINE_PATH: Path = Path(__file__).with_name("default_pipeline.json")

CONTROLLER_NAMES: tuple[str, ...] = ("pi", "lpv-pi", "imc", "klqgi")
SCENARIO_NAMES: tuple[str, ...] = ("sea", "varying", "disturbance")


class DataConfig(BaseModel):
    """Identification experiments: profiles, sensor noise, filter and normalization."""

    training: ProfileConfig = DEFAULT_TRAINING_PROFILE
    test: ProfileConfig = DEFAULT_TEST_PROFILE
    sigma_rpm: float = NOISE_SIGMA_RPM
    window: int = 51
    order: int = 3
    H: float = 0.0  # m
    M0: float = 0.0
    Kp: float = 1.0
    Ki: float = 3.0
    normalization: NormalizationSpec = DEFAULT_NORMALIZATION
    calibrate_fuel_normalization: bool = False


class ControlConfig(BaseModel):
    """Controllers to design and their settings."""

    controllers: list[str] = list(CONTROLLER_NAMES)
    T_f: float = 0.1  # s
    pi_Kp: float = 1.0
    pi_Ki: float = 3.0
    lpv_pi: LpvPiConfig = DEFAULT_LPV_PI_CONFIG
    imc: ImcConfig = DEFAULT_IMC_CONFIG
    weights: LqgiWeights = DEFAULT_LQGI_WEIGHTS
    optimize_weights: bool = True
    search: WeightSearchConfig = DEFAULT_WEIGHT_SEARCH_CONFIG
    estimate_noise: bool = True

    @field_validator("controllers")
    @classmethod
    def _check_controllers(cls, value: list[str]) -> list[str]:
        unknown: list[str] = [name for name in value if name not in CONTROLLER_NAMES]
        if unknown:
            raise ValueError(f"Unknown controllers {unknown}; expected a subset of {list(CONTROLLER_NAMES)}.")
        return value


class BenchConfig(BaseModel):
    scenarios: list[str] = list(SCENARIO_NAMES)
    scenario: ScenarioConfig = DEFAULT_SCENARIO_CONFIG
    sigma_rpm: float = NOISE_SIGMA_RPM
    workers: int = 1

    @field_validator("scenarios")
    @classmethod
    def _check_scenarios(cls, value: list[str]) -> list[str]:
        unknown: list[str] = [name for name in value if name not in SCENARIO_NAMES]
        if unknown:
            raise ValueError(f"Unknown scenarios {unknown}; expected a subset of {list(SCENARIO_NAMES)}.")
        return value


class PipelineConfig(BaseModel):
    """Every stage's settings, the output directory and the root seed.

    Stage seeds are derived from `seed` by fixed offsets (`seeded`), so one
    number reproduces a whole run.
    """

    schema_version: int = SCHEMA_VERSION
    plant: PlantConfig
    data: DataConfig = DataConfig()
    sindy: SindyConfig = DEFAULT_SINDY_CONFIG
    koopman: KoopmanConfig = DEFAULT_KOOPMAN_CONFIG
    control: ControlConfig = ControlConfig()
    bench: BenchConfig = BenchConfig()
    out_dir: str = "out"
    seed: int = 0
    progress: bool = False

    @model_validator(mode="after")
    def _check_schema(self) -> PipelineConfig:
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"Unsupported schema_version {self.schema_version}; expected {SCHEMA_VERSION}.")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}.")
        return self

    @property
    def training_seed(self) -> int:
        return self.seed

    @property
    def test_seed(self) -> int:
        return self.seed + 1

    def seeded(self) -> PipelineConfig:
        """Copy with every stage seed set from the root seed and the progress flag propagated."""
        control: ControlConfig = self.control.model_copy(
            update={
                "lpv_pi": self.control.lpv_pi.model_copy(update={"seed": self.seed + 3, "progress": self.progress}),
                "search": self.control.search.model_copy(update={"seed": self.seed + 4, "progress": self.progress}),
            }
        )
        bench: BenchConfig = self.bench.model_copy(
            update={"scenario": self.bench.scenario.model_copy(update={"seed": self.seed + 5})}
        )
        return self.model_copy(
            update={
                "sindy": self.sindy.model_copy(update={"progress": self.progress}),
                "koopman": self.koopman.model_copy(update={"seed": self.seed + 2, "progress": self.progress}),
                "control": control,
                "bench": bench,
            }
        )

    def seeds(self) -> dict[str, int]:
        """Stage seeds recorded into the outputs."""
        return {
            "root": self.seed,
            "training": self.training_seed,
            "test": self.test_seed,
            "koopman": self.koopman.seed,
            "lpv_pi": self.control.lpv_pi.seed,
            "weight_search": self.control.search.seed,
            "scenarios": self.bench.scenario.seed,
        }


def load_pipeline_config(
    path: str | Path | None = None,
    out_dir: str | None = None,
    seed: int | None = None,
    progress: bool | None = None,
) -> PipelineConfig:
    """Read, override and validate the pipeline document.

    Explicit arguments win over the `KOOPJET_OUT` and `KOOPJET_SEED`
    environment variables, which win over the file.

    Raises:
        ConfigurationError: If the file is missing, malformed, lacks the
            plant block or fails validation.
    """
    source: Path = Path(path) if path is not None else DEFAULT_PIPELINE_PATH
    try:
        payload: dict[str, Any] = json.loads(source.read_text())
    except FileNotFoundError as e:
        raise ConfigurationError(f"Pipeline configuration not found: {source}.") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Pipeline configuration {source} is not valid JSON: {e}.") from e
    if not isinstance(payload, dict) or "plant" not in payload:
        raise ConfigurationError(f"Pipeline configuration {source} has no plant block.")

    env_out: str | None = os.environ.get(ENV_OUT)
    env_seed: str | None = os.environ.get(ENV_SEED)
    if env_out:
        payload["out_dir"] = env_out
    if env_seed:
        try:
            payload["seed"] = int(env_seed)
        except ValueError as e:
            raise ConfigurationError(f"{ENV_SEED} must be an integer, got '{env_seed}'.") from e
    if out_dir is not None:
        payload["out_dir"] = out_dir
    if seed is not None:
        payload["seed"] = seed
    if progress is not None:
        payload["progress"] = progress

    try:
        config: PipelineConfig = PipelineConfig.model_validate(payload)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid pipeline configuration {source}: {e}") from e
    logger.debug("Loaded pipeline configuration %s (out=%s, seed=%d)", source, config.out_dir, config.seed)
    return config.seeded()
