"""Pipeline stages: each reads its upstream artifacts from the output directory and writes its own."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd

from koopjet.bench.metrics import Metrics
from koopjet.bench.report import SUMMARY_FILE, merge_summaries, write_report
from koopjet.bench.runner import TrackingResult, run_tournament
from koopjet.bench.scenarios import Scenario, scenario_by_name
from koopjet.control import controller_class
from koopjet.control.base import ControllerBase
from koopjet.control.imc import ImcDesign, imc_design
from koopjet.control.lpv_pi import LpvPiSchedule, lpv_pi_design
from koopjet.control.lqgi import LqgiDesign, LqgiWeights, LqiSchedule, default_noise, estimate_noise, kalman_design, lqi_design
from koopjet.control.margins import MarginReport, closed_loop_spectrum, design_margins, frequency_response_frame, separation_error
from koopjet.control.weights import WeightSearchResult, optimize_weights
from koopjet.datakit.acquisition import Acquisition, AcquisitionConfig, fuel_normalization_from_plant, simulate_dataset
from koopjet.datakit.dataset import Dataset
from koopjet.datakit.normalization import NormalizationSpec
from koopjet.datakit.profiles import CommandProfile, gen_test_profiles, gen_training_profiles
from koopjet.datakit.storage import FLOAT_FORMAT, read_dataset, read_plant_trace, write_dataset, write_plant_trace
from koopjet.errors import ConfigurationError, InfeasibleDesignError
from koopjet.koopman.build import KoopmanBuild, build_koopman, order_sweep
from koopjet.koopman.model import KoopmanModel
from koopjet.koopman.thrust import fit_thrust_output, normalize_thrust, thrust_mape
from koopjet.pipeline_config import PipelineConfig
from koopjet.plant.engine import Plant
from koopjet.sindy.fit import sindy_fit
from koopjet.sindy.model import SindyModel
from koopjet.sindy.simulate import PredictionResult, validate_predict
from utils.json_helpers import content_hash, dump_json, load_json

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArtifactLayout:
    """Fixed file names under the output directory."""

    root: Path

    def dataset(self, label: str) -> Path:
        return self.root / "data" / f"{label}.csv"

    def plant_trace(self, label: str) -> Path:
        return self.root / "data" / f"{label}_plant.csv"

    @property
    def sindy(self) -> Path:
        return self.root / "models" / "sindy.json"

    @property
    def sindy_validation(self) -> Path:
        return self.root / "models" / "sindy_validation.json"

    @property
    def kem(self) -> Path:
        return self.root / "models" / "kem.json"

    def kem_variant(self, order: int, mode: str) -> Path:
        return self.root / "models" / f"kem_order{order}_{mode}.json"

    @property
    def koopman_report(self) -> Path:
        return self.root / "models" / "koopman_report.json"

    @property
    def phi_grid(self) -> Path:
        return self.root / "models" / "phi_grid.csv"

    def controller(self, name: str) -> Path:
        return self.root / "controllers" / f"{name}.json"

    def controller_table(self, name: str, table: str) -> Path:
        return self.root / "controllers" / f"{name}_{table}.csv"

    def evaluation(self, scenario: str) -> Path:
        return self.root / "bench" / scenario

    @property
    def report(self) -> Path:
        return self.root / "report" / SUMMARY_FILE

    @property
    def report_table(self) -> Path:
        return self.root / "report" / "summary.csv"


def layout(config: PipelineConfig) -> ArtifactLayout:
    return ArtifactLayout(Path(config.out_dir))


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise ConfigurationError(f"Missing {path}; run the {stage} stage first.")
    return path


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


# Data acquisition.


def normalization_for(config: PipelineConfig, plant: Plant) -> NormalizationSpec:
    spec: NormalizationSpec = config.data.normalization
    if config.data.calibrate_fuel_normalization:
        spec = fuel_normalization_from_plant(plant, spec)
        logger.info("Fuel normalization from the operating line: O_W=%.5f kg/s, S_W=%.5f kg/s", spec.O_W, spec.S_W)
    return spec


def simulate(config: PipelineConfig) -> dict[str, Any]:
    """Training and test experiments on the reference engine."""
    paths: ArtifactLayout = layout(config)
    plant = Plant(config.plant)
    spec: NormalizationSpec = normalization_for(config, plant)
    experiments: list[tuple[str, CommandProfile, int]] = [
        ("training", gen_training_profiles(config.training_seed, config.data.training), config.training_seed),
        ("test", gen_test_profiles(config.test_seed, config.data.test), config.test_seed),
    ]
    artifacts: dict[str, str] = {}
    rows: dict[str, int] = {}
    for label, profile, seed in experiments:
        acquisition_config = AcquisitionConfig(
            sigma_rpm=config.data.sigma_rpm,
            seed=seed,
            window=config.data.window,
            order=config.data.order,
            dt=float(profile.t[1] - profile.t[0]),
            H=config.data.H,
            M0=config.data.M0,
            Kp=config.data.Kp,
            Ki=config.data.Ki,
            label=label,
            progress=config.progress,
        )
        acquisition: Acquisition = simulate_dataset(plant, profile, spec, acquisition_config)
        artifacts[f"{label}_dataset"] = str(write_dataset(acquisition.dataset, paths.dataset(label)))
        artifacts[f"{label}_plant"] = str(write_plant_trace(acquisition.trace, paths.plant_trace(label)))
        rows[label] = len(acquisition.dataset)
    return {"artifacts": artifacts, "rows": rows, "seeds": config.seeds()}


# Identification.


def identify(config: PipelineConfig) -> dict[str, Any]:
    """SINDy fit on the training data, validated on both datasets."""
    paths: ArtifactLayout = layout(config)
    training: Dataset = read_dataset(_require(paths.dataset("training"), "simulate"))
    test: Dataset = read_dataset(_require(paths.dataset("test"), "simulate"))
    model: SindyModel = sindy_fit(training, config.sindy)
    model = replace(model, lineage={**model.lineage, "dataset_hash": content_hash(training.lineage)})

    results: dict[str, PredictionResult] = {
        "training": validate_predict(model, training),
        "test": validate_predict(model, test),
    }
    equation: str = model.describe()
    logger.info("Identified model:\n%s", equation)
    for label, result in results.items():
        logger.info("SINDy %s prediction: MAE %.2f RPM, MAPE %.3f%%", label, result.mae_rpm, result.mape)

    dump_json(model.to_dict(), paths.sindy)
    validation: dict[str, Any] = {label: result.summary() for label, result in results.items()}
    validation["equation"] = equation
    dump_json(validation, paths.sindy_validation)
    return {
        "artifacts": {"sindy": str(paths.sindy), "sindy_validation": str(paths.sindy_validation)},
        "equation": equation,
        "mape": {label: result.mape for label, result in results.items()},
    }


# Spectral construction.


def _attach_thrust(model: KoopmanModel, plant: Plant, dataset: Dataset, trace: pd.DataFrame) -> KoopmanModel:
    lineage = dataset.lineage
    F_cn: np.ndarray = normalize_thrust(trace["thrust"].to_numpy(), lineage.p1t, plant.design.thrust)
    thrust = fit_thrust_output(model.phi(dataset.N_norm), dataset.Wf_norm, F_cn)
    return replace(model, thrust=thrust)


def _thrust_report(model: KoopmanModel, plant: Plant, dataset: Dataset, trace: pd.DataFrame) -> float:
    F_cn: np.ndarray = normalize_thrust(trace["thrust"].to_numpy(), dataset.lineage.p1t, plant.design.thrust)
    predicted: np.ndarray = model.thrust.predict(model.phi(dataset.N_norm), dataset.Wf_norm)
    return thrust_mape(predicted, F_cn)


def spectrum(
    config: PipelineConfig,
    orders: list[int] | None = None,
    modes: tuple[Literal["real", "complex"], ...] | None = None,
) -> dict[str, Any]:
    """KEM construction for the configured order, or one KEM per order when several are given.

    With a sweep, the model of the configured order is kept as `kem.json` when
    the sweep contains it, otherwise the sweep model with the lowest
    reconstruction error.
    """
    paths: ArtifactLayout = layout(config)
    sindy: SindyModel = SindyModel.from_dict(load_json(_require(paths.sindy, "identify")))
    training: Dataset = read_dataset(_require(paths.dataset("training"), "simulate"))
    test: Dataset = read_dataset(_require(paths.dataset("test"), "simulate"))
    spec: NormalizationSpec = training.lineage.normalization
    selected_modes: tuple[Literal["real", "complex"], ...] = modes or (config.koopman.mode,)

    artifacts: dict[str, str] = {}
    if orders and (len(orders) > 1 or len(selected_modes) > 1):
        builds: list[KoopmanBuild] = order_sweep(
            sindy, config.koopman.model_copy(update={"sweep_orders": orders}), spec, modes=selected_modes
        )
        if not builds:
            raise ConfigurationError(f"No KEM could be built for orders {orders}.")
        for build in builds:
            path: Path = paths.kem_variant(build.report["order"], build.report["mode"])
            dump_json(build.model.to_dict(), path)
            artifacts[path.stem] = str(path)
        matching: list[KoopmanBuild] = [
            b for b in builds if b.report["order"] == config.koopman.order and b.report["mode"] == config.koopman.mode
        ]
        chosen: KoopmanBuild = matching[0] if matching else min(builds, key=lambda b: b.modes.mae)
        sweep: list[dict[str, Any]] = [
            {"order": b.report["order"], "mode": b.report["mode"], "states": b.model.n, "mode_mae": b.modes.mae} for b in builds
        ]
    else:
        order: int | None = orders[0] if orders else None
        chosen = build_koopman(sindy, config.koopman, spec, order=order, mode=selected_modes[0])
        sweep = []

    plant = Plant(config.plant)
    training_trace: pd.DataFrame = read_plant_trace(_require(paths.plant_trace("training"), "simulate"))
    test_trace: pd.DataFrame = read_plant_trace(_require(paths.plant_trace("test"), "simulate"))
    model: KoopmanModel = _attach_thrust(chosen.model, plant, training, training_trace)
    model = replace(model, lineage={**model.lineage, "sindy_hash": content_hash(sindy.to_dict())})

    validation: dict[str, PredictionResult] = {"training": model.validate(training), "test": model.validate(test)}
    report: dict[str, Any] = {
        **chosen.report,
        "sweep": sweep,
        "prediction": {label: result.summary() for label, result in validation.items()},
        "thrust_mape_percent": {
            "training": _thrust_report(model, plant, training, training_trace),
            "test": _thrust_report(model, plant, test, test_trace),
        },
    }
    for label, result in validation.items():
        logger.info("KEM %s prediction: MAE %.2f RPM, MAPE %.3f%%", label, result.mae_rpm, result.mape)

    dump_json(model.to_dict(), paths.kem)
    dump_json(report, paths.koopman_report)
    _write_frame(model.phi_grid_frame(), paths.phi_grid)
    artifacts.update({"kem": str(paths.kem), "koopman_report": str(paths.koopman_report), "phi_grid": str(paths.phi_grid)})
    return {"artifacts": artifacts, "order": chosen.report["order"], "states": model.n, "mape": validation["test"].mape}


# Controller design.


def _design_pi(config: PipelineConfig, model: KoopmanModel, training: Dataset) -> dict[str, Any]:
    return {"Kp": config.control.pi_Kp, "Ki": config.control.pi_Ki}


def _design_lpv_pi(config: PipelineConfig, model: KoopmanModel, training: Dataset) -> dict[str, Any]:
    schedule: LpvPiSchedule = lpv_pi_design(model.sindy, config.control.lpv_pi)
    return schedule.to_dict()


def _design_imc(config: PipelineConfig, model: KoopmanModel, training: Dataset) -> dict[str, Any]:
    imc_config = config.control.imc.model_copy(update={"T_f": config.control.T_f})
    design: ImcDesign = imc_design(model.sindy, imc_config)
    return design.to_dict()


def design_lqgi(config: PipelineConfig, model: KoopmanModel, training: Dataset) -> tuple[LqgiDesign, MarginReport]:
    """Weights (searched or configured), LQI schedule, Kalman gain and the margin check.

    Raises:
        InfeasibleDesignError: If the observer-based loop misses the margin constraints.
    """
    T_f: float = config.control.T_f
    weights: LqgiWeights = config.control.weights
    if not weights.dQ:
        weights = weights.model_copy(update={"dQ": [0.0] * model.n})
    if config.control.optimize_weights:
        search = config.control.search.model_copy(update={"T_f": T_f, "dt": training.dt})
        result: WeightSearchResult = optimize_weights(model, search, seed_weights=weights)
        weights = result.best.weights
        schedule: LqiSchedule = result.best.schedule
    else:
        schedule = lqi_design(model, weights, T_f)

    if config.control.estimate_noise:
        noise = estimate_noise(model, training)
    else:
        noise = default_noise(model.n, model.normalization, config.data.sigma_rpm)
    L: np.ndarray = kalman_design(model, noise)
    design = LqgiDesign(model=model, schedule=schedule, L=L, T_f=T_f, weights=weights, noise=noise)
    report: MarginReport = design_margins(design)
    if not report.feasible():
        raise InfeasibleDesignError(
            f"K-LQGI margins GM_min={report.gm_min:.2f} dB, PM_min={report.pm_min:.1f} deg miss the constraints.",
            report=report.to_dict(),
        )
    return replace(design, margins=report.to_dict()), report


def _design_klqgi(config: PipelineConfig, model: KoopmanModel, training: Dataset) -> dict[str, Any]:
    paths: ArtifactLayout = layout(config)
    design, report = design_lqgi(config, model, training)
    _write_frame(report.table, paths.controller_table("klqgi", "margins"))
    _write_frame(closed_loop_spectrum(design), paths.controller_table("klqgi", "spectrum"))
    frames: list[pd.DataFrame] = [
        frequency_response_frame(model, design.schedule, float(N_i), design.T_f).assign(N=float(N_i))
        for N_i in design.schedule.grid
    ]
    _write_frame(pd.concat(frames, ignore_index=True), paths.controller_table("klqgi", "frequency"))
    worst: float = max(separation_error(design, float(N_i)) for N_i in design.schedule.grid)
    logger.info(
        "K-LQGI designed: GM_min=%.2f dB, PM_min=%.1f deg, separation error %.2e", report.gm_min, report.pm_min, worst
    )
    payload: dict[str, Any] = design.to_dict()
    payload["separation_error"] = worst
    return payload


DESIGNERS = {
    "pi": _design_pi,
    "lpv-pi": _design_lpv_pi,
    "imc": _design_imc,
    "klqgi": _design_klqgi,
}


def design(config: PipelineConfig, controllers: list[str] | None = None) -> dict[str, Any]:
    """Design the selected controllers and write one JSON per controller."""
    paths: ArtifactLayout = layout(config)
    model: KoopmanModel = KoopmanModel.from_dict(load_json(_require(paths.kem, "spectrum")))
    training: Dataset = read_dataset(_require(paths.dataset("training"), "simulate"))
    names: list[str] = controllers or config.control.controllers
    kem_hash: str = content_hash(model.to_dict())
    artifacts: dict[str, str] = {}
    for name in names:
        if name not in DESIGNERS:
            raise ConfigurationError(f"Unknown controller '{name}'; expected one of {sorted(DESIGNERS)}.")
        payload: dict[str, Any] = {
            "name": name,
            "dt": training.dt,
            "normalization": model.normalization.model_dump(),
            "design": DESIGNERS[name](config, model, training),
            "lineage": {"kem_hash": kem_hash, "seeds": config.seeds()},
        }
        artifacts[f"controller_{name}"] = str(dump_json(payload, paths.controller(name)))
        logger.info("Wrote %s design to %s", name, paths.controller(name))
    return {"artifacts": artifacts, "controllers": names}


# Evaluation and report.


def controller_factory(payload: dict[str, Any]) -> partial[ControllerBase]:
    """Picklable factory building a fresh controller from its saved JSON."""
    cls: type[ControllerBase] = controller_class(payload["name"])
    spec = NormalizationSpec(**payload["normalization"])
    return partial(cls.from_design, payload["design"], spec, float(payload["dt"]))


def evaluate(config: PipelineConfig, scenarios: list[str] | None = None) -> dict[str, Any]:
    """Run every designed controller on each selected scenario and write per-scenario reports."""
    paths: ArtifactLayout = layout(config)
    factories: dict[str, partial[ControllerBase]] = {}
    for name in config.control.controllers:
        path: Path = paths.controller(name)
        if path.exists():
            factories[name] = controller_factory(load_json(path))
        else:
            logger.warning("Controller %s has no design at %s; skipped.", name, path)
    if not factories:
        raise ConfigurationError(f"No controller designs under {paths.root / 'controllers'}; run the design stage first.")

    training_lineage: str | None = None
    if paths.dataset("training").exists():
        training_lineage = content_hash(read_dataset(paths.dataset("training")).lineage)

    plant = Plant(config.plant)
    artifacts: dict[str, str] = {}
    for scenario_name in scenarios or config.bench.scenarios:
        scenario: Scenario = scenario_by_name(scenario_name, config.bench.scenario)
        results: list[tuple[TrackingResult, Metrics | None]] = run_tournament(
            factories, plant, [scenario], config.bench.sigma_rpm, config.bench.workers
        )
        target: Path = write_report(results, {scenario.name: scenario}, paths.evaluation(scenario.name), training_lineage)
        artifacts[f"evaluation_{scenario.name}"] = str(target)
    return {"artifacts": artifacts, "controllers": sorted(factories)}


def summary_frame(summary: dict[str, Any]) -> pd.DataFrame:
    """One row per controller and scenario with the metric values."""
    rows: list[dict[str, Any]] = []
    for controller, runs in sorted(summary["controllers"].items()):
        for scenario, run in sorted(runs.items()):
            metrics: dict[str, Any] = run.get("metrics") or {}
            row: dict[str, Any] = {"controller": controller, "scenario": scenario, "failed": run.get("failed", False)}
            row.update({name: entry["value"] for name, entry in metrics.items()})
            rows.append(row)
    return pd.DataFrame(rows)


def report(config: PipelineConfig) -> dict[str, Any]:
    """Merge the per-scenario evaluation summaries into one table."""
    paths: ArtifactLayout = layout(config)
    sources: list[Path] = sorted((paths.root / "bench").glob(f"*/{SUMMARY_FILE}"))
    if not sources:
        raise ConfigurationError(f"No evaluation summaries under {paths.root / 'bench'}; run the evaluate stage first.")
    summary: dict[str, Any] = merge_summaries(sources)
    summary["seeds"] = config.seeds()
    dump_json(summary, paths.report)
    _write_frame(summary_frame(summary), paths.report_table)
    logger.info("Report over %d controllers written to %s", len(summary["controllers"]), paths.report)
    return {"artifacts": {"report": str(paths.report), "report_table": str(paths.report_table)}}
