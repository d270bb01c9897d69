"""Speed governors: PI, LPV-PI, IMC and Koopman LQGI, with weight search and margin analysis."""

from koopjet.control.base import ControlAction, ControlInput, ControllerBase
from koopjet.control.imc import ImcConfig, ImcController, ImcDesign, imc_design, imc_gains, imc_step
from koopjet.control.lpv_pi import LpvPiConfig, LpvPiController, LpvPiSchedule, flight_gain_correction, lpv_pi_design
from koopjet.control.lqgi import (
    LqgiController,
    LqgiDesign,
    LqgiState,
    LqgiWeights,
    LqiSchedule,
    ObserverNoise,
    augment_system,
    estimate_noise,
    kalman_design,
    lqgi_step,
    lqi_design,
    lqr_gain,
)
from koopjet.control.margins import MarginReport, closed_loop_spectrum, design_margins, margins, separation_error
from koopjet.control.pi import PiController, PiGains, pi_step
from koopjet.control.weights import WeightSearchConfig, WeightSearchResult, optimize_weights
from utils.dynamic_loading import load_class

CONTROLLER_REGISTRY: dict[str, str] = {
    "pi": "koopjet.control.pi:PiController",
    "lpv-pi": "koopjet.control.lpv_pi:LpvPiController",
    "imc": "koopjet.control.imc:ImcController",
    "klqgi": "koopjet.control.lqgi:LqgiController",
}


def controller_class(name: str) -> type[ControllerBase]:
    """Controller class registered under `name`.

    Raises:
        ValueError: For an unknown name.
    """
    try:
        reference: str = CONTROLLER_REGISTRY[name]
    except KeyError:
        raise ValueError(f"Unknown controller '{name}'; expected one of {sorted(CONTROLLER_REGISTRY)}.") from None
    return load_class(reference, base=ControllerBase)


__all__ = [
    "CONTROLLER_REGISTRY",
    "ControlAction",
    "ControlInput",
    "ControllerBase",
    "ImcConfig",
    "ImcController",
    "ImcDesign",
    "LpvPiConfig",
    "LpvPiController",
    "LpvPiSchedule",
    "LqgiController",
    "LqgiDesign",
    "LqgiState",
    "LqgiWeights",
    "LqiSchedule",
    "MarginReport",
    "ObserverNoise",
    "PiController",
    "PiGains",
    "WeightSearchConfig",
    "WeightSearchResult",
    "augment_system",
    "closed_loop_spectrum",
    "controller_class",
    "design_margins",
    "estimate_noise",
    "flight_gain_correction",
    "imc_design",
    "imc_gains",
    "imc_step",
    "kalman_design",
    "lpv_pi_design",
    "lqgi_step",
    "lqi_design",
    "lqr_gain",
    "margins",
    "optimize_weights",
    "pi_step",
    "separation_error",
]
