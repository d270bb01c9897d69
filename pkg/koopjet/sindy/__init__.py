"""Control-affine SINDy identification with logistic bases."""

from koopjet.sindy.fit import DEFAULT_SINDY_CONFIG, SindyConfig, SindyParams, loss_and_grad, sindy_fit
from koopjet.sindy.logistic import LogisticTerm, logistic
from koopjet.sindy.model import Linearization, SindyModel, eval_model, linearize, steady_fuel
from koopjet.sindy.simulate import PredictionResult, gen_autonomous, predict, validate_predict

__all__ = [
    "DEFAULT_SINDY_CONFIG",
    "Linearization",
    "LogisticTerm",
    "PredictionResult",
    "SindyConfig",
    "SindyModel",
    "SindyParams",
    "eval_model",
    "gen_autonomous",
    "linearize",
    "logistic",
    "loss_and_grad",
    "predict",
    "sindy_fit",
    "steady_fuel",
    "validate_predict",
]
