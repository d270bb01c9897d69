"""Tests for the SINDy model, its identification and its linearization."""
import numpy as np
import pytest

from koopjet.datakit.dataset import Dataset, DatasetLineage
from koopjet.sindy.fit import SindyConfig, sindy_fit
from koopjet.sindy.logistic import LogisticTerm, logistic
from koopjet.sindy.model import SindyModel, eval_model, linearize, steady_fuel
from koopjet.sindy.simulate import gen_autonomous, predict, validate_predict


def _regression_dataset(seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    n: int = 400
    t = np.arange(n) * 0.01
    N = rng.uniform(0.1, 0.9, n)
    W = rng.uniform(0.0, 1.0, n)
    lineage = DatasetLineage(label="regression")
    rpm = np.asarray(lineage.normalization.denormalize_speed(N))
    return Dataset(
        t=t,
        N_raw=rpm,
        N_filt=rpm.copy(),
        N_norm=N,
        Wf_norm=W,
        dN_dt=-2.0 * N + 0.8 * W,
        segment=np.zeros(n, dtype=int),
        lineage=lineage,
    )


@pytest.mark.parametrize("N, W_f, expected", [
    (0.0, 0.0, 0.0),
    (0.5, 0.0, -1.0),
    (0.5, 1.0, -0.2),
    (0.2, 0.5, 0.0),  # Equilibrium
])
def test_linear_model_evaluation(linear_sindy, N, W_f, expected):
    """dN/dt = -2 N + 0.8 W_f evaluated pointwise."""
    assert linear_sindy(N, W_f) == pytest.approx(expected)
    assert eval_model(linear_sindy, N, W_f) == pytest.approx(expected)


def test_steady_fuel_and_linearization(linear_sindy):
    """The linear model has K_e = b / -a = 0.4 and T_e = 0.5 everywhere."""
    assert steady_fuel(linear_sindy, 0.4) == pytest.approx(1.0)
    lin = linearize(linear_sindy, 0.4)
    assert lin.stable
    assert lin.a == pytest.approx(-2.0)
    assert lin.b == pytest.approx(0.8)
    assert lin.K_e == pytest.approx(0.4)
    assert lin.T_e == pytest.approx(0.5)


def test_positive_slope_reported_unstable():
    """A growing linearization is flagged rather than raised."""
    lin = linearize(SindyModel(f_linear=1.0, g_const=1.0), 0.5)
    assert not lin.stable


def test_steady_fuel_rejects_vanishing_gain():
    """Without an input gain the steady fuel flow is undefined."""
    with pytest.raises(ValueError):
        steady_fuel(SindyModel(f_linear=-1.0), 0.5)


def test_logistic_term_slope_matches_finite_difference():
    """The analytic derivative of a logistic term agrees with a central difference."""
    term = LogisticTerm(xi=0.7, eps=12.0, mu=0.4)
    h = 1e-6
    numeric = (term(0.45 + h) - term(0.45 - h)) / (2.0 * h)
    assert term.derivative(0.45) == pytest.approx(numeric, rel=1e-6)
    assert logistic(0.4, 12.0, 0.4) == pytest.approx(0.5)


@pytest.mark.parametrize("eps, mu, degenerate", [
    (10.0, 0.5, False),
    (10.0, 4.0, True),  # Centre far outside the unit range
    (1e-4, 0.5, True),  # Flat
])
def test_logistic_degeneracy(eps, mu, degenerate):
    """Terms that are constant over [0, 1] are recognised as degenerate."""
    assert LogisticTerm(xi=1.0, eps=eps, mu=mu).is_degenerate() is degenerate


def test_logistic_model_derivatives():
    """df/dN of a logistic model matches a central difference."""
    model = SindyModel(
        f_terms=(LogisticTerm(xi=-1.5, eps=8.0, mu=0.3),),
        g_terms=(LogisticTerm(xi=0.6, eps=5.0, mu=0.7),),
        f_linear=-0.5,
        g_const=0.2,
    )
    h = 1e-6
    for N in (0.1, 0.5, 0.9):
        assert model.df_dN(N) == pytest.approx((model.f(N + h) - model.f(N - h)) / (2.0 * h), rel=1e-5)
        assert model.dg_dN(N) == pytest.approx((model.g(N + h) - model.g(N - h)) / (2.0 * h), rel=1e-5)


def test_describe_lists_active_terms(linear_sindy):
    """The printed equation shows the active weights and nothing for pruned ones."""
    text = linear_sindy.describe()
    assert "dN/dt = f(N) + g(N)*W_f" in text
    assert "-2*N" in text
    assert "+0.8" in text
    assert "LF(N;" not in text.splitlines()[1]


def test_model_dict_restores_behaviour():
    """A model read back from its dictionary evaluates identically."""
    model = SindyModel(
        f_terms=(LogisticTerm(xi=-1.5, eps=8.0, mu=0.3),),
        g_terms=(LogisticTerm(xi=0.6, eps=5.0, mu=0.7),),
        f_linear=-0.5,
        g_const=0.2,
        lineage={"dataset_hash": "abc"},
    )
    restored = SindyModel.from_dict(model.to_dict())
    N = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(restored(N, 0.3), model(N, 0.3))
    assert restored.lineage["dataset_hash"] == "abc"


def test_predict_matches_closed_form(linear_sindy):
    """RK4 prediction of the linear model tracks its exponential step response."""
    dt = 0.01
    t = np.arange(0.0, 3.0, dt)
    N = predict(linear_sindy, 0.2, np.ones_like(t), dt)
    np.testing.assert_allclose(N, 0.4 - 0.2 * np.exp(-2.0 * t), atol=1e-9)


def test_autonomous_trajectories_decay_to_floor(linear_sindy):
    """Unforced rows follow N0 exp(-2 t) on a shared grid that stops once all rows reach the floor."""
    t, N = gen_autonomous(linear_sindy, [0.5, 1.0])
    assert N.shape == (2, len(t))
    np.testing.assert_allclose(N, np.outer([0.5, 1.0], np.exp(-2.0 * t)), rtol=1e-6, atol=1e-12)
    assert np.all(N[:, -1] <= 1e-4)
    assert N[1, -2] > 1e-4
    assert t[-1] < 15.0


@pytest.mark.parametrize("initial", [[0.0], [0.5, 1.2], []])
def test_autonomous_rejects_initial_conditions(linear_sindy, initial):
    """Initial conditions must be given and lie in (0, 1]."""
    with pytest.raises(ValueError):
        gen_autonomous(linear_sindy, initial)


def test_validate_predict_on_consistent_data(linear_sindy, step_dataset):
    """A model that generated the data validates with negligible error."""
    result = validate_predict(linear_sindy, step_dataset)
    assert result.mae_rpm < 1e-4
    assert result.summary()["mae_rpm"] == pytest.approx(result.mae_rpm)


def test_fit_recovers_linear_library_weights():
    """On noiseless linear data the polished fit recovers -2 N + 0.8 W_f and prunes the rest."""
    data = _regression_dataset()
    config = SindyConfig(n_f_logistic=0, n_g_logistic=0, alphas=(1e-4,), max_iters=5)
    model = sindy_fit(data, config, validation=data)
    assert model.f_linear == pytest.approx(-2.0, abs=1e-6)
    assert model.g_const == pytest.approx(0.8, abs=1e-6)
    assert model.g_linear == 0.0
    assert model.f_const == 0.0
    assert model.lineage["training_samples"] == len(data)


def test_fit_without_validation_needs_long_record():
    """The default hold-out needs more data than a short record provides."""
    with pytest.raises(ValueError):
        sindy_fit(_regression_dataset(), SindyConfig(n_f_logistic=0, n_g_logistic=0, max_iters=1))


def test_default_learning_rates_favour_slopes():
    """Weights and centres step at 0.01 while the logistic slopes step at 50."""
    assert SindyConfig().learning_rates == (0.01, 50.0, 0.01)
