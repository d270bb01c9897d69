"""SINDy identification with adaptive logistic bases.

Cost: mean squared derivative residual + alpha * ||Xi||_1 + K0 * |f(0)|.
Each round runs ADAM on (Xi, eps, mu), re-solves the linear weights for
fixed (eps, mu) under f(0) = 0, prunes small and degenerate terms, and
re-solves again. Later rounds use smaller alpha.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
import scipy.linalg
from pydantic import BaseModel, field_validator, model_validator
from scipy.special import expit
from tqdm import tqdm

from koopjet.datakit.dataset import Dataset
from koopjet.errors import FitError, NumericalError
from koopjet.numerics.adam import AdamState, adam_step
from koopjet.sindy.logistic import DEGENERATE_EPS, DEGENERATE_MU_BOUND, LogisticTerm, logistic_matrix
from koopjet.sindy.model import SindyModel
from koopjet.sindy.simulate import validate_predict

logger = logging.getLogger(__name__)

# Order of the four linear library weights inside SindyParams.lin.
LIN_N, LIN_F_CONST, LIN_NW, LIN_W = 0, 1, 2, 3


class SindyConfig(BaseModel):
    """Library and descent settings.

    `learning_rates` holds the ADAM base rates for (Xi, eps, mu).
    """

    n_f_logistic: int = 5
    n_g_logistic: int = 5
    init_eps: float = 10.0
    init_mu_range: tuple[float, float] = (0.1, 0.9)
    alphas: tuple[float, ...] = (1e-4, 1e-5)
    threshold: float = 0.005
    learning_rates: tuple[float, float, float] = (0.01, 50.0, 0.01)
    K0: float = 10.0
    max_iters: int = 1000
    validate_every: int = 10
    patience: int = 3
    validation_span: float = 100.0  # s held out when no validation set is given
    ridge: float = 1e-10
    mu_bound: float = DEGENERATE_MU_BOUND
    eps_min: float = DEGENERATE_EPS
    progress: bool = False

    @field_validator("alphas")
    @classmethod
    def _check_alphas(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value or any(a < 0.0 for a in value):
            raise ValueError(f"alphas must be a non-empty list of non-negative weights, got {value}.")
        return value

    @model_validator(mode="after")
    def _check(self) -> SindyConfig:
        if self.n_f_logistic < 0 or self.n_g_logistic < 0:
            raise ValueError("Logistic term counts must be non-negative.")
        if self.validate_every < 1 or self.patience < 1 or self.max_iters < 0:
            raise ValueError("validate_every and patience must be >= 1, max_iters >= 0.")
        if any(rate <= 0.0 for rate in self.learning_rates):
            raise ValueError(f"Learning rates must be positive, got {self.learning_rates}.")
        return self


DEFAULT_SINDY_CONFIG: SindyConfig = SindyConfig()


@dataclass(frozen=True)
class SindyParams:
    """Flat parameter set of the library with activity masks."""

    f_xi: np.ndarray
    f_eps: np.ndarray
    f_mu: np.ndarray
    g_xi: np.ndarray
    g_eps: np.ndarray
    g_mu: np.ndarray
    lin: np.ndarray
    f_mask: np.ndarray
    g_mask: np.ndarray
    lin_mask: np.ndarray

    @classmethod
    def initial(cls, config: SindyConfig) -> SindyParams:
        """13-term starting library: LFs for f and g plus N, N*W_f and W_f."""
        nf, ng = config.n_f_logistic, config.n_g_logistic
        lo, hi = config.init_mu_range
        return cls(
            f_xi=np.zeros(nf),
            f_eps=np.full(nf, config.init_eps),
            f_mu=np.linspace(lo, hi, nf),
            g_xi=np.zeros(ng),
            g_eps=np.full(ng, config.init_eps),
            g_mu=np.linspace(lo, hi, ng),
            lin=np.zeros(4),
            f_mask=np.ones(nf, dtype=bool),
            g_mask=np.ones(ng, dtype=bool),
            # No plain constant in f until a degenerate LF is merged into it.
            lin_mask=np.array([True, False, True, True]),
        )

    @property
    def n_active(self) -> int:
        return int(self.f_mask.sum() + self.g_mask.sum() + self.lin_mask.sum())

    def pack(self) -> np.ndarray:
        return np.concatenate([self.f_xi, self.f_eps, self.f_mu, self.g_xi, self.g_eps, self.g_mu, self.lin])

    def unpack(self, theta: np.ndarray) -> SindyParams:
        nf, ng = len(self.f_xi), len(self.g_xi)
        cuts: np.ndarray = np.cumsum([nf, nf, nf, ng, ng, ng])
        parts: list[np.ndarray] = np.split(np.asarray(theta, dtype=float), cuts)
        return replace(
            self,
            f_xi=parts[0], f_eps=parts[1], f_mu=parts[2],
            g_xi=parts[3], g_eps=parts[4], g_mu=parts[5],
            lin=parts[6],
        )

    def mask_vector(self) -> np.ndarray:
        fm: np.ndarray = self.f_mask.astype(float)
        gm: np.ndarray = self.g_mask.astype(float)
        return np.concatenate([fm, fm, fm, gm, gm, gm, self.lin_mask.astype(float)])

    def rate_vector(self, rates: tuple[float, float, float]) -> np.ndarray:
        r_xi, r_eps, r_mu = rates
        nf, ng = len(self.f_xi), len(self.g_xi)
        return np.concatenate(
            [
                np.full(nf, r_xi), np.full(nf, r_eps), np.full(nf, r_mu),
                np.full(ng, r_xi), np.full(ng, r_eps), np.full(ng, r_mu),
                np.full(4, r_xi),
            ]
        )

    def f_at_zero(self) -> float:
        s0: np.ndarray = expit(-self.f_eps * self.f_mu)
        return float(s0 @ (self.f_xi * self.f_mask) + self.lin[LIN_F_CONST] * self.lin_mask[LIN_F_CONST])

    def to_model(self, lineage: dict[str, Any] | None = None) -> SindyModel:
        lin: np.ndarray = self.lin * self.lin_mask
        return SindyModel(
            f_terms=tuple(
                LogisticTerm(xi=float(x), eps=float(e), mu=float(m))
                for x, e, m, on in zip(self.f_xi, self.f_eps, self.f_mu, self.f_mask)
                if on
            ),
            g_terms=tuple(
                LogisticTerm(xi=float(x), eps=float(e), mu=float(m))
                for x, e, m, on in zip(self.g_xi, self.g_eps, self.g_mu, self.g_mask)
                if on
            ),
            f_linear=float(lin[LIN_N]),
            f_const=float(lin[LIN_F_CONST]),
            g_linear=float(lin[LIN_NW]),
            g_const=float(lin[LIN_W]),
            lineage=dict(lineage or {}),
        )


def loss_and_grad(
    params: SindyParams,
    N: np.ndarray,
    W: np.ndarray,
    y: np.ndarray,
    alpha: float,
    K0: float,
) -> tuple[float, np.ndarray]:
    """Cost and its analytic gradient with respect to `params.pack()`.

    Gradients of inactive entries are zero.
    """
    T: int = len(y)
    fx: np.ndarray = params.f_xi * params.f_mask
    gx: np.ndarray = params.g_xi * params.g_mask
    lin: np.ndarray = params.lin * params.lin_mask

    Sf: np.ndarray = logistic_matrix(N, params.f_eps, params.f_mu)
    Sg: np.ndarray = logistic_matrix(N, params.g_eps, params.g_mu)
    f: np.ndarray = Sf @ fx + lin[LIN_N] * N + lin[LIN_F_CONST]
    g: np.ndarray = Sg @ gx + lin[LIN_NW] * N + lin[LIN_W]
    r: np.ndarray = f + g * W - y

    dr: np.ndarray = 2.0 * r / T
    drW: np.ndarray = dr * W
    DSf: np.ndarray = Sf * (1.0 - Sf)
    DSg: np.ndarray = Sg * (1.0 - Sg)

    g_fxi: np.ndarray = Sf.T @ dr
    g_feps: np.ndarray = fx * ((DSf * (N[:, None] - params.f_mu[None, :])).T @ dr)
    g_fmu: np.ndarray = -fx * params.f_eps * (DSf.T @ dr)
    g_gxi: np.ndarray = Sg.T @ drW
    g_geps: np.ndarray = gx * ((DSg * (N[:, None] - params.g_mu[None, :])).T @ drW)
    g_gmu: np.ndarray = -gx * params.g_eps * (DSg.T @ drW)
    g_lin: np.ndarray = np.array([dr @ N, dr.sum(), drW @ N, drW.sum()])

    loss: float = float(r @ r) / T

    # L1 on every weight.
    loss += alpha * float(np.abs(fx).sum() + np.abs(gx).sum() + np.abs(lin).sum())
    g_fxi = g_fxi + alpha * np.sign(fx)
    g_gxi = g_gxi + alpha * np.sign(gx)
    g_lin = g_lin + alpha * np.sign(lin)

    # Zero-at-origin penalty on f.
    s0: np.ndarray = expit(-params.f_eps * params.f_mu)
    f0: float = float(s0 @ fx + lin[LIN_F_CONST])
    loss += K0 * abs(f0)
    k: float = K0 * float(np.sign(f0))
    ds0: np.ndarray = s0 * (1.0 - s0)
    g_fxi = g_fxi + k * s0
    g_feps = g_feps + k * fx * ds0 * (-params.f_mu)
    g_fmu = g_fmu + k * fx * ds0 * (-params.f_eps)
    g_lin[LIN_F_CONST] += k

    grad: np.ndarray = np.concatenate([g_fxi, g_feps, g_fmu, g_gxi, g_geps, g_gmu, g_lin])
    return loss, grad * params.mask_vector()


def polish_weights(params: SindyParams, N: np.ndarray, W: np.ndarray, y: np.ndarray, ridge: float) -> SindyParams:
    """Least-squares weights for fixed (eps, mu) subject to f(0) = 0.

    The constraint is imposed through the KKT system of the equality
    constrained problem. Without any f-term active at the origin the plain
    ridge solution is returned.
    """
    f_idx: np.ndarray = np.flatnonzero(params.f_mask)
    g_idx: np.ndarray = np.flatnonzero(params.g_mask)
    Sf: np.ndarray = logistic_matrix(N, params.f_eps[f_idx], params.f_mu[f_idx])
    Sg: np.ndarray = logistic_matrix(N, params.g_eps[g_idx], params.g_mu[g_idx])

    lin_columns: list[np.ndarray] = [N, np.ones_like(N), N * W, W]
    lin_idx: np.ndarray = np.flatnonzero(params.lin_mask)
    Phi: np.ndarray = np.hstack([Sf, Sg * W[:, None]] + [lin_columns[i][:, None] for i in lin_idx])
    p: int = Phi.shape[1]
    if p == 0:
        return params

    a: np.ndarray = np.zeros(p)
    a[: len(f_idx)] = expit(-params.f_eps[f_idx] * params.f_mu[f_idx])
    for j, i in enumerate(lin_idx):
        if i == LIN_F_CONST:
            a[len(f_idx) + len(g_idx) + j] = 1.0

    T: int = len(y)
    H: np.ndarray = Phi.T @ Phi / T
    H += ridge * max(float(np.trace(H)) / p, 1.0) * np.eye(p)
    rhs: np.ndarray = Phi.T @ y / T
    try:
        if np.any(a != 0.0):
            scale: float = float(np.linalg.norm(a))
            kkt: np.ndarray = np.block([[H, a[:, None] / scale], [a[None, :] / scale, np.zeros((1, 1))]])
            w: np.ndarray = scipy.linalg.solve(kkt, np.append(rhs, 0.0), assume_a="sym")[:p]
        else:
            w = scipy.linalg.solve(H, rhs, assume_a="pos")
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"Linear weight polish failed: {e}.") from e

    f_xi: np.ndarray = params.f_xi.copy()
    g_xi: np.ndarray = params.g_xi.copy()
    lin: np.ndarray = np.zeros(4)
    f_xi[f_idx] = w[: len(f_idx)]
    g_xi[g_idx] = w[len(f_idx): len(f_idx) + len(g_idx)]
    lin[lin_idx] = w[len(f_idx) + len(g_idx):]
    return replace(params, f_xi=f_xi, g_xi=g_xi, lin=lin)


def prune(params: SindyParams, threshold: float, mu_bound: float, eps_min: float) -> SindyParams:
    """Merge degenerate LFs into constants, then drop weights with |xi| <= threshold.

    A degenerate f-term joins the constant of f, a degenerate g-term joins
    the weight of the plain W_f term.
    """
    f_mask: np.ndarray = params.f_mask.copy()
    g_mask: np.ndarray = params.g_mask.copy()
    lin_mask: np.ndarray = params.lin_mask.copy()
    f_xi: np.ndarray = params.f_xi.copy()
    g_xi: np.ndarray = params.g_xi.copy()
    lin: np.ndarray = params.lin * params.lin_mask

    for xi, eps, mu, mask, target in (
        (f_xi, params.f_eps, params.f_mu, f_mask, LIN_F_CONST),
        (g_xi, params.g_eps, params.g_mu, g_mask, LIN_W),
    ):
        for i in np.flatnonzero(mask):
            term = LogisticTerm(xi=float(xi[i]), eps=float(eps[i]), mu=float(mu[i]))
            if term.is_degenerate(mu_bound, eps_min):
                lin[target] += term.constant_value()
                lin_mask[target] = True
                mask[i] = False
                xi[i] = 0.0
                logger.debug(f"Merged degenerate logistic term {term} into constant.")

    for xi, mask in ((f_xi, f_mask), (g_xi, g_mask), (lin, lin_mask)):
        small: np.ndarray = mask & (np.abs(xi) <= threshold)
        mask[small] = False
        xi[small] = 0.0

    return replace(params, f_xi=f_xi, g_xi=g_xi, lin=lin, f_mask=f_mask, g_mask=g_mask, lin_mask=lin_mask)


@dataclass
class _RoundLog:
    alpha: float
    losses: list[float]
    validation_mae: list[float]
    iterations: int
    active_before: int
    active_after: int


def _validation_mae(params: SindyParams, validation: Dataset) -> float:
    try:
        return validate_predict(params.to_model(), validation).mae_rpm
    except (NumericalError, ValueError):
        return float("inf")


def _descend(
    params: SindyParams,
    N: np.ndarray,
    W: np.ndarray,
    y: np.ndarray,
    alpha: float,
    validation: Dataset,
    config: SindyConfig,
) -> tuple[SindyParams, _RoundLog]:
    """ADAM descent with validation-based early stopping; returns the best iterate."""
    log = _RoundLog(alpha=alpha, losses=[], validation_mae=[], iterations=0, active_before=params.n_active, active_after=0)
    theta: np.ndarray = params.pack()
    state: AdamState = AdamState.zeros(theta.shape, eta_p=params.rate_vector(config.learning_rates))

    best: SindyParams = params
    best_mae: float = _validation_mae(params, validation)
    log.validation_mae.append(best_mae)
    previous_mae: float = best_mae
    rises: int = 0

    for it in tqdm(range(1, config.max_iters + 1), desc=f"SINDy alpha={alpha:g}", disable=not config.progress):
        loss, grad = loss_and_grad(params, N, W, y, alpha, config.K0)
        log.losses.append(loss)
        if not np.isfinite(loss):
            raise FitError(f"SINDy loss diverged at iteration {it}.", loss_trace=log.losses)
        try:
            theta, state = adam_step(theta, grad, state)
        except ValueError as e:
            raise FitError(f"SINDy descent failed at iteration {it}: {e}", loss_trace=log.losses) from e
        params = params.unpack(theta)
        log.iterations = it

        if it % config.validate_every == 0:
            mae: float = _validation_mae(params, validation)
            log.validation_mae.append(mae)
            if mae < best_mae:
                best, best_mae = params, mae
            rises = rises + 1 if mae > previous_mae else 0
            previous_mae = mae
            if rises >= config.patience:
                logger.info(f"Validation MAE grew {rises} times in a row; stopping at iteration {it}.")
                break

    return best, log


def _total_loss(params: SindyParams, N: np.ndarray, W: np.ndarray, y: np.ndarray, alpha: float, K0: float) -> float:
    return loss_and_grad(params, N, W, y, alpha, K0)[0]


def sindy_fit(
    dataset: Dataset,
    config: SindyConfig = DEFAULT_SINDY_CONFIG,
    validation: Dataset | None = None,
) -> SindyModel:
    """Identify dN/dt = f(N) + g(N) W_f from a regression dataset.

    Args:
        dataset: Training data with normalized speed, fuel and derivative.
        config: Library and descent settings.
        validation: Data for early stopping. When omitted, the last
            `config.validation_span` seconds of `dataset` are held out.

    Returns:
        The pruned model; `lineage` records the settings and the loss log.

    Raises:
        FitError: If every term is pruned or the descent diverges.
    """
    train: Dataset = dataset
    if validation is None:
        t_split: float = float(dataset.t[-1]) - config.validation_span
        if t_split <= float(dataset.t[0]):
            raise ValueError(
                f"Dataset spans {dataset.t[-1] - dataset.t[0]:.4g} s, too short to hold out {config.validation_span} s."
            )
        train = dataset.window(float(dataset.t[0]), t_split)
        validation = dataset.window(t_split, float(dataset.t[-1]) + dataset.dt)

    N: np.ndarray = np.asarray(train.N_norm, dtype=float)
    W: np.ndarray = np.asarray(train.Wf_norm, dtype=float)
    y: np.ndarray = np.asarray(train.dN_dt, dtype=float)

    params: SindyParams = polish_weights(SindyParams.initial(config), N, W, y, config.ridge)
    rounds: list[_RoundLog] = []
    all_losses: list[float] = []

    for alpha in config.alphas:
        params, log = _descend(params, N, W, y, alpha, validation, config)
        all_losses.extend(log.losses)

        polished: SindyParams = polish_weights(params, N, W, y, config.ridge)
        if _total_loss(polished, N, W, y, alpha, config.K0) <= _total_loss(params, N, W, y, alpha, config.K0):
            params = polished
        pre_prune: float = _total_loss(params, N, W, y, alpha, config.K0)

        params = prune(params, config.threshold, config.mu_bound, config.eps_min)
        if params.n_active == 0:
            raise FitError("Every library term was pruned.", loss_trace=all_losses)
        params = polish_weights(params, N, W, y, config.ridge)
        # A polished weight can fall under the threshold again.
        params = prune(params, config.threshold, config.mu_bound, config.eps_min)
        if params.n_active == 0:
            raise FitError("Every library term was pruned.", loss_trace=all_losses)

        post_prune: float = _total_loss(params, N, W, y, alpha, config.K0)
        if post_prune > 1.05 * pre_prune:
            logger.warning(f"Pruning raised the loss from {pre_prune:.4g} to {post_prune:.4g}.")
        log.active_after = params.n_active
        rounds.append(log)
        logger.info(
            f"SINDy round alpha={alpha:g}: {log.iterations} iterations, "
            f"{log.active_before} -> {log.active_after} active terms, loss {post_prune:.4g}."
        )

    if abs(params.f_at_zero()) > 1e-3:
        logger.warning(f"Identified f(0) = {params.f_at_zero():.3g} exceeds 1e-3.")

    lineage: dict[str, Any] = {
        "config": config.model_dump(mode="json"),
        "rounds": [
            {
                "alpha": r.alpha,
                "iterations": r.iterations,
                "active_before": r.active_before,
                "active_after": r.active_after,
                "final_loss": r.losses[-1] if r.losses else None,
                "validation_mae_rpm": r.validation_mae,
            }
            for r in rounds
        ],
        "f_at_zero": params.f_at_zero(),
        "training_label": train.lineage.label,
        "training_samples": len(train),
    }
    return params.to_model(lineage)
