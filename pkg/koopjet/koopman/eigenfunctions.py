"""Eigenfunctions of the autonomous spool dynamics from the Koopman PDE.

For dN/dt = f(N) an eigenfunction with eigenvalue lambda solves
phi'(N) f(N) = lambda phi(N). Each real component is expanded as

    phi(N) = sum_j xi_j [LF(N; eps_j, mu_j) - LF(0; eps_j, mu_j)] + xi_lin N

so phi(0) = 0 holds by construction. Complex pairs carry a real and an
imaginary component coupled through the rotation-scaling block
[[alpha, -beta], [beta, alpha]]; generalized eigenfunctions of a
repeated eigenvalue add their partner's values to the right-hand side.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
import scipy.linalg
from pydantic import BaseModel, model_validator
from scipy.special import expit
from tqdm import tqdm

from koopjet.errors import FitError
from koopjet.koopman.spectrum import EigenEntry
from koopjet.numerics.adam import AdamState, adam_step

logger = logging.getLogger(__name__)

Kind = Literal["distinct-real", "generalized", "complex-pair"]

_MIN_ANCHOR: float = 1e-6


class EigenfunctionConfig(BaseModel):
    """Basis size and descent settings of one eigenfunction fit."""

    n_logistic: int = 10
    init_eps: float = 10.0
    init_mu_range: tuple[float, float] = (0.02, 0.98)
    alpha1: float = 1e-4  # L1 weight
    alpha2: float = 1.0  # anchor spring weight
    learning_rates: tuple[float, float, float] = (0.01, 50.0, 0.01)
    max_iters: int = 2000
    residual_floor: float = 1e-2
    anchor_N: float | None = None  # defaults to the largest sample
    progress: bool = False

    @model_validator(mode="after")
    def _check(self) -> EigenfunctionConfig:
        if self.n_logistic < 0 or self.max_iters < 0:
            raise ValueError("n_logistic and max_iters must be non-negative.")
        if self.alpha2 <= 0.0:
            raise ValueError(f"alpha2 must be positive to keep away from the trivial solution, got {self.alpha2}.")
        return self


DEFAULT_EIGENFUNCTION_CONFIG: EigenfunctionConfig = EigenfunctionConfig()


@dataclass(frozen=True)
class _Basis:
    """Shifted logistic columns and their N-derivatives on a grid."""

    S: np.ndarray
    d: np.ndarray
    s0: np.ndarray
    d0: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray


def _basis(N: np.ndarray, eps: np.ndarray, mu: np.ndarray) -> _Basis:
    S: np.ndarray = expit(eps[None, :] * (N[:, None] - mu[None, :]))
    d: np.ndarray = S * (1.0 - S)
    s0: np.ndarray = expit(-eps * mu)
    d0: np.ndarray = s0 * (1.0 - s0)
    return _Basis(S=S, d=d, s0=s0, d0=d0, theta=S - s0[None, :], dtheta=eps[None, :] * d)


def dynamics_block(entry: EigenEntry) -> np.ndarray:
    """Block M with d/dt phi = M phi (+ partner) along the autonomous flow."""
    a, b = entry.alpha, entry.beta
    if entry.is_complex:
        return np.array([[a, -b], [b, a]])
    return np.array([[a]])


@dataclass(frozen=True)
class EigenComponent:
    """One real-valued expansion phi(N)."""

    xi: np.ndarray
    eps: np.ndarray
    mu: np.ndarray
    linear: float = 0.0

    def value(self, N: np.ndarray | float) -> np.ndarray:
        N_arr: np.ndarray = np.atleast_1d(np.asarray(N, dtype=float))
        b: _Basis = _basis(N_arr, self.eps, self.mu)
        return b.theta @ self.xi + self.linear * N_arr

    def slope(self, N: np.ndarray | float) -> np.ndarray:
        N_arr: np.ndarray = np.atleast_1d(np.asarray(N, dtype=float))
        b: _Basis = _basis(N_arr, self.eps, self.mu)
        return b.dtheta @ self.xi + self.linear

    def to_dict(self) -> dict:
        return {"xi": self.xi.tolist(), "eps": self.eps.tolist(), "mu": self.mu.tolist(), "linear": self.linear}

    @classmethod
    def from_dict(cls, payload: dict) -> EigenComponent:
        return cls(
            xi=np.asarray(payload["xi"], dtype=float),
            eps=np.asarray(payload["eps"], dtype=float),
            mu=np.asarray(payload["mu"], dtype=float),
            linear=float(payload.get("linear", 0.0)),
        )


@dataclass(frozen=True)
class Eigenfunction:
    """Eigenfunction (or complex pair) of one spectrum entry.

    `partner` is the position, within the owning model's eigenfunction
    list, of the distinct eigenfunction a generalized one is chained to.
    """

    entry: EigenEntry
    components: tuple[EigenComponent, ...]
    kind: Kind
    partner: int | None = None

    def __post_init__(self) -> None:
        expected: int = 2 if self.entry.is_complex else 1
        if len(self.components) != expected:
            raise ValueError(f"Eigenfunction of {self.entry} needs {expected} components, got {len(self.components)}.")
        if self.entry.tag == "repeated-secular" and self.partner is None:
            raise ValueError("The eigenfunction of a secular entry needs a partner.")

    @property
    def dimension(self) -> int:
        return len(self.components)

    @property
    def block(self) -> np.ndarray:
        return dynamics_block(self.entry)

    def value(self, N: np.ndarray | float) -> np.ndarray:
        """Component values, shape (dimension, len(N))."""
        return np.vstack([c.value(N) for c in self.components])

    def slope(self, N: np.ndarray | float) -> np.ndarray:
        return np.vstack([c.slope(N) for c in self.components])

    def kpde_residual(
        self,
        f: Callable[[np.ndarray], np.ndarray],
        N: np.ndarray,
        partner_values: np.ndarray | None = None,
    ) -> float:
        """Mean squared residual of phi' f - M phi (- partner) over N and components."""
        N = np.asarray(N, dtype=float)
        r: np.ndarray = self.slope(N) * np.asarray(f(N))[None, :] - self.block @ self.value(N)
        if partner_values is not None:
            r = r - partner_values
        return float(np.mean(np.sum(r**2, axis=0)))

    def to_dict(self) -> dict:
        return {
            "alpha": self.entry.alpha,
            "beta": self.entry.beta,
            "tag": self.entry.tag,
            "kind": self.kind,
            "partner": self.partner,
            "components": [c.to_dict() for c in self.components],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> Eigenfunction:
        return cls(
            entry=EigenEntry(alpha=float(payload["alpha"]), beta=float(payload.get("beta", 0.0)), tag=payload.get("tag", "distinct")),
            components=tuple(EigenComponent.from_dict(c) for c in payload["components"]),
            kind=payload["kind"],
            partner=payload.get("partner"),
        )


@dataclass
class EigenfunctionFit:
    eigenfunction: Eigenfunction
    residual: float
    anchor: np.ndarray = field(default_factory=lambda: np.ones(1))
    loss_trace: list[float] = field(default_factory=list)
    norm_trace: list[float] = field(default_factory=list)


class KpdeProblem:
    """Cost of the Koopman PDE residual with L1 and anchor-spring terms.

    Parameters are packed per component as [xi (n), eps (n), mu (n), xi_lin].
    """

    def __init__(
        self,
        N: np.ndarray,
        f_values: np.ndarray,
        block: np.ndarray,
        partner_values: np.ndarray | None,
        anchor_N: float,
        anchor: np.ndarray,
        alpha1: float,
        alpha2: float,
        n_logistic: int,
    ) -> None:
        self.N: np.ndarray = np.asarray(N, dtype=float)
        self.f: np.ndarray = np.asarray(f_values, dtype=float)
        self.M: np.ndarray = np.atleast_2d(block)
        self.C: int = self.M.shape[0]
        self.p: np.ndarray = (
            np.zeros((self.C, len(self.N))) if partner_values is None else np.atleast_2d(partner_values)
        )
        self.anchor_N: np.ndarray = np.array([anchor_N], dtype=float)
        self.anchor: np.ndarray = np.asarray(anchor, dtype=float)
        self.alpha1: float = alpha1
        self.alpha2: float = alpha2
        self.n: int = n_logistic

    @property
    def size(self) -> int:
        return self.C * (3 * self.n + 1)

    def split(self, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray, np.ndarray, float]]:
        width: int = 3 * self.n + 1
        out: list[tuple[np.ndarray, np.ndarray, np.ndarray, float]] = []
        for k in range(self.C):
            chunk: np.ndarray = theta[k * width: (k + 1) * width]
            out.append((chunk[: self.n], chunk[self.n: 2 * self.n], chunk[2 * self.n: 3 * self.n], float(chunk[-1])))
        return out

    def pack(self, components: list[EigenComponent]) -> np.ndarray:
        return np.concatenate([np.concatenate([c.xi, c.eps, c.mu, [c.linear]]) for c in components])

    def components(self, theta: np.ndarray) -> list[EigenComponent]:
        return [EigenComponent(xi=xi.copy(), eps=e.copy(), mu=m.copy(), linear=lin) for xi, e, m, lin in self.split(theta)]

    def residual(self, theta: np.ndarray) -> np.ndarray:
        phi: list[np.ndarray] = []
        dphi: list[np.ndarray] = []
        for xi, eps, mu, lin in self.split(theta):
            b: _Basis = _basis(self.N, eps, mu)
            phi.append(b.theta @ xi + lin * self.N)
            dphi.append(b.dtheta @ xi + lin)
        return np.vstack(dphi) * self.f[None, :] - self.M @ np.vstack(phi) - self.p

    def loss_and_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        T: int = len(self.N)
        parts = self.split(theta)
        bases: list[_Basis] = [_basis(self.N, eps, mu) for _, eps, mu, _ in parts]
        anchors: list[_Basis] = [_basis(self.anchor_N, eps, mu) for _, eps, mu, _ in parts]

        phi: np.ndarray = np.vstack([b.theta @ xi + lin * self.N for b, (xi, _, _, lin) in zip(bases, parts)])
        dphi: np.ndarray = np.vstack([b.dtheta @ xi + lin for b, (xi, _, _, lin) in zip(bases, parts)])
        r: np.ndarray = dphi * self.f[None, :] - self.M @ phi - self.p
        loss: float = float(np.sum(r**2)) / T

        u: np.ndarray = r * self.f[None, :]
        v: np.ndarray = self.M.T @ r
        grads: list[np.ndarray] = []
        for k, (b, a, (xi, eps, mu, lin)) in enumerate(zip(bases, anchors, parts)):
            dev: np.ndarray = self.N[:, None] - mu[None, :]
            one_minus_2s: np.ndarray = 1.0 - 2.0 * b.S
            dtheta_deps: np.ndarray = b.d * dev + (b.d0 * mu)[None, :]
            ddtheta_deps: np.ndarray = b.d + eps[None, :] * b.d * one_minus_2s * dev
            dtheta_dmu: np.ndarray = -eps[None, :] * (b.d - b.d0[None, :])
            ddtheta_dmu: np.ndarray = -(eps**2)[None, :] * b.d * one_minus_2s

            g_xi: np.ndarray = (2.0 / T) * (b.dtheta.T @ u[k] - b.theta.T @ v[k])
            g_eps: np.ndarray = (2.0 / T) * xi * (ddtheta_deps.T @ u[k] - dtheta_deps.T @ v[k])
            g_mu: np.ndarray = (2.0 / T) * xi * (ddtheta_dmu.T @ u[k] - dtheta_dmu.T @ v[k])
            g_lin: float = (2.0 / T) * float(np.sum(u[k]) - self.N @ v[k])

            # Anchor spring at N0.
            N0: float = float(self.anchor_N[0])
            phi0: float = float(a.theta[0] @ xi + lin * N0)
            e0: float = phi0 - float(self.anchor[k])
            loss += self.alpha2 * e0**2
            spring: float = 2.0 * self.alpha2 * e0
            g_xi = g_xi + spring * a.theta[0]
            g_eps = g_eps + spring * xi * (a.d[0] * (N0 - mu) + a.d0 * mu)
            g_mu = g_mu + spring * xi * (-eps * (a.d[0] - a.d0))
            g_lin += spring * N0

            # L1 on the linear weights.
            loss += self.alpha1 * float(np.abs(xi).sum() + abs(lin))
            g_xi = g_xi + self.alpha1 * np.sign(xi)
            g_lin += self.alpha1 * float(np.sign(lin))

            grads.append(np.concatenate([g_xi, g_eps, g_mu, [g_lin]]))
        return loss, np.concatenate(grads)

    def polish(self, theta: np.ndarray) -> np.ndarray:
        """Least-squares linear weights for the current (eps, mu), spring included."""
        T: int = len(self.N)
        parts = self.split(theta)
        width: int = self.n + 1
        A: np.ndarray = np.zeros((self.C * T, self.C * width))
        B: np.ndarray = np.zeros((self.C, self.C * width))
        for k, (_, eps, mu, _) in enumerate(parts):
            b: _Basis = _basis(self.N, eps, mu)
            a: _Basis = _basis(self.anchor_N, eps, mu)
            X: np.ndarray = np.column_stack([b.theta, self.N])
            dX: np.ndarray = np.column_stack([b.dtheta, np.ones_like(self.N)])
            cols: slice = slice(k * width, (k + 1) * width)
            for c in range(self.C):
                block: np.ndarray = -self.M[c, k] * X
                if c == k:
                    block = block + self.f[:, None] * dX
                A[c * T: (c + 1) * T, cols] = block
            B[k, cols] = np.append(a.theta[0], self.anchor_N[0])
        lhs: np.ndarray = np.vstack([A / np.sqrt(T), np.sqrt(self.alpha2) * B])
        rhs: np.ndarray = np.concatenate([self.p.ravel() / np.sqrt(T), np.sqrt(self.alpha2) * self.anchor])
        w: np.ndarray = scipy.linalg.lstsq(lhs, rhs)[0]

        out: np.ndarray = theta.copy()
        full: int = 3 * self.n + 1
        for k in range(self.C):
            wk: np.ndarray = w[k * width: (k + 1) * width]
            out[k * full: k * full + self.n] = wk[: self.n]
            out[(k + 1) * full - 1] = wk[-1]
        return out

    def anchor_values(self, theta: np.ndarray) -> np.ndarray:
        """phi of every component at the anchor speed."""
        return np.array(
            [float(_basis(self.anchor_N, eps, mu).theta[0] @ xi + lin * self.anchor_N[0]) for xi, eps, mu, lin in self.split(theta)]
        )

    def rate_vector(self, rates: tuple[float, float, float]) -> np.ndarray:
        r_xi, r_eps, r_mu = rates
        one: np.ndarray = np.concatenate([np.full(self.n, r_xi), np.full(self.n, r_eps), np.full(self.n, r_mu), [r_xi]])
        return np.tile(one, self.C)

    def weight_norm(self, theta: np.ndarray) -> float:
        return float(np.linalg.norm(np.concatenate([np.append(xi, lin) for xi, _, _, lin in self.split(theta)])))


def _kind(entry: EigenEntry) -> Kind:
    if entry.is_complex:
        return "complex-pair"
    return "generalized" if entry.tag == "repeated-secular" else "distinct-real"


def fit_eigenfunction(
    entry: EigenEntry,
    f: Callable[[np.ndarray], np.ndarray],
    samples: np.ndarray,
    config: EigenfunctionConfig = DEFAULT_EIGENFUNCTION_CONFIG,
    partner: Eigenfunction | None = None,
    partner_index: int | None = None,
) -> EigenfunctionFit:
    """Fit the eigenfunction of `entry` on the sampled autonomous dynamics.

    The first least-squares pass is pulled towards phi(N0) = 1 (real part 1,
    imaginary part 0). The spring then holds phi(N0) at the value that pass
    reached, which fixes the scale and keeps the descent away from phi = 0.

    Args:
        entry: Spectrum entry; secular entries need `partner`.
        f: Autonomous dynamics f(N).
        samples: Sample points, typically from `nonlinear_sampling`.
        config: Basis and descent settings.
        partner: Distinct eigenfunction a secular entry is chained to.
        partner_index: Position of `partner` in the owning model.

    Raises:
        FitError: When the final KPDE residual exceeds `config.residual_floor`.
    """
    if entry.tag == "merged-out":
        raise ValueError("Merged-out entries have no eigenfunction.")
    kind: Kind = _kind(entry)
    if entry.tag == "repeated-secular" and (partner is None or partner_index is None):
        raise ValueError("A secular entry needs its partner eigenfunction and its index.")
    N: np.ndarray = np.asarray(samples, dtype=float)
    f_values: np.ndarray = np.asarray(f(N), dtype=float)
    C: int = 2 if entry.is_complex else 1
    anchor_N: float = float(config.anchor_N if config.anchor_N is not None else np.max(N))
    anchor: np.ndarray = np.zeros(C)
    anchor[0] = 1.0
    partner_values: np.ndarray | None = None
    if entry.tag == "repeated-secular" and partner is not None:
        partner_values = partner.value(N)

    problem = KpdeProblem(
        N=N,
        f_values=f_values,
        block=dynamics_block(entry),
        partner_values=partner_values,
        anchor_N=anchor_N,
        anchor=anchor,
        alpha1=config.alpha1,
        alpha2=config.alpha2,
        n_logistic=config.n_logistic,
    )
    lo, hi = config.init_mu_range
    start: list[EigenComponent] = [
        EigenComponent(
            xi=np.zeros(config.n_logistic),
            eps=np.full(config.n_logistic, config.init_eps),
            mu=np.linspace(lo, hi, config.n_logistic),
        )
        for _ in range(C)
    ]
    theta: np.ndarray = problem.polish(problem.pack(start))
    first: np.ndarray = problem.anchor_values(theta)
    if np.all(np.isfinite(first)) and np.linalg.norm(first) > _MIN_ANCHOR:
        problem.anchor = first
    else:
        logger.warning(f"First pass left phi({anchor_N:.3g}) near zero; keeping the unit anchor.")
    best_theta: np.ndarray = theta
    best_loss, _ = problem.loss_and_grad(theta)
    loss_trace: list[float] = [best_loss]
    norm_trace: list[float] = [problem.weight_norm(theta)]

    state: AdamState = AdamState.zeros(theta.shape, eta_p=problem.rate_vector(config.learning_rates))
    for it in tqdm(range(1, config.max_iters + 1), desc=f"eigenfunction {entry.value:.3g}", disable=not config.progress):
        loss, grad = problem.loss_and_grad(theta)
        if not np.isfinite(loss):
            raise FitError(f"KPDE loss diverged at iteration {it}.", loss_trace=loss_trace)
        if loss < best_loss:
            best_theta, best_loss = theta, loss
        try:
            theta, state = adam_step(theta, grad, state)
        except ValueError as e:
            raise FitError(f"KPDE descent failed at iteration {it}: {e}", loss_trace=loss_trace) from e
        loss_trace.append(loss)
        norm_trace.append(problem.weight_norm(theta))

    polished: np.ndarray = problem.polish(best_theta)
    if problem.loss_and_grad(polished)[0] <= best_loss:
        best_theta = polished

    eigenfunction = Eigenfunction(
        entry=entry,
        components=tuple(problem.components(best_theta)),
        kind=kind,
        partner=partner_index if entry.tag == "repeated-secular" else None,
    )
    residual: float = eigenfunction.kpde_residual(f, N, partner_values)
    if not np.isfinite(residual) or residual > config.residual_floor:
        raise FitError(
            f"KPDE residual {residual:.3g} of eigenvalue {entry.value:.4g} exceeds {config.residual_floor:.3g}.",
            loss_trace=loss_trace,
        )
    logger.info(f"Eigenfunction {kind} at {entry.value:.4g}: KPDE residual {residual:.3g}.")
    return EigenfunctionFit(
        eigenfunction=eigenfunction,
        residual=residual,
        anchor=problem.anchor.copy(),
        loss_trace=loss_trace,
        norm_trace=norm_trace,
    )
