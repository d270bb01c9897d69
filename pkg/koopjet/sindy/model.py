"""Control-affine spool dynamics dN/dt = f(N) + g(N) W_f."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from koopjet.sindy.logistic import LogisticTerm, logistic_matrix

logger = logging.getLogger(__name__)

ArrayLike = float | np.ndarray


def _terms_arrays(terms: tuple[LogisticTerm, ...]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xi: np.ndarray = np.array([t.xi for t in terms], dtype=float)
    eps: np.ndarray = np.array([t.eps for t in terms], dtype=float)
    mu: np.ndarray = np.array([t.mu for t in terms], dtype=float)
    return xi, eps, mu


@dataclass(frozen=True)
class SindyModel:
    """Identified governing equation in normalized corrected coordinates.

    f(N) = sum(f_terms) + f_linear * N + f_const
    g(N) = sum(g_terms) + g_linear * N + g_const

    `g_linear` is the weight of the bilinear N * W_f library term and
    `g_const` the weight of the plain W_f term. Pruned terms are absent
    from the tuples; pruned linear weights are exactly zero.
    """

    f_terms: tuple[LogisticTerm, ...] = ()
    g_terms: tuple[LogisticTerm, ...] = ()
    f_linear: float = 0.0
    f_const: float = 0.0
    g_linear: float = 0.0
    g_const: float = 0.0
    lineage: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # Cached parameter arrays for vectorized evaluation.
        object.__setattr__(self, "_f", _terms_arrays(self.f_terms))
        object.__setattr__(self, "_g", _terms_arrays(self.g_terms))

    @property
    def n_active(self) -> int:
        linear: int = sum(1 for w in (self.f_linear, self.f_const, self.g_linear, self.g_const) if w != 0.0)
        return len(self.f_terms) + len(self.g_terms) + linear

    @staticmethod
    def _expand(arrays: tuple[np.ndarray, np.ndarray, np.ndarray], N: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xi, eps, mu = arrays
        if len(xi) == 0:
            zeros: np.ndarray = np.zeros(N.shape)
            return zeros, zeros
        S: np.ndarray = logistic_matrix(N.ravel(), eps, mu)
        value: np.ndarray = (S @ xi).reshape(N.shape)
        slope: np.ndarray = ((S * (1.0 - S)) @ (xi * eps)).reshape(N.shape)
        return value, slope

    def f(self, N: ArrayLike) -> ArrayLike:
        N_arr: np.ndarray = np.asarray(N, dtype=float)
        value, _ = self._expand(self._f, N_arr)
        out: np.ndarray = value + self.f_linear * N_arr + self.f_const
        return out if out.ndim else float(out)

    def g(self, N: ArrayLike) -> ArrayLike:
        N_arr: np.ndarray = np.asarray(N, dtype=float)
        value, _ = self._expand(self._g, N_arr)
        out: np.ndarray = value + self.g_linear * N_arr + self.g_const
        return out if out.ndim else float(out)

    def df_dN(self, N: ArrayLike) -> ArrayLike:
        N_arr: np.ndarray = np.asarray(N, dtype=float)
        _, slope = self._expand(self._f, N_arr)
        out: np.ndarray = slope + self.f_linear
        return out if out.ndim else float(out)

    def dg_dN(self, N: ArrayLike) -> ArrayLike:
        N_arr: np.ndarray = np.asarray(N, dtype=float)
        _, slope = self._expand(self._g, N_arr)
        out: np.ndarray = slope + self.g_linear
        return out if out.ndim else float(out)

    def __call__(self, N: ArrayLike, W_f: ArrayLike) -> ArrayLike:
        return eval_model(self, N, W_f)

    def describe(self, precision: int = 4) -> str:
        """Equation rendered as text, e.g. for printing after identification."""

        def render(terms: tuple[LogisticTerm, ...], linear: float, const: float, linear_name: str) -> str:
            parts: list[str] = [
                f"{t.xi:+.{precision}g}*LF(N; eps={t.eps:.{precision}g}, mu={t.mu:.{precision}g})" for t in terms
            ]
            if linear != 0.0:
                parts.append(f"{linear:+.{precision}g}*{linear_name}")
            if const != 0.0:
                parts.append(f"{const:+.{precision}g}")
            return " ".join(parts) if parts else "0"

        f_text: str = render(self.f_terms, self.f_linear, self.f_const, "N")
        g_text: str = render(self.g_terms, self.g_linear, self.g_const, "N")
        return "\n".join(
            [
                "dN/dt = f(N) + g(N)*W_f",
                f"  f(N) = {f_text}",
                f"  g(N) = {g_text}",
                "  LF(N; eps, mu) = 1 / (1 + exp(-eps*(N - mu)))",
            ]
        )

    def to_dict(self) -> dict[str, Any]:
        def terms(logistic: tuple[LogisticTerm, ...], linear: float, const: float) -> list[dict[str, Any]]:
            out: list[dict[str, Any]] = [
                {"kind": "logistic", "xi": t.xi, "eps": t.eps, "mu": t.mu} for t in logistic
            ]
            out.append({"kind": "linear", "xi": linear})
            out.append({"kind": "constant", "xi": const})
            return out

        return {
            "f_terms": terms(self.f_terms, self.f_linear, self.f_const),
            "g_terms": terms(self.g_terms, self.g_linear, self.g_const),
            "lineage": self.lineage,
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> SindyModel:
        """Inverse of `to_dict`.

        Raises:
            ValueError: On an unknown term kind or missing term lists.
        """

        def terms(items: list[dict[str, Any]]) -> tuple[tuple[LogisticTerm, ...], float, float]:
            logistic: list[LogisticTerm] = []
            linear: float = 0.0
            const: float = 0.0
            for item in items:
                kind: str = item.get("kind", "")
                if kind == "logistic":
                    logistic.append(LogisticTerm(xi=float(item["xi"]), eps=float(item["eps"]), mu=float(item["mu"])))
                elif kind == "linear":
                    linear += float(item["xi"])
                elif kind == "constant":
                    const += float(item["xi"])
                else:
                    raise ValueError(f"Unknown SINDy term kind '{kind}'.")
            return tuple(logistic), linear, const

        if "f_terms" not in payload or "g_terms" not in payload:
            raise ValueError("SINDy model document needs 'f_terms' and 'g_terms'.")
        f_terms, f_linear, f_const = terms(payload["f_terms"])
        g_terms, g_linear, g_const = terms(payload["g_terms"])
        return cls(
            f_terms=f_terms,
            g_terms=g_terms,
            f_linear=f_linear,
            f_const=f_const,
            g_linear=g_linear,
            g_const=g_const,
            lineage=dict(payload.get("lineage", {})),
        )


def eval_model(model: SindyModel, N: ArrayLike, W_f: ArrayLike) -> ArrayLike:
    """dN/dt = f(N) + g(N) W_f."""
    return model.f(N) + model.g(N) * W_f


def steady_fuel(model: SindyModel, N: ArrayLike) -> ArrayLike:
    """Normalized fuel flow holding N in equilibrium, -f(N)/g(N).

    Raises:
        ValueError: Where g(N) vanishes.
    """
    g: ArrayLike = model.g(N)
    if np.any(np.asarray(g) == 0.0):
        raise ValueError("Input gain g(N) vanishes; steady fuel flow is undefined.")
    return -model.f(N) / g


@dataclass(frozen=True)
class Linearization:
    """First-order model dN = a dN + b dW_f around a steady point."""

    N: float
    W_f: float
    a: float
    b: float
    K_e: float
    T_e: float
    stable: bool


def linearize(model: SindyModel, N: float) -> Linearization:
    """Linearize at the steady point (N, steady_fuel(N)).

    a = f'(N) + g'(N) W_f, b = g(N), K_e = -b/a, T_e = -1/a. A non-negative
    `a` is reported through `stable=False`.
    """
    W_f: float = float(steady_fuel(model, N))
    a: float = float(model.df_dN(N) + model.dg_dN(N) * W_f)
    b: float = float(model.g(N))
    stable: bool = a < 0.0
    if not stable:
        logger.warning(f"Unstable linearization at N={N:.4g}: a={a:.4g} >= 0.")
    K_e: float = -b / a if a != 0.0 else float("inf")
    T_e: float = -1.0 / a if a != 0.0 else float("inf")
    return Linearization(N=float(N), W_f=W_f, a=a, b=b, K_e=K_e, T_e=T_e, stable=stable)
