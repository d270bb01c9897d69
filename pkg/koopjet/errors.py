"""Exception hierarchy shared across koopjet modules."""

from __future__ import annotations

from typing import Any


class KoopjetError(Exception):
    """Root of all koopjet failures."""


class ConfigurationError(KoopjetError, ValueError):
    """Invalid or missing configuration."""


class NumericalError(KoopjetError, RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class CareError(NumericalError):
    """Riccati solve failed (non-stabilizable pair or divergence)."""


class ConvergenceError(NumericalError):
    """An iterative solver did not converge.

    Attributes:
        trace: Residual history collected before giving up.
    """

    def __init__(self, message: str, trace: list[float] | None = None) -> None:
        super().__init__(message)
        self.trace: list[float] = list(trace or [])


class FitError(NumericalError):
    """Regression or identification produced an unusable model."""

    def __init__(self, message: str, loss_trace: list[float] | None = None) -> None:
        super().__init__(message)
        self.loss_trace: list[float] = list(loss_trace or [])


class InfeasibleDesignError(KoopjetError, RuntimeError):
    """No candidate satisfied the design constraints.

    Attributes:
        report: Diagnostics of the best infeasible candidate.
    """

    def __init__(self, message: str, report: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.report: dict[str, Any] = dict(report or {})
