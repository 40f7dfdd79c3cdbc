"""Errors raised by the incremental solver."""

from __future__ import annotations

__all__ = ["SolverError", "StepError"]


class SolverError(RuntimeError):
    """A subproblem solver failed to reach its tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class StepError(RuntimeError):
    """An incremental step failed; carries the step index and residuals."""

    def __init__(
        self,
        message: str,
        step: int = -1,
        kkt_residual: float = float("nan"),
        momentum_residual: float = float("nan"),
    ):
        super().__init__(message)
        self.step = step
        self.kkt_residual = kkt_residual
        self.momentum_residual = momentum_residual
