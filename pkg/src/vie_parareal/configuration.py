"""Define the configurable parameters for the parareal solver."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, fields
from typing import Any, Optional

from langchain_core.runnables import RunnableConfig, ensure_config

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "VIE_PARAREAL_THREADS"


@dataclass(frozen=True)
class LinearSolveConfig:
    """Settings for the Gauss-Seidel solve of each local collocation system."""

    tolerance: float = 1e-13
    "Relative residual threshold ``||(I-A)p - f||_inf / max(1, ||f||_inf)``."

    max_sweeps: int = 200
    "Gauss-Seidel sweeps allowed before giving up."

    fallback: bool = True
    "Solve by LU with partial pivoting when Gauss-Seidel does not converge."

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ConfigurationError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_sweeps < 1:
            raise ConfigurationError(f"max_sweeps must be positive, got {self.max_sweeps}")


@dataclass(frozen=True)
class PararealConfig:
    """The configuration for a parareal run.

    Unknown keys coming from a LangGraph runtime (thread ids, hosts, ...) are
    ignored by :meth:`from_runnable_config` rather than rejected.
    """

    N: int
    "Number of uniform subintervals."

    M: int
    "Fine polynomial degree."

    Mc: int
    "Coarse polynomial degree, strictly below ``M``."

    max_iters: int = 10
    "Iteration cap K; 0 returns the coarse initialization."

    stop_tol: float = 1e-12
    "Stop once the L-infinity increment over fine nodes drops to this; 0 disables."

    linear: LinearSolveConfig = field(default_factory=LinearSolveConfig)

    parallel: bool = False
    "Run the fine corrections on a thread pool."

    threads: Optional[int] = None
    "Worker cap for the correction stage; ``None`` reads VIE_PARAREAL_THREADS."

    allow_equal_degrees: bool = False
    "Permit ``Mc == M``; only meaningful for checking that the corrector vanishes."

    track_errors: bool = True
    "Measure the L-infinity error after every sweep when an exact solution exists."

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ConfigurationError(f"N must be at least 1, got {self.N}")
        if self.Mc < 1:
            raise ConfigurationError(f"Mc must be at least 1, got {self.Mc}")
        if self.Mc > self.M or (self.Mc == self.M and not self.allow_equal_degrees):
            raise ConfigurationError(f"coarse degree Mc={self.Mc} must be below M={self.M}")
        if self.max_iters < 0:
            raise ConfigurationError(f"max_iters must be non-negative, got {self.max_iters}")
        if self.stop_tol < 0:
            raise ConfigurationError(f"stop_tol must be non-negative, got {self.stop_tol}")
        if self.threads is not None and self.threads < 0:
            raise ConfigurationError(f"threads must be non-negative, got {self.threads}")

    @classmethod
    def from_runnable_config(cls, config: Optional[RunnableConfig] = None) -> PararealConfig:
        """Load configuration w/ defaults for the given invocation."""
        config = ensure_config(config)
        configurable = config.get("configurable") or {}
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in configurable.items() if k in known})

    def as_configurable(self) -> dict[str, Any]:
        """Return the fields as a ``configurable`` mapping for a graph invocation."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def worker_count(self) -> Optional[int]:
        """Resolve the correction-stage worker cap (``None`` means executor default)."""
        if self.threads is not None:
            return self.threads or None
        raw = os.getenv(THREADS_ENV_VAR, "").strip()
        if not raw:
            return None
        try:
            value = int(raw)
        except ValueError:
            logger.warning(f"ignoring non-integer {THREADS_ENV_VAR}={raw!r}")
            return None
        return value if value > 0 else None
