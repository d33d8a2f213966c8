"""Exceptions raised by the solver library.

Each error also derives from the closest builtin exception so callers that
only care about ``ValueError`` or ``RuntimeError`` can keep catching those.
"""

from __future__ import annotations


class VieParaRealError(Exception):
    """Base class for every error raised by this package."""


class InvalidIntervalError(VieParaRealError, ValueError):
    """An interval [a, b] with a >= b was supplied."""


class DimensionError(VieParaRealError, ValueError):
    """Array lengths or polynomial degrees do not match."""


class UnknownProblemError(VieParaRealError, KeyError):
    """No built-in problem is registered under the requested name."""


class NotApplicableError(VieParaRealError, ValueError):
    """The operation needs data the problem does not carry."""


class SubintervalIndexError(VieParaRealError, IndexError):
    """A subinterval index outside 1..N was requested."""


class DomainError(VieParaRealError, ValueError):
    """A time outside [0, T] was requested."""


class ConfigurationError(VieParaRealError, ValueError):
    """A solver configuration violates its invariants."""


class SpecError(VieParaRealError, ValueError):
    """An experiment specification is invalid."""


class ProblemValidationError(VieParaRealError, ValueError):
    """A problem failed its registration checks."""


class QuadratureError(VieParaRealError, RuntimeError):
    """Newton iteration for the Legendre-Gauss nodes failed to converge."""


class SingularSystemError(VieParaRealError, RuntimeError):
    """The direct fallback met a singular local system."""


class NoConvergenceError(VieParaRealError, RuntimeError):
    """Gauss-Seidel did not converge and the direct fallback is disabled."""


class NotConvergedError(VieParaRealError, RuntimeError):
    """A converged parareal run was required but the run did not converge."""


class DivergenceError(VieParaRealError, RuntimeError):
    """A parareal sweep produced non-finite values."""

    def __init__(self, n: int, k: int, stage: str = "update"):
        self.n = n
        self.k = k
        self.stage = stage
        super().__init__(
            f"non-finite values in block n={n} at iteration k={k} ({stage} stage)"
        )
