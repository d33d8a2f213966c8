"""Volterra problems of the second kind and the built-in benchmark registry.

The canonical form is ``u(t) - int_0^t K(t, s) u(s) ds = g(t)`` on [0, T].
Equations written with ``+ int`` are registered with a negated kernel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .errors import NotApplicableError, ProblemValidationError, UnknownProblemError
from .gauss_legendre import compute_rule

logger = logging.getLogger(__name__)

Kernel = Callable[[np.ndarray, np.ndarray], "np.ndarray | float"]
TimeFunction = Callable[[np.ndarray], "np.ndarray | float"]

REGISTRATION_TOLERANCE = 1e-8
RESIDUAL_DEGREE = 50
RESIDUAL_PANELS = 32
_SPOT_CHECK_POINTS = 11


@dataclass(frozen=True, eq=False)
class VolterraProblem:
    """A linear Volterra integral equation of the second kind.

    ``kernel`` and ``source`` must accept numpy arrays and broadcast like
    ufuncs; returning a scalar is fine, it is broadcast to the input shape.
    """

    name: str
    kernel: Kernel
    source: TimeFunction
    horizon: float
    exact: Optional[TimeFunction] = None

    def __post_init__(self) -> None:
        if not self.horizon > 0:
            raise ProblemValidationError(f"{self.name}: horizon must be positive, got {self.horizon}")
        t = np.linspace(0.0, self.horizon, _SPOT_CHECK_POINTS)
        fractions = np.linspace(0.0, 1.0, _SPOT_CHECK_POINTS)
        s = t[:, None] * fractions[None, :]
        if not np.all(np.isfinite(self.kernel_values(t[:, None], s))):
            raise ProblemValidationError(f"{self.name}: kernel is not finite on 0 <= s <= t <= T")
        if not np.all(np.isfinite(self.source_values(t))):
            raise ProblemValidationError(f"{self.name}: source is not finite on [0, T]")

    def kernel_values(self, t, s) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        shape = np.broadcast(t, s).shape
        return np.broadcast_to(np.asarray(self.kernel(t, s), dtype=float), shape)

    def source_values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(np.asarray(self.source(t), dtype=float), t.shape)

    def exact_values(self, t) -> np.ndarray:
        if self.exact is None:
            raise NotApplicableError(f"{self.name} has no exact solution")
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(np.asarray(self.exact(t), dtype=float), t.shape)


def residual_check(problem: VolterraProblem, t_samples: int = 20) -> float:
    """Measure how well ``problem.exact`` satisfies the equation.

    The memory integral at each of ``t_samples`` equispaced times in (0, T]
    is computed with a composite Legendre-Gauss rule (degree 50, 32 panels).

    Returns:
        ``max |u(t) - int_0^t K(t, s) u(s) ds - g(t)|`` over the samples.

    Raises:
        NotApplicableError: If the problem carries no exact solution.
    """
    if problem.exact is None:
        raise NotApplicableError(f"{problem.name} has no exact solution to check")
    if t_samples < 1:
        raise ValueError(f"t_samples must be positive, got {t_samples}")

    rule = compute_rule(RESIDUAL_DEGREE)
    times = np.linspace(problem.horizon / t_samples, problem.horizon, t_samples)
    half = times / (2 * RESIDUAL_PANELS)
    panel_mids = (2 * np.arange(RESIDUAL_PANELS) + 1)[None, :] * half[:, None]
    s = panel_mids[:, :, None] + half[:, None, None] * rule.nodes[None, None, :]

    t = times[:, None, None]
    integrand = problem.kernel_values(t, s) * problem.exact_values(s)
    integral = half * np.sum(integrand * rule.weights, axis=(1, 2))
    residual = problem.exact_values(times) - integral - problem.source_values(times)
    return float(np.max(np.abs(residual)))


# Source printed alongside the sine-kernel example. It is not consistent
# with u(t) = sin(pi t) and fails the registration gate; kept for reference.
def printed_sin_source(t):
    return (1 - 1 / (2 * math.pi)) * np.sin(np.pi * t) - np.cos(np.pi * t) / (2 * math.pi)


def _sin_kernel(T: float) -> VolterraProblem:
    # u + int sin(pi (t-s)) u ds = g, cast to the canonical sign.
    return VolterraProblem(
        name="sin-kernel",
        kernel=lambda t, s: -np.sin(np.pi * (t - s)),
        source=lambda t: (1 + 1 / (2 * math.pi)) * np.sin(np.pi * t) - 0.5 * t * np.cos(np.pi * t),
        horizon=T,
        exact=lambda t: np.sin(np.pi * t),
    )


def _exp_kernel(T: float) -> VolterraProblem:
    return VolterraProblem(
        name="exp-kernel",
        kernel=lambda t, s: (t - s) * np.exp(s - t),
        source=lambda t: 1.0 - (1.0 + t) * np.exp(-t),
        horizon=T,
        exact=lambda t: (2 * t - 1 + np.exp(-2 * t)) / 4,
    )


def _poly_manufactured(T: float) -> VolterraProblem:
    return VolterraProblem(
        name="poly-manufactured",
        kernel=lambda t, s: 1.0,
        source=lambda t: t - t**2 / 2,
        horizon=T,
        exact=lambda t: t,
    )


_BUILTINS: Dict[str, Callable[[float], VolterraProblem]] = {
    "sin-kernel": _sin_kernel,
    "exp-kernel": _exp_kernel,
    "poly-manufactured": _poly_manufactured,
}


def available_problems() -> List[str]:
    """Return the registered problem names in sorted order."""
    return sorted(_BUILTINS)


def builtin(name: str, T: float) -> VolterraProblem:
    """Instantiate a registered benchmark problem on [0, T].

    Every instance must pass :func:`residual_check` to within
    ``REGISTRATION_TOLERANCE`` before it is handed out.

    Raises:
        UnknownProblemError: If ``name`` is not registered.
        ProblemValidationError: If the exact solution fails the residual gate.
    """
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise UnknownProblemError(
            f"unknown problem {name!r}; choose from {', '.join(available_problems())}"
        ) from None
    problem = factory(float(T))
    residual = residual_check(problem)
    logger.debug(f"{name} on [0, {T}]: registration residual {residual:.3e}")
    if residual > REGISTRATION_TOLERANCE:
        raise ProblemValidationError(
            f"{name}: exact solution residual {residual:.3e} exceeds {REGISTRATION_TOLERANCE:g}"
        )
    return problem
