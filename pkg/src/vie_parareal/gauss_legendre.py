"""Legendre-Gauss quadrature and barycentric Lagrange interpolation.

Rules are built once per degree and cached; every array they expose is
read-only so a rule can be shared freely between worker threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import DimensionError, InvalidIntervalError, QuadratureError

logger = logging.getLogger(__name__)

NEWTON_TOLERANCE = 1e-15
MAX_NEWTON_STEPS = 100
LEBESGUE_MIN_SAMPLES = 1000
LEBESGUE_MAX_SAMPLES = 1_000_000
_LEBESGUE_CHUNK = 65_536


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Legendre-Gauss rule with M+1 nodes on [-1, 1]."""

    degree: int
    "Polynomial degree M; the rule has M+1 nodes."

    nodes: np.ndarray
    "Roots of L_{M+1}, strictly increasing and symmetric about 0."

    weights: np.ndarray
    "Positive quadrature weights summing to 2."

    bary_weights: np.ndarray
    "Barycentric weights of the Lagrange basis at ``nodes``, scaled to max 1."

    @property
    def size(self) -> int:
        """Number of nodes."""
        return self.degree + 1


@dataclass(frozen=True, eq=False)
class MappedRule:
    """Affine image of a :class:`QuadratureRule` on [a, b]."""

    parent: QuadratureRule
    a: float
    b: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def interval(self) -> tuple[float, float]:
        return (self.a, self.b)

    @property
    def degree(self) -> int:
        return self.parent.degree

    @property
    def size(self) -> int:
        """Number of nodes."""
        return self.parent.size

    @property
    def bary_weights(self) -> np.ndarray:
        # Barycentric weights are invariant (up to a common factor) under affine maps.
        return self.parent.bary_weights


AnyRule = Union[QuadratureRule, MappedRule]


def legendre_pair(n: int, x):
    """Evaluate the Legendre polynomial L_n and its derivative at ``x``.

    Uses the three-term recurrence for the values and
    ``L'_{k+1} = L'_{k-1} + (2k+1) L_k`` for the derivatives, so the endpoint
    values L_n(1) = 1 and L_n(-1) = (-1)^n come out exact.

    Args:
        n: Non-negative degree.
        x: Scalar or array of points in [-1, 1].

    Returns:
        ``(value, derivative)``, floats for scalar input and arrays otherwise.
    """
    if n < 0:
        raise ValueError(f"Legendre degree must be non-negative, got {n}")
    xs = np.asarray(x, dtype=float)
    value_prev = np.ones_like(xs)
    deriv_prev = np.zeros_like(xs)
    if n == 0:
        value, deriv = value_prev, deriv_prev
    else:
        value = xs.copy()
        deriv = np.ones_like(xs)
        for k in range(1, n):
            value_next = ((2 * k + 1) * xs * value - k * value_prev) / (k + 1)
            deriv_next = deriv_prev + (2 * k + 1) * value
            value_prev, value = value, value_next
            deriv_prev, deriv = deriv, deriv_next
    if xs.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Return barycentric weights ``1 / prod_{j != i} (x_i - x_j)`` scaled to max 1."""
    differences = np.subtract.outer(nodes, nodes)
    np.fill_diagonal(differences, 1.0)
    weights = 1.0 / np.prod(differences, axis=1)
    return weights / np.max(np.abs(weights))


@lru_cache(maxsize=None)
def compute_rule(M: int) -> QuadratureRule:
    """Build the (M+1)-point Legendre-Gauss rule.

    Nodes are the roots of L_{M+1}, found by Newton iteration from the
    Chebyshev-like guesses ``-cos(pi (4i+3) / (4M+6))`` and symmetrized so
    that ``nodes[i] == -nodes[M-i]`` holds exactly.

    Raises:
        QuadratureError: If Newton has not converged after
            ``MAX_NEWTON_STEPS`` steps.
    """
    if M < 0:
        raise ValueError(f"quadrature degree must be non-negative, got {M}")
    n = M + 1
    index = np.arange(n)
    x = -np.cos(np.pi * (4 * index + 3) / (4 * M + 6))

    for step in range(1, MAX_NEWTON_STEPS + 1):
        value, deriv = legendre_pair(n, x)
        delta = value / deriv
        x = x - delta
        if np.max(np.abs(delta)) <= NEWTON_TOLERANCE:
            break
    else:
        raise QuadratureError(
            f"Newton iteration for degree {M} did not converge in {MAX_NEWTON_STEPS} steps"
        )

    x = (x - x[::-1]) / 2.0
    _, deriv = legendre_pair(n, x)
    weights = 2.0 / ((1.0 - x**2) * deriv**2)
    weights = (weights + weights[::-1]) / 2.0

    logger.debug(f"Legendre-Gauss rule M={M} built in {step} Newton steps")
    return QuadratureRule(
        degree=M,
        nodes=_frozen(x),
        weights=_frozen(weights),
        bary_weights=_frozen(barycentric_weights(x)),
    )


def map_rule(rule: QuadratureRule, a: float, b: float) -> MappedRule:
    """Map ``rule`` affinely from [-1, 1] onto [a, b].

    Raises:
        InvalidIntervalError: If ``a >= b``.
    """
    a, b = float(a), float(b)
    if not a < b:
        raise InvalidIntervalError(f"interval [{a}, {b}] is empty or reversed")
    half = (b - a) / 2.0
    mid = (b + a) / 2.0
    return MappedRule(
        parent=rule,
        a=a,
        b=b,
        nodes=_frozen(half * rule.nodes + mid),
        weights=_frozen(half * rule.weights),
    )


def discrete_inner_product(f_vals, g_vals, rule: AnyRule) -> float:
    """Return the discrete L2 inner product ``sum_i f_i g_i w_i``.

    Raises:
        DimensionError: If either array does not have one value per node.
    """
    f = np.asarray(f_vals, dtype=float)
    g = np.asarray(g_vals, dtype=float)
    if f.shape != (rule.size,) or g.shape != (rule.size,):
        raise DimensionError(
            f"expected {rule.size} nodal values, got {f.shape} and {g.shape}"
        )
    return float(np.sum(f * g * rule.weights))


def interpolation_matrix(rule: AnyRule, targets) -> np.ndarray:
    """Tabulate the Lagrange basis of ``rule`` at ``targets``.

    Row ``r`` holds ``h_j(targets[r])`` for every node ``j`` (second
    barycentric form). Targets that coincide with a node get the matching
    unit row, so interpolating at a node returns the stored value exactly.
    """
    points = np.atleast_1d(np.asarray(targets, dtype=float))
    differences = points[:, None] - rule.nodes[None, :]
    hits = differences == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = rule.bary_weights[None, :] / differences
    hit_rows = hits.any(axis=1)
    terms[hit_rows] = hits[hit_rows].astype(float)
    return terms / terms.sum(axis=1, keepdims=True)


def interpolate(rule: AnyRule, values, x):
    """Evaluate the interpolating polynomial of nodal ``values`` at ``x``.

    Raises:
        DimensionError: If ``values`` does not have one entry per node.
    """
    vals = np.asarray(values, dtype=float)
    if vals.shape != (rule.size,):
        raise DimensionError(f"expected {rule.size} nodal values, got shape {vals.shape}")
    xs = np.asarray(x, dtype=float)
    if xs.ndim == 0:
        hit = np.flatnonzero(rule.nodes == xs)
        if hit.size:
            return float(vals[hit[0]])
        return float(interpolation_matrix(rule, xs) @ vals)
    return (interpolation_matrix(rule, xs.ravel()) @ vals).reshape(xs.shape)


def default_lebesgue_samples(M: int) -> int:
    """Grid size 10 (M+1)^2 clamped to the allowed sample range."""
    return int(min(max(10 * (M + 1) ** 2, LEBESGUE_MIN_SAMPLES), LEBESGUE_MAX_SAMPLES))


def lebesgue_constant(rule: QuadratureRule, samples: int | None = None) -> float:
    """Estimate ``max_x sum_j |h_j(x)|`` on a uniform grid over [-1, 1].

    Args:
        rule: The rule whose interpolation operator is measured.
        samples: Grid size, at least 1000. Defaults to ``10 (M+1)^2``
            clamped to [1000, 10^6].
    """
    if samples is None:
        samples = default_lebesgue_samples(rule.degree)
    if samples < LEBESGUE_MIN_SAMPLES:
        raise ValueError(f"need at least {LEBESGUE_MIN_SAMPLES} samples, got {samples}")
    grid = np.linspace(-1.0, 1.0, samples)
    largest = 0.0
    for start in range(0, samples, _LEBESGUE_CHUNK):
        basis = interpolation_matrix(rule, grid[start : start + _LEBESGUE_CHUNK])
        largest = max(largest, float(np.max(np.sum(np.abs(basis), axis=1))))
    return largest
