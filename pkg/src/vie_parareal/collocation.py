"""Spectral collocation on each subinterval: the fine and coarse propagators.

On ``I_n = [t_{n-1}, t_n]`` the collocation solution ``U_n`` of degree M is
represented by its values at the mapped Legendre-Gauss nodes. Collocating
the equation at those nodes gives the dense local system ``(I - A) p = f``
where ``A`` discretizes the integral over ``[t_{n-1}, t]`` and ``f`` carries
the source plus the memory of the blocks already computed.

Subinterval indices ``n`` are 1-based throughout the public API.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve, solve_triangular

from .configuration import LinearSolveConfig
from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    NoConvergenceError,
    SingularSystemError,
    SubintervalIndexError,
)
from .gauss_legendre import QuadratureRule, compute_rule, interpolation_matrix, map_rule
from .problem import VolterraProblem

logger = logging.getLogger(__name__)

# A Gauss-Seidel residual that grows by this factor is treated as divergent.
DIVERGENCE_GROWTH = 1e8
PROBE_POINTS_PER_BLOCK = 101


@dataclass(frozen=True)
class Partition:
    """Uniform partition of [0, T] into N subintervals."""

    N: int
    T: float

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ConfigurationError(f"N must be at least 1, got {self.N}")
        if not self.T > 0:
            raise ConfigurationError(f"T must be positive, got {self.T}")

    @property
    def dt(self) -> float:
        """Subinterval length T/N."""
        return self.T / self.N

    @cached_property
    def breakpoints(self) -> np.ndarray:
        points = np.arange(self.N + 1) * self.dt
        points[-1] = self.T
        points.setflags(write=False)
        return points

    def check_index(self, n: int) -> None:
        """Raise SubintervalIndexError unless 1 <= n <= N."""
        if not 1 <= n <= self.N:
            raise SubintervalIndexError(f"subinterval index {n} outside 1..{self.N}")

    def interval(self, n: int) -> tuple[float, float]:
        """Return the endpoints of subinterval n."""
        self.check_index(n)
        return float(self.breakpoints[n - 1]), float(self.breakpoints[n])

    def mapped_nodes(self, rule: QuadratureRule) -> np.ndarray:
        """Return the (N, M+1) array of ``rule`` nodes mapped into every subinterval."""
        a = self.breakpoints[:-1]
        b = self.breakpoints[1:]
        half = (b - a) / 2.0
        mid = (b + a) / 2.0
        return half[:, None] * rule.nodes[None, :] + mid[:, None]


@dataclass(frozen=True, eq=False)
class NodalSolution:
    """Piecewise polynomial of degree ``degree`` stored by its nodal values.

    ``blocks[n-1]`` holds ``U_n`` at the mapped nodes of ``I_n``. The array is
    copied and made read-only on construction.
    """

    partition: Partition
    degree: int
    blocks: np.ndarray

    def __post_init__(self) -> None:
        blocks = np.array(self.blocks, dtype=float)
        expected = (self.partition.N, self.degree + 1)
        if blocks.shape != expected:
            raise DimensionError(f"expected blocks of shape {expected}, got {blocks.shape}")
        blocks.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_function(
        cls, partition: Partition, rule: QuadratureRule, f: Callable[[np.ndarray], np.ndarray]
    ) -> NodalSolution:
        """Sample ``f`` at the mapped nodes of every block."""
        nodes = partition.mapped_nodes(rule)
        values = np.broadcast_to(np.asarray(f(nodes), dtype=float), nodes.shape)
        return cls(partition=partition, degree=rule.degree, blocks=values)

    @property
    def rule(self) -> QuadratureRule:
        return compute_rule(self.degree)

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.partition.mapped_nodes(self.rule)

    def block(self, n: int) -> np.ndarray:
        """Return the nodal values on subinterval n."""
        self.partition.check_index(n)
        return self.blocks[n - 1]

    def max_difference(self, other: NodalSolution) -> float:
        """L-infinity distance between nodal values on the same grid."""
        if other.degree != self.degree or other.partition != self.partition:
            raise DimensionError("solutions live on different grids")
        return float(np.max(np.abs(self.blocks - other.blocks)))

    def evaluate(self, t):
        return evaluate(self, t)


@dataclass(frozen=True)
class LocalSystem:
    """Dense collocation system ``matrix @ p = rhs`` with ``matrix = I - A``."""

    matrix: np.ndarray
    rhs: np.ndarray


@dataclass(frozen=True)
class LinearSolveResult:
    """Outcome of one local solve."""

    solution: np.ndarray
    sweeps: int
    "Gauss-Seidel sweeps spent, including any before a fallback."

    used_fallback: bool = False


@dataclass
class SweepStats:
    """Work counters accumulated over a series of local solves."""

    sweeps: int = 0
    fallbacks: int = 0

    def add(self, result: LinearSolveResult) -> None:
        self.sweeps += result.sweeps
        self.fallbacks += int(result.used_fallback)


def assemble_matrix(
    problem: VolterraProblem, partition: Partition, n: int, rule: QuadratureRule
) -> np.ndarray:
    """Assemble ``I - A`` for the collocation system on subinterval ``n``.

    ``A[i, j] = sum_q w_q Kbar(xi_i, s_i(x_q)) h_j(s_i(x_q))`` where
    ``s_i`` maps [-1, 1] onto ``[t_{n-1}, xi_i]`` and
    ``Kbar(xi_i, .) = (xi_i - t_{n-1}) / 2 * K(xi_i, .)``.

    Raises:
        SubintervalIndexError: If ``n`` is outside 1..N.
    """
    a, b = partition.interval(n)
    mapped = map_rule(rule, a, b)
    xi = mapped.nodes
    size = rule.size

    scale = (xi - a) / 2.0
    s = scale[:, None] * rule.nodes[None, :] + ((xi + a) / 2.0)[:, None]
    kbar = scale[:, None] * problem.kernel_values(xi[:, None], s)
    basis = interpolation_matrix(mapped, s.ravel()).reshape(size, size, size)
    integral = np.einsum("iq,q,iqj->ij", kbar, rule.weights, basis)
    return np.eye(size) - integral


def memory_weights(
    problem: VolterraProblem, partition: Partition, n: int, rule: QuadratureRule
) -> np.ndarray:
    """Weights turning the nodal values of blocks 1..n-1 into the memory term.

    Returns the (M+1, (n-1)(M+1)) matrix ``W`` with
    ``W[i, (j-1)(M+1) + q] = dt/2 * w_q * K(xi_i, s_j(x_q))``.
    """
    partition.check_index(n)
    a, b = partition.interval(n)
    xi = map_rule(rule, a, b).nodes
    history_nodes = partition.mapped_nodes(rule)[: n - 1].ravel()
    kernel = problem.kernel_values(xi[:, None], history_nodes[None, :])
    return (partition.dt / 2.0) * kernel * np.tile(rule.weights, n - 1)[None, :]


def _history_blocks(history, n: int, rule: QuadratureRule) -> np.ndarray:
    if isinstance(history, NodalSolution):
        if history.degree != rule.degree:
            raise DimensionError(
                f"history has degree {history.degree}, rule has degree {rule.degree}; resample first"
            )
        blocks = history.blocks
    elif history is None:
        blocks = np.empty((0, rule.size))
    else:
        blocks = np.asarray(history, dtype=float)
        if blocks.ndim != 2 or blocks.shape[1] != rule.size:
            raise DimensionError(
                f"history blocks of shape {blocks.shape} do not match degree {rule.degree}"
            )
    if blocks.shape[0] < n - 1:
        raise DimensionError(f"history covers {blocks.shape[0]} blocks, need {n - 1}")
    return blocks[: n - 1]


def history_rhs(
    problem: VolterraProblem,
    partition: Partition,
    n: int,
    rule: QuadratureRule,
    history: Union[NodalSolution, np.ndarray, None] = None,
) -> np.ndarray:
    """Right-hand side ``g(xi_i) + dt/2 sum_{j<n} (K(xi_i, s_j), U_j(s_j))_M``.

    The quadrature points of block ``j`` are exactly its stored nodes, so
    ``history`` must be at the rule's degree.

    Raises:
        DimensionError: If the history degree differs from the rule degree
            or fewer than ``n - 1`` blocks are supplied.
    """
    a, b = partition.interval(n)
    xi = map_rule(rule, a, b).nodes
    source = problem.source_values(xi).copy()
    if n == 1:
        return source
    blocks = _history_blocks(history, n, rule)
    return source + memory_weights(problem, partition, n, rule) @ blocks.ravel()


def _relative_residual(matrix: np.ndarray, x: np.ndarray, rhs: np.ndarray, scale: float) -> float:
    return float(np.max(np.abs(matrix @ x - rhs))) / scale


def local_solve(
    system: LocalSystem,
    warm_start: Optional[np.ndarray] = None,
    config: Optional[LinearSolveConfig] = None,
) -> LinearSolveResult:
    """Solve a local system by Gauss-Seidel, falling back to LU if needed.

    Sweeps start from ``warm_start`` (zero when absent) and stop once
    ``||matrix @ p - rhs||_inf / max(1, ||rhs||_inf) <= tolerance``. A run
    that exhausts ``max_sweeps``, turns non-finite or grows its residual by
    ``DIVERGENCE_GROWTH`` is handed to LU with partial pivoting.

    Raises:
        DimensionError: If the system or warm start is not conformant.
        NoConvergenceError: If Gauss-Seidel fails and fallback is disabled.
        SingularSystemError: If the fallback meets a singular matrix.
    """
    config = config or LinearSolveConfig()
    matrix = np.asarray(system.matrix, dtype=float)
    rhs = np.asarray(system.rhs, dtype=float)
    size = rhs.shape[0]
    if matrix.shape != (size, size) or rhs.ndim != 1:
        raise DimensionError(f"matrix {matrix.shape} does not match rhs {rhs.shape}")
    if warm_start is None:
        x = np.zeros(size)
    else:
        x = np.array(warm_start, dtype=float)
        if x.shape != (size,):
            raise DimensionError(f"warm start has shape {x.shape}, expected ({size},)")

    scale = max(1.0, float(np.max(np.abs(rhs))) if size else 1.0)
    lower = np.tril(matrix)
    upper = np.triu(matrix, 1)
    residual = _relative_residual(matrix, x, rhs, scale)
    initial = residual
    sweeps = 0
    while not residual <= config.tolerance:
        if sweeps >= config.max_sweeps or not np.isfinite(residual) or residual > DIVERGENCE_GROWTH * initial:
            break
        x = solve_triangular(lower, rhs - upper @ x, lower=True, check_finite=False)
        sweeps += 1
        residual = _relative_residual(matrix, x, rhs, scale)
    else:
        return LinearSolveResult(solution=x, sweeps=sweeps)

    if not config.fallback:
        raise NoConvergenceError(
            f"Gauss-Seidel stalled at relative residual {residual:.3e} after {sweeps} sweeps"
        )
    logger.warning(
        f"Gauss-Seidel stalled at relative residual {residual:.3e} after {sweeps} sweeps; "
        "falling back to LU"
    )
    try:
        factors = lu_factor(matrix, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise SingularSystemError(f"direct fallback failed: {exc}") from exc
    if np.any(np.diag(factors[0]) == 0.0):
        raise SingularSystemError("direct fallback met a zero pivot")
    return LinearSolveResult(solution=lu_solve(factors, rhs), sweeps=sweeps, used_fallback=True)


def propagate_with_stats(
    problem: VolterraProblem,
    partition: Partition,
    n: int,
    rule: QuadratureRule,
    history: Union[NodalSolution, np.ndarray, None] = None,
    warm_start: Optional[np.ndarray] = None,
    config: Optional[LinearSolveConfig] = None,
) -> LinearSolveResult:
    system = LocalSystem(
        matrix=assemble_matrix(problem, partition, n, rule),
        rhs=history_rhs(problem, partition, n, rule, history),
    )
    return local_solve(system, warm_start, config)


def propagate(
    problem: VolterraProblem,
    partition: Partition,
    n: int,
    rule: QuadratureRule,
    history: Union[NodalSolution, np.ndarray, None] = None,
    warm_start: Optional[np.ndarray] = None,
    config: Optional[LinearSolveConfig] = None,
) -> np.ndarray:
    """Solve the collocation problem on ``I_n`` given the earlier blocks.

    With the fine rule this is the fine propagator, with the coarse rule the
    coarse one; the result is the block of nodal values of ``U_n``.
    """
    return propagate_with_stats(problem, partition, n, rule, history, warm_start, config).solution


class Discretization:
    """Local operators for one (problem, partition, rule), assembled once.

    Holds every subinterval matrix, the memory-term weights and the source
    samples, so repeated sweeps only pay for right-hand sides and solves.
    Instances are read-only after construction and safe to share between
    threads.
    """

    def __init__(self, problem: VolterraProblem, partition: Partition, rule: QuadratureRule):
        self.problem = problem
        self.partition = partition
        self.rule = rule
        self.nodes = partition.mapped_nodes(rule)
        self.sources = problem.source_values(self.nodes).copy()
        self.matrices = np.stack(
            [assemble_matrix(problem, partition, n, rule) for n in range(1, partition.N + 1)]
        )
        self._memory = [
            memory_weights(problem, partition, n, rule) for n in range(1, partition.N + 1)
        ]
        for array in (self.nodes, self.sources, self.matrices, *self._memory):
            array.setflags(write=False)
        logger.debug(
            f"assembled {problem.name} operators: N={partition.N}, degree={rule.degree}"
        )

    @property
    def degree(self) -> int:
        return self.rule.degree

    def rhs(self, n: int, history: np.ndarray) -> np.ndarray:
        self.partition.check_index(n)
        if n == 1:
            return self.sources[0].copy()
        blocks = _history_blocks(history, n, self.rule)
        return self.sources[n - 1] + self._memory[n - 1] @ blocks.ravel()

    def solve(
        self,
        n: int,
        history: np.ndarray,
        warm_start: Optional[np.ndarray] = None,
        config: Optional[LinearSolveConfig] = None,
    ) -> LinearSolveResult:
        system = LocalSystem(matrix=self.matrices[n - 1], rhs=self.rhs(n, history))
        return local_solve(system, warm_start, config)

    def sweep(
        self, config: Optional[LinearSolveConfig] = None, stats: Optional[SweepStats] = None
    ) -> np.ndarray:
        """Chain the local solves for n = 1..N, each consuming all earlier blocks."""
        blocks = np.empty((self.partition.N, self.rule.size))
        for n in range(1, self.partition.N + 1):
            result = self.solve(n, blocks[: n - 1], config=config)
            blocks[n - 1] = result.solution
            if stats is not None:
                stats.add(result)
        return blocks


def sequential_solve(
    problem: VolterraProblem,
    partition: Partition,
    rule: QuadratureRule,
    config: Optional[LinearSolveConfig] = None,
    stats: Optional[SweepStats] = None,
) -> NodalSolution:
    """Solve the whole problem block after block at the degree of ``rule``."""
    blocks = Discretization(problem, partition, rule).sweep(config, stats)
    return NodalSolution(partition=partition, degree=rule.degree, blocks=blocks)


@lru_cache(maxsize=None)
def transfer_matrix(source_degree: int, target_degree: int) -> np.ndarray:
    """Interpolation matrix taking nodal values at one degree to another."""
    matrix = interpolation_matrix(compute_rule(source_degree), compute_rule(target_degree).nodes)
    matrix.setflags(write=False)
    return matrix


def resample_blocks(blocks: np.ndarray, source_degree: int, target_degree: int) -> np.ndarray:
    """Re-express each row of ``blocks`` at ``target_degree`` by interpolation."""
    blocks = np.asarray(blocks, dtype=float)
    if source_degree == target_degree:
        return blocks.copy()
    return blocks @ transfer_matrix(source_degree, target_degree).T


def resample(solution: NodalSolution, target_rule: QuadratureRule) -> NodalSolution:
    """Restrict or prolong ``solution`` onto the nodes of ``target_rule``."""
    return NodalSolution(
        partition=solution.partition,
        degree=target_rule.degree,
        blocks=resample_blocks(solution.blocks, solution.degree, target_rule.degree),
    )


def locate(partition: Partition, t) -> np.ndarray:
    """Return the 1-based block owning each time; breakpoints go to the left block."""
    index = np.searchsorted(partition.breakpoints, np.asarray(t, dtype=float), side="left")
    return np.clip(index, 1, partition.N)


def evaluate(solution: NodalSolution, t):
    """Evaluate the piecewise polynomial at ``t`` in [0, T].

    Raises:
        DomainError: If any ``t`` lies outside [0, T].
    """
    ts = np.asarray(t, dtype=float)
    partition = solution.partition
    if not np.all((ts >= 0.0) & (ts <= partition.T)):
        raise DomainError(f"evaluation time outside [0, {partition.T}]")
    flat = ts.ravel()
    owners = locate(partition, flat)
    values = np.empty(flat.shape)
    for n in np.unique(owners):
        mask = owners == n
        a, b = partition.interval(int(n))
        mapped = map_rule(solution.rule, a, b)
        values[mask] = interpolation_matrix(mapped, flat[mask]) @ solution.blocks[n - 1]
    if ts.ndim == 0:
        return float(values[0])
    return values.reshape(ts.shape)


def linf_error(solution: NodalSolution, exact: Callable[[np.ndarray], np.ndarray]) -> float:
    """Maximum deviation from ``exact`` over the fine nodes and a probe grid.

    The probe grid has ``PROBE_POINTS_PER_BLOCK`` equispaced points per
    subinterval, breakpoints included; a breakpoint is read from the block to
    its left, matching :func:`evaluate`.
    """
    partition = solution.partition
    reference = np.linspace(-1.0, 1.0, PROBE_POINTS_PER_BLOCK)
    probe_values = solution.blocks @ interpolation_matrix(solution.rule, reference).T

    a = partition.breakpoints[:-1]
    b = partition.breakpoints[1:]
    times = ((b - a) / 2.0)[:, None] * reference[None, :] + ((b + a) / 2.0)[:, None]
    times[:, 0] = a
    times[:, -1] = b

    def deviation(values: np.ndarray, at: np.ndarray) -> np.ndarray:
        target = np.broadcast_to(np.asarray(exact(at), dtype=float), at.shape)
        return np.abs(values - target)

    probe_error = deviation(probe_values, times)
    # Left ends of blocks 2..N are owned by the block before.
    probe_error[1:, 0] = 0.0
    node_error = deviation(solution.blocks, solution.nodes)
    return float(max(np.max(probe_error), np.max(node_error)))
