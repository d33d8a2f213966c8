"""The parareal iteration for Volterra equations.

Each sweep has two stages:

1. Correction (parallel over n): ``C_n = F_n(t; U^{k-1}) - G_n(t; U^{k-1})``
   against the frozen previous iterate.
2. Prediction (sequential in n): ``U^k_n = G_n(t; U^k_1, ..., U^k_{n-1}) + C_n``.

The iterate lives on the fine grid. Coarse solves see its restriction and
their output is prolonged before the update. The coarse predictions of one
sweep are cached and serve as ``G_n(U^{k-1})`` in the next correction stage.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Tuple, TypeVar

import numpy as np

from .collocation import (
    Discretization,
    LinearSolveResult,
    NodalSolution,
    Partition,
    SweepStats,
    linf_error,
    resample_blocks,
)
from .configuration import PararealConfig
from .errors import DivergenceError
from .gauss_legendre import compute_rule
from .problem import VolterraProblem
from .state import Corrections, Operators, PararealState

logger = logging.getLogger(__name__)

T = TypeVar("T")


def build_operators(
    problem: VolterraProblem, partition: Partition, config: PararealConfig
) -> Operators:
    """Assemble the fine and coarse local operators once for a whole run."""
    return Operators(
        fine=Discretization(problem, partition, compute_rule(config.M)),
        coarse=Discretization(problem, partition, compute_rule(config.Mc)),
    )


def _measure(state: PararealState, problem: VolterraProblem, config: PararealConfig) -> List[float]:
    if problem.exact is None or not config.track_errors:
        return state.errors
    return [*state.errors, linf_error(state.current, problem.exact)]


def _map_blocks(
    task: Callable[[int], T], blocks: Iterable[int], config: PararealConfig
) -> List[T]:
    """Apply ``task`` to every block index, on a thread pool when enabled.

    Results come back in block order whichever worker finished first.
    """
    if not config.parallel:
        return [task(n) for n in blocks]
    with ThreadPoolExecutor(max_workers=config.worker_count()) as pool:
        return list(pool.map(task, blocks))


def _check_finite(values: np.ndarray, n: int, k: int, stage: str) -> None:
    if not np.all(np.isfinite(values)):
        raise DivergenceError(n=n, k=k, stage=stage)


def init(
    problem: VolterraProblem,
    partition: Partition,
    config: PararealConfig,
    operators: Optional[Operators] = None,
) -> PararealState:
    """Coarse initialization: ``U^0_n = G_n(t; U^0_1, ..., U^0_{n-1})`` for n = 1..N."""
    operators = operators or build_operators(problem, partition, config)
    stats = SweepStats()
    coarse = operators.coarse.sweep(config.linear, stats)
    for n in range(1, partition.N + 1):
        _check_finite(coarse[n - 1], n, 0, "initialization")

    fine = resample_blocks(coarse, config.Mc, config.M)
    state = PararealState(
        k=0,
        current=NodalSolution(partition=partition, degree=config.M, blocks=fine),
        coarse_prev=fine.copy(),
        coarse_sweeps=stats.sweeps,
        fallbacks=stats.fallbacks,
        sweep_history=[(0, stats.sweeps)],
    )
    state.errors = _measure(state, problem, config)
    if state.errors:
        logger.info(f"k=0: coarse initialization error {state.errors[-1]:.3e}")
    return state


def correction_stage(
    state: PararealState, operators: Operators, config: PararealConfig
) -> Corrections:
    """Compute ``C_n = F_n(U^{k-1}) - G_n(U^{k-1})`` for every block.

    Every task reads only the frozen iterate, so the stage may run on a
    thread pool without changing a single bit of the result.
    """
    previous = state.current.blocks
    coarse_cached = state.coarse_prev
    restricted = None
    if coarse_cached is None:
        restricted = resample_blocks(previous, config.M, config.Mc)

    def correct_block(n: int) -> Tuple[np.ndarray, LinearSolveResult, Optional[LinearSolveResult]]:
        fine = operators.fine.solve(n, previous[: n - 1], warm_start=previous[n - 1], config=config.linear)
        if coarse_cached is not None:
            return fine.solution - coarse_cached[n - 1], fine, None
        coarse = operators.coarse.solve(
            n, restricted[: n - 1], warm_start=restricted[n - 1], config=config.linear
        )
        predicted = resample_blocks(coarse.solution[None, :], config.Mc, config.M)[0]
        return fine.solution - predicted, fine, coarse

    results = _map_blocks(correct_block, range(1, state.current.partition.N + 1), config)

    fine_stats, coarse_stats = SweepStats(), SweepStats()
    values = np.empty_like(previous)
    for n, (correction, fine, coarse) in enumerate(results, start=1):
        _check_finite(correction, n, state.k + 1, "correction")
        values[n - 1] = correction
        fine_stats.add(fine)
        if coarse is not None:
            coarse_stats.add(coarse)
    return Corrections(
        values=values,
        fine_sweeps=fine_stats.sweeps,
        coarse_sweeps=coarse_stats.sweeps,
        fallbacks=fine_stats.fallbacks + coarse_stats.fallbacks,
    )


def prediction_stage(
    state: PararealState,
    corrections: Corrections,
    operators: Operators,
    problem: VolterraProblem,
    config: PararealConfig,
) -> PararealState:
    """Run the coarse sweep on the new iterate and apply ``U^k = G(U^k) + C``."""
    partition = state.current.partition
    previous = state.current.blocks
    k = state.k + 1
    warm = resample_blocks(previous, config.M, config.Mc)

    updated = np.empty_like(previous)
    predictions = np.empty_like(previous)
    coarse_history = np.empty((partition.N, config.Mc + 1))
    stats = SweepStats()
    for n in range(1, partition.N + 1):
        result = operators.coarse.solve(
            n, coarse_history[: n - 1], warm_start=warm[n - 1], config=config.linear
        )
        stats.add(result)
        predictions[n - 1] = resample_blocks(result.solution[None, :], config.Mc, config.M)[0]
        updated[n - 1] = predictions[n - 1] + corrections.values[n - 1]
        _check_finite(updated[n - 1], n, k, "prediction")
        coarse_history[n - 1] = resample_blocks(updated[n - 1][None, :], config.M, config.Mc)[0]

    increment = float(np.max(np.abs(updated - previous)))
    new_state = replace(
        state,
        k=k,
        current=NodalSolution(partition=partition, degree=config.M, blocks=updated),
        coarse_prev=predictions,
        increments=[*state.increments, increment],
        fine_sweeps=state.fine_sweeps + corrections.fine_sweeps,
        coarse_sweeps=state.coarse_sweeps + corrections.coarse_sweeps + stats.sweeps,
        fallbacks=state.fallbacks + corrections.fallbacks + stats.fallbacks,
    )
    new_state.sweep_history = [*state.sweep_history, (new_state.fine_sweeps, new_state.coarse_sweeps)]
    new_state.errors = _measure(new_state, problem, config)
    if new_state.errors:
        logger.info(f"k={k}: increment {increment:.3e}, error {new_state.errors[-1]:.3e}")
    else:
        logger.info(f"k={k}: increment {increment:.3e}")
    return new_state


def iterate_once(
    state: PararealState,
    problem: VolterraProblem,
    partition: Partition,
    config: PararealConfig,
    operators: Optional[Operators] = None,
) -> PararealState:
    """Advance the iterate by one parareal sweep."""
    operators = operators or build_operators(problem, partition, config)
    corrections = correction_stage(state, operators, config)
    return prediction_stage(state, corrections, operators, problem, config)


def is_converged(state: PararealState, config: PararealConfig) -> bool:
    increment = state.last_increment
    return config.stop_tol > 0 and increment is not None and increment <= config.stop_tol


def should_stop(state: PararealState, config: PararealConfig) -> bool:
    return state.k >= config.max_iters or is_converged(state, config)


@dataclass
class PararealReport:
    """Diagnostics of a finished run."""

    iterations: int
    increments: List[float]
    errors: List[float]
    "L-infinity errors; index 0 is the coarse initialization. Empty without an exact solution."

    fine_sweeps: int
    coarse_sweeps: int
    fallbacks: int
    converged: bool
    sweep_history: List[Tuple[int, int]] = field(default_factory=list)
    stage_ms: Dict[str, List[float]] = field(default_factory=dict)
    stage_log: List[Tuple[str, int, float]] = field(default_factory=list)

    @property
    def wall_ms(self) -> float:
        return float(sum(sum(times) for times in self.stage_ms.values()))

    def wall_ms_through(self, k: int) -> float:
        """Wall time spent up to and including iteration ``k``."""
        return float(sum(elapsed for _, iteration, elapsed in self.stage_log if iteration <= k))

    @property
    def final_error(self) -> Optional[float]:
        return self.errors[-1] if self.errors else None

    @classmethod
    def from_state(
        cls,
        state: PararealState,
        config: PararealConfig,
        stage_ms: Iterable[Tuple[str, int, float]] = (),
    ) -> PararealReport:
        stage_log = list(stage_ms)
        timings: Dict[str, List[float]] = {}
        for stage, _, elapsed in stage_log:
            timings.setdefault(stage, []).append(elapsed)
        return cls(
            iterations=state.k,
            increments=list(state.increments),
            errors=list(state.errors),
            fine_sweeps=state.fine_sweeps,
            coarse_sweeps=state.coarse_sweeps,
            fallbacks=state.fallbacks,
            converged=is_converged(state, config),
            sweep_history=list(state.sweep_history),
            stage_ms=timings,
            stage_log=stage_log,
        )
