"""Define the parareal driver graph.

The iteration is a small state machine: ``initialize`` runs the coarse
sweep, then ``correct`` and ``predict`` alternate until the iteration cap or
the increment tolerance ends the run. Solver settings travel in
``config["configurable"]`` and are read with
:meth:`PararealConfig.from_runnable_config`.
"""

import logging
import time
from typing import Any, Dict, Literal, Optional, Tuple

from langchain_core.runnables import RunnableConfig
from langgraph.graph import StateGraph

from vie_parareal.collocation import NodalSolution, Partition, sequential_solve
from vie_parareal.configuration import PararealConfig
from vie_parareal.errors import ConfigurationError, NotConvergedError
from vie_parareal.gauss_legendre import compute_rule
from vie_parareal.parareal import (
    PararealReport,
    build_operators,
    correction_stage,
    init,
    prediction_stage,
    should_stop,
)
from vie_parareal.problem import VolterraProblem
from vie_parareal.state import RunState

logger = logging.getLogger(__name__)


def _elapsed_ms(start: float) -> float:
    return (time.perf_counter() - start) * 1e3


def initialize(state: RunState, *, config: Optional[RunnableConfig] = None) -> Dict[str, Any]:
    """Assemble the local operators and run the coarse initialization sweep."""
    configuration = PararealConfig.from_runnable_config(config)
    start = time.perf_counter()
    operators = build_operators(state.problem, state.partition, configuration)
    parareal = init(state.problem, state.partition, configuration, operators)
    elapsed = _elapsed_ms(start)
    logger.debug(f"initialize: {elapsed:.1f} ms")
    return {
        "operators": operators,
        "parareal": parareal,
        "stage_ms": [("initialize", 0, elapsed)],
    }


def correct(state: RunState, *, config: Optional[RunnableConfig] = None) -> Dict[str, Any]:
    """Compute the fine-minus-coarse corrections against the frozen iterate."""
    configuration = PararealConfig.from_runnable_config(config)
    start = time.perf_counter()
    corrections = correction_stage(state.parareal, state.operators, configuration)
    elapsed = _elapsed_ms(start)
    k = state.parareal.k + 1
    logger.debug(f"correct k={k}: {elapsed:.1f} ms, {corrections.fine_sweeps} fine sweeps")
    return {"corrections": corrections, "stage_ms": [("correct", k, elapsed)]}


def predict(state: RunState, *, config: Optional[RunnableConfig] = None) -> Dict[str, Any]:
    """Run the sequential coarse sweep and apply the additive update."""
    configuration = PararealConfig.from_runnable_config(config)
    start = time.perf_counter()
    parareal = prediction_stage(
        state.parareal, state.corrections, state.operators, state.problem, configuration
    )
    elapsed = _elapsed_ms(start)
    logger.debug(f"predict k={parareal.k}: {elapsed:.1f} ms")
    return {
        "parareal": parareal,
        "corrections": None,
        "stage_ms": [("predict", parareal.k, elapsed)],
    }


def route_next_sweep(
    state: RunState, config: RunnableConfig
) -> Literal["correct", "__end__"]:
    """Route to another sweep unless the cap or the increment tolerance is reached."""
    configuration = PararealConfig.from_runnable_config(config)
    if should_stop(state.parareal, configuration):
        return "__end__"
    return "correct"


# Define the graph
graph = (
    StateGraph(RunState, config_schema=PararealConfig)
    .add_node("initialize", initialize)
    .add_node("correct", correct)
    .add_node("predict", predict)
    .add_edge("__start__", "initialize")
    .add_conditional_edges(
        "initialize",
        route_next_sweep,
        {"correct": "correct", "__end__": "__end__"},
    )
    .add_edge("correct", "predict")
    .add_conditional_edges(
        "predict",
        route_next_sweep,
        {"correct": "correct", "__end__": "__end__"},
    )
    .compile(name="Parareal Volterra Solver")
)


def run(
    problem: VolterraProblem, partition: Partition, config: PararealConfig
) -> Tuple[NodalSolution, PararealReport]:
    """Run parareal to the iteration cap or the increment tolerance.

    Returns:
        The final iterate on the fine grid and the run report.
    """
    if partition.N != config.N:
        raise ConfigurationError(f"partition has N={partition.N}, configuration says N={config.N}")
    result = graph.invoke(
        {"problem": problem, "partition": partition},
        config={
            "configurable": config.as_configurable(),
            "recursion_limit": 2 * config.max_iters + 8,
        },
    )
    state = result["parareal"]
    report = PararealReport.from_state(state, config, result.get("stage_ms", ()))
    return state.current, report


def fixed_point_gap(problem: VolterraProblem, partition: Partition, config: PararealConfig) -> float:
    """Distance between a converged parareal run and the sequential fine solution.

    Raises:
        NotConvergedError: If the run stopped on the iteration cap with its
            last increment above ``stop_tol``.
    """
    solution, report = run(problem, partition, config)
    if not report.converged:
        last = report.increments[-1] if report.increments else float("nan")
        raise NotConvergedError(
            f"run stopped after {report.iterations} sweeps with increment {last:.3e} > {config.stop_tol:g}"
        )
    fine = sequential_solve(problem, partition, compute_rule(config.M), config.linear)
    return solution.max_difference(fine)
