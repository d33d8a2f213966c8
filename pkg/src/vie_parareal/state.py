"""State definitions for the parareal solver.

``PararealState`` is the iterate the algorithm carries from sweep to sweep.
``InputState`` and ``RunState`` are the records the LangGraph
driver passes between its nodes.
"""

import operator
from dataclasses import dataclass, field
from typing import Annotated, List, Optional, Tuple

import numpy as np

from .collocation import Discretization, NodalSolution, Partition
from .problem import VolterraProblem


@dataclass(kw_only=True)
class PararealState:
    """The iterate ``U^k`` and everything needed to produce ``U^{k+1}``."""

    k: int = 0
    "Iteration counter; 0 is the coarse initialization."

    current: NodalSolution
    "The iterate on the fine grid (N blocks of M+1 values)."

    coarse_prev: Optional[np.ndarray] = None
    """
    Coarse predictions ``G_n(t; U^k)`` computed during the sweep that produced
    ``current``, prolonged to the fine nodes. The next correction stage reuses
    them instead of solving the coarse problems again.
    """

    increments: List[float] = field(default_factory=list)
    "``||U^k - U^{k-1}||_inf`` over fine nodes, one entry per completed sweep."

    errors: List[float] = field(default_factory=list)
    "L-infinity error against the exact solution; entry k belongs to ``U^k``."

    fine_sweeps: int = 0
    coarse_sweeps: int = 0
    fallbacks: int = 0
    "Local solves that needed the LU fallback."

    sweep_history: List[Tuple[int, int]] = field(default_factory=list)
    "Cumulative (fine, coarse) Gauss-Seidel sweeps after each iteration, index 0 = initialization."

    @property
    def last_increment(self) -> Optional[float]:
        return self.increments[-1] if self.increments else None


@dataclass(frozen=True)
class Operators:
    """Fine and coarse local operators shared by every sweep of a run."""

    fine: Discretization
    coarse: Discretization


@dataclass(frozen=True)
class Corrections:
    """Output of the correction stage: ``F_n(U^{k-1}) - G_n(U^{k-1})`` per block."""

    values: np.ndarray
    fine_sweeps: int = 0
    coarse_sweeps: int = 0
    fallbacks: int = 0


@dataclass(kw_only=True)
class InputState:
    """Input state defines the interface between the graph and the caller."""

    problem: VolterraProblem
    partition: Partition


@dataclass(kw_only=True)
class RunState(InputState):
    """Everything the driver graph reads and writes while iterating."""

    operators: Optional[Operators] = None
    parareal: Optional[PararealState] = None
    corrections: Optional[Corrections] = None

    stage_ms: Annotated[List[Tuple[str, int, float]], operator.add] = field(default_factory=list)
    "(stage name, iteration, wall milliseconds), appended by every node."
