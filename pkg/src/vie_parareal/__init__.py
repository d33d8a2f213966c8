"""Parareal spectral collocation for Volterra integral equations of the second kind.

This module exposes the compiled driver graph and the entry points most
callers need.
"""

from .collocation import NodalSolution, Partition, evaluate, linf_error, sequential_solve
from .configuration import LinearSolveConfig, PararealConfig
from .graph import fixed_point_gap, graph, run
from .problem import VolterraProblem, builtin

__all__ = [
    "LinearSolveConfig",
    "NodalSolution",
    "PararealConfig",
    "Partition",
    "VolterraProblem",
    "builtin",
    "evaluate",
    "fixed_point_gap",
    "graph",
    "linf_error",
    "run",
    "sequential_solve",
]
