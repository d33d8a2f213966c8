"""Shared test fixtures for unit tests."""

import pytest

from vie_parareal.collocation import Partition
from vie_parareal.configuration import PararealConfig
from vie_parareal.problem import builtin


@pytest.fixture
def poly_problem():
    """Provide the manufactured problem u(t) = t on [0, 1]."""
    return builtin("poly-manufactured", 1.0)


@pytest.fixture
def sin_problem():
    """Provide the sine-kernel benchmark on a short horizon."""
    return builtin("sin-kernel", 2.0)


@pytest.fixture
def small_partition():
    """Provide four subintervals of [0, 2]."""
    return Partition(N=4, T=2.0)


@pytest.fixture
def small_config():
    """Provide a cheap parareal configuration matching ``small_partition``."""
    return PararealConfig(N=4, M=10, Mc=4, max_iters=4, stop_tol=0.0)
