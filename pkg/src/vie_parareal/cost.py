"""Operation-count model comparing sequential fine solves with parareal.

Constants inside every O(.) term are taken as 1, so the figures are model
units rather than predictions of wall time.
"""

from dataclasses import dataclass

from .errors import ConfigurationError


@dataclass(frozen=True)
class CostEstimate:
    """Model costs of one parareal run against the sequential fine solve."""

    N: int
    M: int
    Mc: int
    K: int

    sequential_cost: float
    "N M^3: N fine solves, each O(M) Gauss-Seidel sweeps of O(M^2)."

    parareal_cost: float
    "K (N Mc^2 + N M Mc + M^2 + N M Mc): coarse sweep, transfers, one fine solve."

    speedup: float
    asymptotic_bound: float
    "(K Mc^2/M^3 + K Mc/M^2 + K/(N M))^-1."

    reference_speedup: float
    "M/K, the speedup the model always beats."

    ideal_speedup: float
    "N M/K, approached when Mc << M or Mc N = M."


def speedup_estimate(N: int, M: int, Mc: int, K: int) -> CostEstimate:
    """Evaluate the cost model for N subintervals, degrees M > Mc and K sweeps.

    Raises:
        ConfigurationError: If any argument is non-positive or ``Mc >= M``.
    """
    if min(N, M, Mc, K) < 1:
        raise ConfigurationError(f"N, M, Mc, K must be positive, got {(N, M, Mc, K)}")
    if Mc >= M:
        raise ConfigurationError(f"coarse degree Mc={Mc} must be below M={M}")

    sequential = float(N * M**3)
    parareal = float(K * (N * Mc**2 + N * M * Mc + M**2 + N * M * Mc))
    bound = 1.0 / (K * Mc**2 / M**3 + K * Mc / M**2 + K / (N * M))
    return CostEstimate(
        N=N,
        M=M,
        Mc=Mc,
        K=K,
        sequential_cost=sequential,
        parareal_cost=parareal,
        speedup=sequential / parareal,
        asymptotic_bound=bound,
        reference_speedup=M / K,
        ideal_speedup=N * M / K,
    )
