"""Unit tests for the local collocation solves and piecewise solutions."""

import numpy as np
import pytest

from vie_parareal.collocation import (
    Discretization,
    LinearSolveResult,
    LocalSystem,
    NodalSolution,
    Partition,
    SweepStats,
    assemble_matrix,
    evaluate,
    history_rhs,
    linf_error,
    local_solve,
    locate,
    propagate,
    resample,
    resample_blocks,
    sequential_solve,
)
from vie_parareal.configuration import LinearSolveConfig
from vie_parareal.errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    NoConvergenceError,
    SingularSystemError,
    SubintervalIndexError,
)
from vie_parareal.gauss_legendre import compute_rule, map_rule
from vie_parareal.problem import VolterraProblem, builtin


def _constant_kernel(value):
    return VolterraProblem(
        name=f"kernel={value}",
        kernel=lambda t, s: value,
        source=lambda t: np.ones_like(t),
        horizon=2.0,
    )


class TestPartition:
    """Test uniform partitions."""

    def test_breakpoints(self):
        """Test breakpoints and 1-based intervals."""
        partition = Partition(N=4, T=2.0)
        np.testing.assert_allclose(partition.breakpoints, [0.0, 0.5, 1.0, 1.5, 2.0])
        assert partition.breakpoints[-1] == 2.0
        assert partition.interval(1) == (0.0, 0.5)
        assert partition.dt == 0.5

    @pytest.mark.parametrize("n", [0, 5])
    def test_index_out_of_range(self, n):
        """Test that indices outside 1..N raise."""
        with pytest.raises(SubintervalIndexError):
            Partition(N=4, T=2.0).interval(n)

    def test_invalid(self):
        """Test that N < 1 or T <= 0 is refused."""
        with pytest.raises(ConfigurationError):
            Partition(N=0, T=1.0)
        with pytest.raises(ConfigurationError):
            Partition(N=2, T=-1.0)

    def test_locate_assigns_breakpoints_left(self):
        """Test that an interior breakpoint belongs to the block on its left."""
        partition = Partition(N=4, T=2.0)
        np.testing.assert_array_equal(locate(partition, [0.0, 0.5, 0.5000001, 2.0]), [1, 1, 2, 4])


class TestAssembly:
    """Test the local matrix and right-hand side."""

    def test_zero_kernel_gives_identity(self):
        """Test that K = 0 leaves I - A = I."""
        matrix = assemble_matrix(_constant_kernel(0.0), Partition(N=2, T=2.0), 2, compute_rule(5))
        np.testing.assert_array_equal(matrix, np.eye(6))

    def test_unit_kernel_integrates_constants(self):
        """Test that A @ 1 = xi - t_{n-1} when K = 1."""
        partition = Partition(N=4, T=2.0)
        rule = compute_rule(6)
        matrix = assemble_matrix(_constant_kernel(1.0), partition, 3, rule)
        xi = map_rule(rule, *partition.interval(3)).nodes
        np.testing.assert_allclose(matrix @ np.ones(7), 1.0 - (xi - 1.0), atol=1e-14)

    def test_history_adds_memory(self):
        """Test that earlier unit blocks add (n-1) dt to the source."""
        partition = Partition(N=4, T=2.0)
        rule = compute_rule(4)
        history = np.ones((2, 5))
        rhs = history_rhs(_constant_kernel(1.0), partition, 3, rule, history)
        np.testing.assert_allclose(rhs, 1.0 + 2 * 0.5, atol=1e-14)

    def test_history_degree_must_match(self, poly_problem):
        """Test that a history at another degree is refused."""
        partition = Partition(N=4, T=1.0)
        coarse = sequential_solve(poly_problem, partition, compute_rule(2))
        with pytest.raises(DimensionError):
            history_rhs(poly_problem, partition, 3, compute_rule(4), coarse)

    def test_short_history(self, poly_problem):
        """Test that fewer than n-1 blocks are refused."""
        with pytest.raises(DimensionError):
            history_rhs(poly_problem, Partition(N=4, T=1.0), 3, compute_rule(2), np.zeros((1, 3)))


class TestLocalSolve:
    """Test Gauss-Seidel with direct fallback."""

    def test_converges_on_dominant_system(self):
        """Test a diagonally dominant system."""
        matrix = np.array([[4.0, 1.0, 0.0], [1.0, 5.0, 2.0], [0.0, 1.0, 3.0]])
        rhs = np.array([1.0, 2.0, 3.0])
        result = local_solve(LocalSystem(matrix, rhs))
        np.testing.assert_allclose(matrix @ result.solution, rhs, atol=1e-12)
        assert result.sweeps > 0
        assert not result.used_fallback

    def test_warm_start_at_solution_needs_no_sweep(self):
        """Test that an exact warm start returns immediately."""
        matrix = np.array([[2.0, 0.0], [0.0, 4.0]])
        result = local_solve(LocalSystem(matrix, np.array([2.0, 4.0])), warm_start=np.ones(2))
        assert result.sweeps == 0
        np.testing.assert_array_equal(result.solution, [1.0, 1.0])

    def test_divergent_sweeps_fall_back(self, caplog):
        """Test that a divergent iteration is finished by LU."""
        matrix = np.array([[1.0, 2.0], [3.0, 1.0]])
        rhs = np.array([3.0, 4.0])
        result = local_solve(LocalSystem(matrix, rhs))
        assert result.used_fallback
        np.testing.assert_allclose(result.solution, [1.0, 1.0], atol=1e-14)
        assert "falling back to LU" in caplog.text

    def test_no_fallback_raises(self):
        """Test NoConvergenceError when fallback is disabled."""
        matrix = np.array([[1.0, 2.0], [3.0, 1.0]])
        config = LinearSolveConfig(fallback=False)
        with pytest.raises(NoConvergenceError):
            local_solve(LocalSystem(matrix, np.array([3.0, 4.0])), config=config)

    def test_singular_system(self):
        """Test SingularSystemError on a singular matrix."""
        matrix = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SingularSystemError):
            local_solve(LocalSystem(matrix, np.array([1.0, 2.0])), config=LinearSolveConfig(max_sweeps=5))

    def test_shape_mismatch(self):
        """Test that a warm start of the wrong size raises."""
        with pytest.raises(DimensionError):
            local_solve(LocalSystem(np.eye(3), np.ones(3)), warm_start=np.ones(2))

    def test_stats_accumulate(self):
        """Test the sweep counters."""
        stats = SweepStats()
        stats.add(LinearSolveResult(solution=np.zeros(1), sweeps=3))
        stats.add(LinearSolveResult(solution=np.zeros(1), sweeps=2, used_fallback=True))
        assert (stats.sweeps, stats.fallbacks) == (5, 1)


class TestSequentialSolve:
    """Test the block-by-block solve."""

    @pytest.mark.parametrize("N", [1, 4, 8])
    @pytest.mark.parametrize("M", [2, 3, 4, 5, 6])
    def test_manufactured_solution_is_exact(self, poly_problem, N, M):
        """Test that u(t) = t is reproduced to round-off."""
        solution = sequential_solve(poly_problem, Partition(N=N, T=1.0), compute_rule(M))
        assert linf_error(solution, poly_problem.exact) <= 1e-10

    def test_error_decreases_with_degree(self, sin_problem, small_partition):
        """Test spectral convergence on the sine-kernel problem."""
        errors = [
            linf_error(sequential_solve(sin_problem, small_partition, compute_rule(M)), sin_problem.exact)
            for M in (4, 8, 12)
        ]
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-6

    def test_cached_operators_match_direct_assembly(self, sin_problem, small_partition):
        """Test that Discretization.solve agrees with propagate."""
        rule = compute_rule(6)
        operators = Discretization(sin_problem, small_partition, rule)
        history = sequential_solve(sin_problem, small_partition, rule).blocks[:2]
        direct = propagate(sin_problem, small_partition, 3, rule, history)
        cached = operators.solve(3, history).solution
        np.testing.assert_allclose(cached, direct, atol=1e-13)

    def test_stats_are_collected(self, sin_problem, small_partition):
        """Test that every block contributes its sweeps."""
        stats = SweepStats()
        sequential_solve(sin_problem, small_partition, compute_rule(6), stats=stats)
        assert stats.sweeps >= small_partition.N

    def test_blocks_are_fixed_points_of_the_local_systems(self, sin_problem, small_partition):
        """Test that re-assembled systems are satisfied by the computed blocks."""
        rule = compute_rule(10)
        tolerance = LinearSolveConfig().tolerance
        solution = sequential_solve(sin_problem, small_partition, rule)
        for n in range(1, small_partition.N + 1):
            matrix = assemble_matrix(sin_problem, small_partition, n, rule)
            rhs = history_rhs(sin_problem, small_partition, n, rule, solution)
            residual = np.max(np.abs(matrix @ solution.block(n) - rhs)) / max(1.0, np.max(np.abs(rhs)))
            assert residual <= 10 * tolerance

    @pytest.mark.slow
    @pytest.mark.parametrize("name, M", [("sin-kernel", 25), ("exp-kernel", 20)])
    def test_long_horizon_accuracy(self, name, M):
        """Test that T = 100 with N = 20 reaches 1e-8."""
        problem = builtin(name, 100.0)
        solution = sequential_solve(problem, Partition(N=20, T=100.0), compute_rule(M))
        assert linf_error(solution, problem.exact) <= 1e-8

    @pytest.mark.slow
    def test_error_decays_geometrically_in_degree(self):
        """Test non-increasing errors with mean ratio at most 0.5 per step of 2 in M."""
        problem = builtin("sin-kernel", 100.0)
        partition = Partition(N=20, T=100.0)
        errors = [
            linf_error(sequential_solve(problem, partition, compute_rule(M)), problem.exact)
            for M in range(8, 27, 2)
        ]
        assert all(after <= before for before, after in zip(errors, errors[1:]))
        ratio = (errors[-1] / errors[0]) ** (1 / (len(errors) - 1))
        assert ratio <= 0.5


class TestNodalSolution:
    """Test piecewise solutions, resampling and evaluation."""

    def test_wrong_shape(self, small_partition):
        """Test that blocks of the wrong shape raise."""
        with pytest.raises(DimensionError):
            NodalSolution(partition=small_partition, degree=3, blocks=np.zeros((4, 3)))

    def test_blocks_are_read_only(self, small_partition):
        """Test that the stored blocks cannot be modified."""
        solution = NodalSolution(partition=small_partition, degree=2, blocks=np.zeros((4, 3)))
        with pytest.raises(ValueError):
            solution.blocks[0, 0] = 1.0

    def test_resample_round_trip(self, small_partition):
        """Test that prolonging then restricting returns the coarse values."""
        coarse = NodalSolution.from_function(small_partition, compute_rule(3), np.cos)
        back = resample(resample(coarse, compute_rule(9)), compute_rule(3))
        np.testing.assert_allclose(back.blocks, coarse.blocks, atol=1e-13)

    def test_resample_same_degree_copies(self):
        """Test that equal degrees return an equal copy."""
        blocks = np.arange(6.0).reshape(2, 3)
        result = resample_blocks(blocks, 2, 2)
        np.testing.assert_array_equal(result, blocks)
        assert result is not blocks

    def test_evaluate_polynomial(self, small_partition):
        """Test evaluation of a sampled polynomial anywhere in [0, T]."""
        solution = NodalSolution.from_function(small_partition, compute_rule(3), lambda t: t**3 - t)
        t = np.linspace(0.0, 2.0, 41)
        np.testing.assert_allclose(evaluate(solution, t), t**3 - t, atol=1e-12)
        assert solution.evaluate(0.5) == pytest.approx(0.125 - 0.5, abs=1e-13)

    @pytest.mark.parametrize("t", [-1e-9, 2.0 + 1e-9])
    def test_evaluate_outside_domain(self, small_partition, t):
        """Test that times outside [0, T] raise."""
        solution = NodalSolution.from_function(small_partition, compute_rule(2), np.sin)
        with pytest.raises(DomainError):
            evaluate(solution, t)


class TestLinfError:
    """Test the probe-grid error measure."""

    def test_interpolated_polynomial(self, small_partition):
        """Test that an interpolated polynomial of degree <= M has no error."""
        solution = NodalSolution.from_function(small_partition, compute_rule(5), lambda t: t**5)
        assert linf_error(solution, lambda t: t**5) <= 1e-11

    def test_zero_solution_against_sine(self):
        """Test that a zero solution misses sin(pi t) by its maximum."""
        partition = Partition(N=3, T=1.0)
        solution = NodalSolution(partition=partition, degree=4, blocks=np.zeros((3, 5)))
        assert linf_error(solution, lambda t: np.sin(np.pi * t)) == pytest.approx(1.0, abs=1e-6)

    def test_constant_is_exact(self, small_partition):
        """Test that a sampled constant has zero error."""
        solution = NodalSolution.from_function(small_partition, compute_rule(3), lambda t: 0.25)
        assert linf_error(solution, lambda t: 0.25) <= 1e-15
