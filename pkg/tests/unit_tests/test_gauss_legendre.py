"""Unit tests for Legendre-Gauss rules and barycentric interpolation."""

import math

import numpy as np
import pytest

from vie_parareal.errors import DimensionError, InvalidIntervalError
from vie_parareal.gauss_legendre import (
    compute_rule,
    discrete_inner_product,
    interpolate,
    interpolation_matrix,
    lebesgue_constant,
    legendre_pair,
    map_rule,
)


class TestLegendrePair:
    """Test Legendre polynomial evaluation."""

    def test_low_degrees(self):
        """Test L_2 and its derivative against the closed form."""
        x = np.array([-0.7, 0.0, 0.3, 1.0])
        value, deriv = legendre_pair(2, x)
        np.testing.assert_allclose(value, (3 * x**2 - 1) / 2, atol=1e-15)
        np.testing.assert_allclose(deriv, 3 * x, atol=1e-15)

    def test_endpoint_values(self):
        """Test L_n(1) = 1 and L_n(-1) = (-1)^n."""
        for n in range(8):
            assert legendre_pair(n, 1.0)[0] == pytest.approx(1.0, abs=1e-14)
            assert legendre_pair(n, -1.0)[0] == pytest.approx((-1) ** n, abs=1e-14)

    def test_scalar_input_returns_floats(self):
        """Test that a scalar point gives scalar results."""
        value, deriv = legendre_pair(3, 0.5)
        assert isinstance(value, float) and isinstance(deriv, float)

    def test_negative_degree(self):
        """Test that a negative degree is rejected."""
        with pytest.raises(ValueError):
            legendre_pair(-1, 0.0)


class TestComputeRule:
    """Test construction of Legendre-Gauss rules."""

    def test_single_node(self):
        """Test the one-point rule."""
        rule = compute_rule(0)
        assert rule.nodes.tolist() == [0.0]
        assert rule.weights[0] == pytest.approx(2.0, abs=1e-15)

    def test_two_point_rule(self):
        """Test the two-point rule against +-1/sqrt(3)."""
        rule = compute_rule(1)
        np.testing.assert_allclose(rule.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
        np.testing.assert_allclose(rule.weights, [1.0, 1.0], atol=1e-15)

    @pytest.mark.parametrize("M", range(41))
    def test_weights_sum_to_two(self, M):
        """Test that weights are positive and sum to 2."""
        rule = compute_rule(M)
        assert np.all(rule.weights > 0)
        assert abs(np.sum(rule.weights) - 2.0) <= 1e-13

    @pytest.mark.parametrize("M", range(41))
    def test_nodes_sorted_and_symmetric(self, M):
        """Test strictly increasing nodes mirrored about zero."""
        rule = compute_rule(M)
        assert np.all(np.diff(rule.nodes) > 0)
        assert np.all(np.abs(rule.nodes) < 1)
        np.testing.assert_array_equal(rule.nodes, -rule.nodes[::-1])

    @pytest.mark.parametrize("M", range(41))
    def test_exact_for_degree_2m_plus_1(self, M):
        """Test that x^p integrates exactly for every p <= 2M+1."""
        rule = compute_rule(M)
        for p in range(2 * M + 2):
            approx = float(np.sum(rule.weights * rule.nodes**p))
            if p % 2:
                assert abs(approx) <= 1e-13
            else:
                exact = 2.0 / (p + 1)
                assert abs(approx - exact) <= 1e-12 * exact

    @pytest.mark.parametrize("M", [50, 100, 150, 200])
    def test_newton_converges_at_high_degree(self, M):
        """Test that large rules are built with symmetric nodes and weights summing to 2."""
        rule = compute_rule(M)
        assert rule.size == M + 1
        assert abs(np.sum(rule.weights) - 2.0) <= 1e-13
        assert np.all(np.diff(rule.nodes) > 0)
        np.testing.assert_array_equal(rule.nodes, -rule.nodes[::-1])
        np.testing.assert_array_equal(rule.weights, rule.weights[::-1])

    def test_rules_are_cached_and_read_only(self):
        """Test that the same rule object comes back and cannot be mutated."""
        rule = compute_rule(7)
        assert compute_rule(7) is rule
        with pytest.raises(ValueError):
            rule.nodes[0] = 0.0


class TestMapRule:
    """Test affine mapping of rules."""

    def test_integrates_on_interval(self):
        """Test that a mapped rule integrates a cubic on [2, 5]."""
        mapped = map_rule(compute_rule(3), 2.0, 5.0)
        approx = float(np.sum(mapped.weights * mapped.nodes**3))
        assert approx == pytest.approx((5.0**4 - 2.0**4) / 4, rel=1e-14)
        assert mapped.interval == (2.0, 5.0)
        assert mapped.degree == 3

    def test_reference_interval_is_identity(self):
        """Test that mapping onto [-1, 1] leaves the rule unchanged."""
        rule = compute_rule(6)
        mapped = map_rule(rule, -1.0, 1.0)
        np.testing.assert_array_equal(mapped.nodes, rule.nodes)
        np.testing.assert_array_equal(mapped.weights, rule.weights)

    @pytest.mark.parametrize("a, b", [(1.0, 1.0), (2.0, 1.0)])
    def test_rejects_empty_interval(self, a, b):
        """Test that a >= b raises."""
        with pytest.raises(InvalidIntervalError):
            map_rule(compute_rule(2), a, b)


class TestDiscreteInnerProduct:
    """Test the discrete L2 inner product."""

    def test_matches_integral(self):
        """Test (x^2, x^3)_M against the integral of x^5 on [0, 1]."""
        mapped = map_rule(compute_rule(4), 0.0, 1.0)
        value = discrete_inner_product(mapped.nodes**2, mapped.nodes**3, mapped)
        assert value == pytest.approx(1 / 6, rel=1e-14)

    def test_symmetric(self):
        """Test that swapping the arguments gives the same bits."""
        mapped = map_rule(compute_rule(7), 0.0, 3.0)
        f = np.sin(mapped.nodes)
        g = np.exp(-mapped.nodes)
        assert discrete_inner_product(f, g, mapped) == discrete_inner_product(g, f, mapped)

    def test_odd_integrand_vanishes(self):
        """Test (x^3, x^2) on the three-point rule."""
        rule = compute_rule(2)
        assert abs(discrete_inner_product(rule.nodes**3, rule.nodes**2, rule)) <= 1e-16

    def test_length_mismatch(self):
        """Test that arrays of the wrong length raise."""
        with pytest.raises(DimensionError):
            discrete_inner_product(np.ones(3), np.ones(4), compute_rule(3))


class TestInterpolation:
    """Test barycentric interpolation."""

    def test_reproduces_polynomials(self):
        """Test that a degree-M polynomial is interpolated to round-off."""
        rule = compute_rule(6)
        poly = np.polynomial.Polynomial([0.3, -1.0, 0.5, 2.0, 0.0, -0.7, 1.1])
        x = np.linspace(-1, 1, 57)
        np.testing.assert_allclose(interpolate(rule, poly(rule.nodes), x), poly(x), atol=1e-13)

    def test_node_hits_return_stored_values(self):
        """Test that interpolating at a node returns the nodal value exactly."""
        rule = compute_rule(5)
        values = np.arange(6.0) ** 2
        assert interpolate(rule, values, rule.nodes[2]) == values[2]
        np.testing.assert_array_equal(interpolation_matrix(rule, rule.nodes), np.eye(6))

    def test_rows_sum_to_one(self):
        """Test the partition of unity of the Lagrange basis."""
        basis = interpolation_matrix(compute_rule(9), np.linspace(-1, 1, 31))
        np.testing.assert_allclose(basis.sum(axis=1), 1.0, atol=1e-14)

    def test_wrong_value_count(self):
        """Test that a value array of the wrong size raises."""
        with pytest.raises(DimensionError):
            interpolate(compute_rule(3), np.ones(3), 0.0)

    def test_array_shape_is_preserved(self):
        """Test that 2-D targets give 2-D results."""
        rule = compute_rule(3)
        result = interpolate(rule, rule.nodes, np.zeros((2, 5)))
        assert result.shape == (2, 5)


class TestLebesgueConstant:
    """Test the Lebesgue constant estimate."""

    def test_single_node_is_one(self):
        """Test that constant interpolation has Lebesgue constant 1."""
        assert lebesgue_constant(compute_rule(0)) == pytest.approx(1.0)

    def test_grows_like_sqrt(self):
        """Test the bound 3 sqrt(M+1) for every M up to 50."""
        for M in range(51):
            assert lebesgue_constant(compute_rule(M)) <= 3 * math.sqrt(M + 1)

    def test_too_few_samples(self):
        """Test that fewer than 1000 samples are refused."""
        with pytest.raises(ValueError):
            lebesgue_constant(compute_rule(4), samples=999)
