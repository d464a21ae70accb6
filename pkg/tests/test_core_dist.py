import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import cdf_pointwise, restrict_pointwise
from strategies import distribution_pairs, grid_distributions

from wassdp.core_dist import (
    Dataset,
    DiscreteDistribution,
    FiniteMetric,
    GridDomain,
    d_infinity,
    empirical_distribution,
    hellinger_sq,
    kl,
    quantile,
    restrict,
    sample,
    tv,
)
from wassdp.errors import DomainMismatchError, MetricError, ParameterError

G10 = GridDomain(0, 10, 1)


def bimodal():
    d = GridDomain(0, 999, 1)
    w = np.zeros(d.size)
    w[430], w[440] = 1 / 3, 2 / 3
    return DiscreteDistribution(d, w)


class TestGridDomain:
    def test_points_and_size(self):
        d = GridDomain(-1, 1, 0.5)
        assert d.size == 5
        np.testing.assert_allclose(d.points, [-1, -0.5, 0, 0.5, 1])

    def test_near_integer_ratio_accepted(self):
        assert GridDomain(0, 0.3, 0.1).size == 4

    @pytest.mark.parametrize("a,b,g", [(1, 1, 1), (2, 1, 1), (0, 1, 0), (0, 1, 0.3)])
    def test_invalid(self, a, b, g):
        with pytest.raises(ParameterError):
            GridDomain(a, b, g)

    def test_index_of(self):
        np.testing.assert_array_equal(G10.index_of([0, 3, 10]), [0, 3, 10])
        with pytest.raises(DomainMismatchError):
            G10.index_of([2.5])
        assert G10.index_of([2.4], snap=True)[0] == 2
        with pytest.raises(DomainMismatchError):
            G10.index_of([11])


class TestFiniteMetric:
    def test_rejects_triangle_violation(self):
        d = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
        with pytest.raises(MetricError):
            FiniteMetric(d)

    @pytest.mark.parametrize(
        "d", [[[0, 1], [2, 0]], [[1, 1], [1, 0]], [[0, -1], [-1, 0]], [[0, np.inf], [np.inf, 0]]]
    )
    def test_rejects_non_metric(self, d):
        with pytest.raises(MetricError):
            FiniteMetric(d)

    def test_fingerprint_stable(self):
        m1 = FiniteMetric([[0, 2], [2, 0]])
        m2 = FiniteMetric([[0, 2], [2, 0]])
        assert m1.metric_id == m2.metric_id
        assert m1.metric_id != FiniteMetric([[0, 3], [3, 0]]).metric_id


class TestDistribution:
    def test_normalization_tolerance(self):
        DiscreteDistribution(GridDomain(0, 1, 1), [0.5, 0.5 + 5e-10])
        with pytest.raises(ParameterError):
            DiscreteDistribution(GridDomain(0, 1, 1), [0.5, 0.6])
        with pytest.raises(ParameterError):
            DiscreteDistribution(GridDomain(0, 2, 1), [1.1, -0.1, 0.0])

    def test_weights_read_only(self):
        P = DiscreteDistribution.uniform(G10)
        with pytest.raises(ValueError):
            P.weights[0] = 1

    def test_cdf_matches_pointwise(self):
        P = DiscreteDistribution(GridDomain(0, 3, 1), [0.1, 0.2, 0.3, 0.4])
        expected = [cdf_pointwise(P.domain.points, P.weights, t) for t in P.domain.points]
        np.testing.assert_allclose(P.cdf(), expected, atol=1e-15)
        assert P.cdf()[-1] == 1.0


class TestEmpirical:
    def test_repeated_value(self):
        P = empirical_distribution(Dataset.from_values([5, 5, 5], G10))
        assert P.allclose(DiscreteDistribution.point_mass(G10, 5))

    def test_two_endpoints(self):
        P = empirical_distribution(Dataset.from_values([0, 10], G10))
        assert P.weights[0] == 0.5 and P.weights[10] == 0.5

    def test_off_grid(self):
        with pytest.raises(DomainMismatchError):
            Dataset.from_values([0.5], G10)

    def test_empty(self):
        with pytest.raises(ParameterError):
            Dataset.from_values([], G10)

    def test_bimodal_draws(self):
        P = bimodal()
        E = empirical_distribution(sample(P, 1600, np.random.default_rng(0)))
        assert abs(E.weights[430] - 1 / 3) < 0.05
        assert abs(E.weights[440] - 2 / 3) < 0.05
        assert E.weights[430] + E.weights[440] == 1.0

    @given(st.lists(st.integers(0, 10), min_size=1, max_size=200))
    def test_sums_to_one(self, values):
        E = empirical_distribution(Dataset.from_values(values, G10))
        assert math.isclose(E.weights.sum(), 1.0, abs_tol=1e-12)
        np.testing.assert_array_equal(E.weights * len(values), np.bincount(values, minlength=11))


class TestQuantile:
    def test_uniform_median(self):
        assert quantile(DiscreteDistribution.uniform(GridDomain(1, 10, 1)), 0.5) == 5

    @pytest.mark.parametrize("alpha", [0.01, 0.5, 1.0])
    def test_point_mass(self, alpha):
        assert quantile(DiscreteDistribution.point_mass(G10, 7), alpha) == 7

    def test_bimodal(self):
        assert quantile(bimodal(), 0.3) == 430

    @pytest.mark.parametrize("alpha", [0, -0.1, 1.5])
    def test_invalid_level(self, alpha):
        with pytest.raises(ParameterError):
            quantile(DiscreteDistribution.uniform(G10), alpha)

    @given(grid_distributions(), st.floats(1e-6, 1), st.floats(1e-6, 1))
    def test_monotone(self, P, a1, a2):
        lo, hi = sorted((a1, a2))
        assert quantile(P, lo) <= quantile(P, hi)

    @given(grid_distributions(), st.floats(1e-6, 1))
    def test_is_first_crossing(self, P, alpha):
        q = quantile(P, alpha)
        pts, w = P.domain.points, P.weights
        assert cdf_pointwise(pts, w, q) >= alpha - 1e-9
        below = pts[pts < q]
        if below.size:
            assert cdf_pointwise(pts, w, below[-1]) < alpha + 1e-9


class TestRestrict:
    def test_full_range_unchanged(self):
        P = DiscreteDistribution(GridDomain(0, 3, 1), [0.1, 0.2, 0.3, 0.4])
        assert restrict(P, 0, 3).allclose(P)

    def test_point_mass_inside(self):
        P = DiscreteDistribution.point_mass(G10, 5)
        assert restrict(P, 3, 8).allclose(P)

    def test_uniform_pointwise(self):
        # atom at u is F(2) = 0.3, atom at v is 1 - F(6) = 0.3
        d = GridDomain(0, 9, 1)
        R = restrict(DiscreteDistribution.uniform(d), 2, 7)
        expected = [0, 0, 0.3, 0.1, 0.1, 0.1, 0.1, 0.3, 0, 0]
        np.testing.assert_allclose(R.weights, expected, atol=1e-12)

    def test_reversed(self):
        with pytest.raises(ParameterError):
            restrict(DiscreteDistribution.uniform(G10), 7, 2)

    @given(grid_distributions(), st.data())
    def test_matches_definition(self, P, data):
        m = P.domain.size
        i = data.draw(st.integers(0, m - 1))
        j = data.draw(st.integers(i, m - 1))
        u, v = P.domain.points[i], P.domain.points[j]
        expected = restrict_pointwise(P.domain.points, P.weights, u, v)
        np.testing.assert_allclose(restrict(P, u, v).weights, expected, atol=1e-9)

    @given(grid_distributions(), st.data())
    def test_idempotent(self, P, data):
        m = P.domain.size
        i = data.draw(st.integers(0, m - 1))
        j = data.draw(st.integers(i, m - 1))
        u, v = P.domain.points[i], P.domain.points[j]
        once = restrict(P, u, v)
        assert restrict(once, u, v).allclose(once)


class TestDivergences:
    D2 = GridDomain(0, 1, 1)

    def test_identical(self):
        P = DiscreteDistribution.uniform(G10)
        assert d_infinity(P, P) == tv(P, P) == kl(P, P) == hellinger_sq(P, P) == 0

    def test_d_infinity_ln2(self):
        P = DiscreteDistribution(self.D2, [1 / 3, 2 / 3])
        Q = DiscreteDistribution(self.D2, [2 / 3, 1 / 3])
        assert math.isclose(d_infinity(P, Q), math.log(2))

    def test_d_infinity_support_mismatch(self):
        P = DiscreteDistribution(self.D2, [1, 0])
        Q = DiscreteDistribution(self.D2, [0.5, 0.5])
        assert d_infinity(P, Q) == math.inf

    def test_disjoint(self):
        P = DiscreteDistribution(self.D2, [1, 0])
        Q = DiscreteDistribution(self.D2, [0, 1])
        assert tv(P, Q) == 1
        assert hellinger_sq(P, Q) == 1
        assert kl(P, Q) == math.inf

    def test_domain_mismatch(self):
        with pytest.raises(DomainMismatchError):
            tv(DiscreteDistribution.uniform(self.D2), DiscreteDistribution.uniform(G10))

    @given(distribution_pairs())
    def test_hellinger_bounds(self, pair):
        P, Q = pair
        h = hellinger_sq(P, Q)
        assert h <= tv(P, Q) + 1e-12
        assert h <= kl(P, Q) + 1e-12
