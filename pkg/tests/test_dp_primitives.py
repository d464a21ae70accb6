import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import empirical_quantile, lambert_w_bisect

from wassdp.core_dist import Dataset, DiscreteDistribution, GridDomain, empirical_distribution
from wassdp.dp_primitives import (
    PrivacyLedger,
    PrivacyParams,
    kappa,
    lambert_w,
    laplace_noise,
    make_rng,
    private_cdf,
    private_quantiles,
    resolve_seed,
    split_rngs,
)
from wassdp.errors import DomainMismatchError, ParameterError

D100 = GridDomain(1, 100, 1)


class TestLaplace:
    def test_mean_and_tail(self):
        s = 2.0
        x = laplace_noise(s, np.random.default_rng(0), size=10**6)
        assert abs(x.mean()) <= 5 * s / 1e3
        # Pr(|X| > t) = exp(-t/s), so the two-sided tail at s ln(2/0.05) is 0.025
        tail = np.mean(np.abs(x) > s * math.log(2 / 0.05))
        assert abs(tail - 0.025) <= 0.01
        assert abs(np.mean(np.abs(x) > s * math.log(1 / 0.05)) - 0.05) <= 0.01

    def test_deterministic(self):
        a = laplace_noise(1.0, make_rng(5), size=100)
        b = laplace_noise(1.0, make_rng(5), size=100)
        assert a.tobytes() == b.tobytes()

    @pytest.mark.parametrize("s", [0, -1, math.inf])
    def test_bad_scale(self, s):
        with pytest.raises(ParameterError):
            laplace_noise(s, np.random.default_rng(0))

    def test_dp_ratio_counting_query(self):
        # Laplace mechanism on a count: neighbours differ by one
        eps = 1.0
        r1, r2 = np.random.default_rng(1), np.random.default_rng(2)
        a = np.floor(10 + laplace_noise(1 / eps, r1, size=200_000))
        b = np.floor(11 + laplace_noise(1 / eps, r2, size=200_000))
        bins = np.arange(0, 25)
        ha, _ = np.histogram(a, bins)
        hb, _ = np.histogram(b, bins)
        keep = (ha >= 1000) & (hb >= 1000)
        assert keep.sum() >= 5
        ratio = np.maximum(ha[keep] / hb[keep], hb[keep] / ha[keep])
        assert ratio.max() <= math.exp(eps) * 1.1


class TestSeeds:
    def test_resolution_order(self, monkeypatch):
        assert resolve_seed(None) == 0
        monkeypatch.setenv("WASSDP_SEED", "17")
        assert resolve_seed(None) == 17
        assert resolve_seed(3) == 3

    def test_bad_env(self, monkeypatch):
        monkeypatch.setenv("WASSDP_SEED", "abc")
        with pytest.raises(ParameterError):
            resolve_seed(None)

    def test_split_independent_and_stable(self):
        a = [r.random() for r in split_rngs(4, 3)]
        b = [r.random() for r in split_rngs(4, 3)]
        assert a == b and len(set(a)) == 3


class TestLedger:
    def test_totals(self):
        led = PrivacyLedger()
        for _ in range(10):
            led.record("x", 0.1)
        assert led.total_epsilon == 1.0
        led.record("y", math.inf)
        assert led.total_epsilon == math.inf
        assert led.to_json()["total_epsilon"] == "inf"

    def test_params(self):
        with pytest.raises(ParameterError):
            PrivacyParams(0)
        with pytest.raises(ParameterError):
            PrivacyParams(1, 1.5)


class TestPrivateCdf:
    def data(self, rng, n=500):
        return Dataset(D100, rng.integers(0, 100, n))

    def test_infinite_eps_is_exact(self, rng):
        data = self.data(rng)
        G = private_cdf(data, D100, math.inf, rng)
        np.testing.assert_array_equal(G, empirical_distribution(data).cdf())

    @pytest.mark.parametrize("eps", [0.1, 1.0, 3.0])
    def test_ledger_total_is_eps(self, rng, eps):
        led = PrivacyLedger()
        private_cdf(self.data(rng), D100, eps, rng, ledger=led)
        assert led.total_epsilon == eps
        assert len(led.entries) == 7

    def test_projected_is_monotone(self, rng):
        G = private_cdf(self.data(rng, n=20), D100, 0.5, rng)
        assert np.all(np.diff(G) >= 0)
        assert G[-1] == 1.0 and G.min() >= 0

    def test_raw_prefix_sums_unbiased(self):
        # Averaging many raw releases recovers the empirical CDF.
        rng = np.random.default_rng(9)
        data = self.data(rng, n=300)
        runs = np.mean(
            [private_cdf(data, D100, 1.0, rng, project=False) for _ in range(3000)], axis=0
        )
        np.testing.assert_allclose(runs, empirical_distribution(data).cdf(), atol=0.01)

    def test_power_of_two_domain(self, rng):
        d = GridDomain(0, 15, 1)
        data = Dataset(d, rng.integers(0, 16, 50))
        G = private_cdf(data, d, math.inf, rng)
        assert G[-1] == 1.0

    def test_domain_mismatch(self, rng):
        with pytest.raises(DomainMismatchError):
            private_cdf(self.data(rng), GridDomain(0, 99, 1), 1.0, rng)

    def test_bad_eps(self, rng):
        with pytest.raises(ParameterError):
            private_cdf(self.data(rng), D100, 0.0, rng)


class TestPrivateQuantiles:
    def test_median_exact(self, rng):
        data = Dataset.from_values(np.arange(1, 101), D100)
        assert private_quantiles(data, D100, math.inf, [0.5], rng)[0] == 50

    def test_all_equal(self, rng):
        data = Dataset.from_values([37] * 200, D100)
        q = private_quantiles(data, D100, math.inf, [0.1, 0.5, 0.9], rng)
        assert np.all(q == 37)

    def test_empty(self, rng):
        data = Dataset.from_values([3], D100)
        assert private_quantiles(data, D100, 1.0, [], rng).size == 0

    @given(st.lists(st.integers(1, 100), min_size=1, max_size=300), st.floats(0.01, 1.0))
    def test_noiseless_matches_oracle(self, values, alpha):
        data = Dataset.from_values(values, D100)
        q = private_quantiles(data, D100, math.inf, [alpha], np.random.default_rng(0))[0]
        assert q == empirical_quantile(values, alpha)


class TestLambertW:
    @pytest.mark.parametrize("x,w", [(0, 0), (math.e, 1), (2 * math.e**2, 2)])
    def test_known_values(self, x, w):
        assert lambert_w(x) == pytest.approx(w, rel=1e-12, abs=1e-15)

    def test_against_bisection(self):
        xs = np.logspace(-8, 8, 10**4)
        for x in xs:
            w = lambert_w(float(x))
            assert w * math.exp(w) == pytest.approx(x, rel=1e-12)
        for x in xs[::97]:
            assert lambert_w(float(x)) == pytest.approx(lambert_w_bisect(float(x)), rel=1e-12)

    def test_infinity_and_branch(self):
        assert lambert_w(math.inf) == math.inf
        with pytest.raises(ParameterError):
            lambert_w(-0.1)


class TestKappa:
    def test_pure_dp(self):
        assert kappa(1, 0, 100) == pytest.approx(6e-4, rel=1e-12)

    def test_approx_dp(self):
        assert kappa(1, 0.45 / math.e, 1) == pytest.approx(0.06, rel=1e-12)

    def test_small_w_branch(self):
        # 0.45 * eps / delta = e  ->  W = 1, still above the 0.6 cap
        assert kappa(2, 0.9 / math.e, 1) == pytest.approx(0.6 / 20)
        # W(0.45/0.9) = W(0.5) < 0.6
        assert kappa(1, 0.9, 1) == pytest.approx(lambert_w_bisect(0.5) / 10, rel=1e-12)

    @given(st.floats(0.01, 10), st.floats(0, 1), st.integers(1, 10**6))
    def test_scales_as_one_over_n(self, eps, delta, n):
        assert kappa(eps, delta, 2 * n) == pytest.approx(kappa(eps, delta, n) / 2, rel=1e-12)

    def test_infinite_eps(self):
        assert kappa(math.inf, 0, 10) == 0
