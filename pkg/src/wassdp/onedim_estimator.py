"""Quantile-based private density estimation on a grid, plus 1-D rate calculators."""

import math
import warnings

import numpy as np

from wassdp.core_dist import (
    DiscreteDistribution,
    GridDomain,
    _require_ordered,
    empirical_distribution,
    quantile_index,
    restrict_indices,
    sample,
)
from wassdp.dp_primitives import check_epsilon, private_quantiles
from wassdp.errors import DomainMismatchError, ParameterError
from wassdp.wasserstein import w1_cdf


class SmallSampleWarning(UserWarning):
    pass


def _check_beta(beta):
    if not 0 < beta < 1:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")


def _grid_ratio(domain):
    return (domain.b - domain.a) / domain.gamma


def cdf_error_bound(n, eps, domain, beta, C=1.0):
    """C * ln^3((b-a)/(beta*gamma)) / (eps*n): the quantile-error scale."""
    if math.isinf(eps):
        return 0.0
    return C * math.log(_grid_ratio(domain) / beta) ** 3 / (eps * n)


def choose_k(n, eps, domain, beta, c3=1.0, c2=1.0):
    """Number of quantiles to release.

    k = ceil(eps*n / (4*c3*ln^3((b-a)/(beta*gamma)) * ln(n/beta))), at least 1.
    Warns when n is below c2*ln^4((b-a)/(beta*gamma*eps))/eps, where the
    accuracy guarantee no longer applies. An infinite eps returns n.
    """
    check_epsilon(eps)
    _check_beta(beta)
    if n < 1:
        raise ParameterError("n must be at least 1")
    if math.isinf(eps):
        return int(n)
    ratio = _grid_ratio(domain)
    denom = 4 * c3 * math.log(ratio / beta) ** 3 * math.log(n / beta)
    k = max(1, math.ceil(eps * n / denom))
    threshold = c2 * math.log(ratio / (beta * eps)) ** 4 / eps
    if n <= threshold:
        warnings.warn(
            f"n={n} is below the sample-size threshold {threshold:.3g}; "
            "quantile accuracy is not guaranteed",
            SmallSampleWarning,
            stacklevel=2,
        )
    return k


def quantile_levels(k):
    return (2 * np.arange(1, k + 1) - 1) / (2 * k)


def estimate_1d(data, eps, domain, beta, rng, k_override=None, ledger=None, c3=1.0, c2=1.0):
    """Private estimate of the data distribution: mass 1/k at k private quantiles."""
    if not isinstance(domain, GridDomain):
        raise DomainMismatchError("estimate_1d needs a grid domain")
    _check_beta(beta)
    if k_override is not None:
        if int(k_override) != k_override or k_override < 1:
            raise ParameterError("k must be a positive integer")
        k = int(k_override)
    else:
        k = choose_k(data.n, eps, domain, beta, c3=c3, c2=c2)
    q = private_quantiles(data, domain, eps, quantile_levels(k), rng, ledger=ledger)
    idx = domain.index_of(q)
    w = np.bincount(idx, minlength=domain.size) / k
    return DiscreteDistribution(domain, w)


def psmm_baseline(data, K):
    """Non-private fixed-bucket baseline.

    [a, b] is cut into K equal intervals. Grid point i falls in bucket
    floor(i*K/(m-1)) (the last point joins the last bucket), and each bucket's
    empirical mass goes to its leftmost grid point.
    """
    domain = data.domain
    if not isinstance(domain, GridDomain):
        raise DomainMismatchError("psmm_baseline needs a grid domain")
    if int(K) != K or K < 1:
        raise ParameterError("K must be a positive integer")
    m = domain.size
    bucket = np.minimum((np.arange(m) * int(K)) // (m - 1), int(K) - 1)
    _, first = np.unique(bucket, return_index=True)
    left = np.zeros(int(K), dtype=np.int64)
    left[bucket[first]] = first
    target = left[bucket[data.indices]]
    w = np.bincount(target, minlength=m) / data.n
    return DiscreteDistribution(domain, w)


def _rate_quantile_indices(P, n, eps, C):
    if not C > 0:
        raise ParameterError("C must be positive")
    check_epsilon(eps)
    if math.isinf(eps):
        return 0.0, 0, P.domain.size - 1
    p = 1.0 / (C * eps * n)
    if p >= 0.5:
        raise ParameterError(
            f"1/(C*eps*n) = {p:.3g} >= 1/2: the quantiles of the rate are degenerate"
        )
    return p, quantile_index(P, p), quantile_index(P, 1.0 - p)


def target_rate_1d(P, n, eps, C=1.0, trials=20, rng=None):
    """The three terms of the 1-D target estimation rate.

    interquantile_term  p * (q_{1-p} - q_p) with p = 1/(C*eps*n)
    tail_term           W(P, P restricted to [q_p, q_{1-p}])
    empirical_term      Monte-Carlo mean of W between the restrictions of P and
                        of an n-sample empirical distribution, over sqrt(ln n)
    """
    _require_ordered(P)
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    if rng is None:
        rng = np.random.default_rng(0)
    p, iu, iv = _rate_quantile_indices(P, n, eps, C)
    x = P.domain.points
    restricted = restrict_indices(P, iu, iv)
    errs = []
    for _ in range(trials):
        emp = empirical_distribution(sample(P, n, rng))
        errs.append(w1_cdf(restricted, restrict_indices(emp, iu, iv)))
    scale = math.sqrt(math.log(n)) if n > 1 else 1.0
    return {
        "interquantile_term": float(p * (x[iv] - x[iu])),
        "tail_term": w1_cdf(P, restricted),
        "empirical_term": float(np.mean(errs) / scale),
    }


def bobkov_ledoux_terms(P, n):
    """(A_n, B_n) on the grid, with F constant on each cell [x_i, x_{i+1})."""
    _require_ordered(P)
    f = P.cdf()[:-1]
    v = f * (1.0 - f)
    gamma = P.domain.gamma
    cut = 1.0 / (4 * n)
    a_n = 2.0 * np.sum(v[v <= cut]) * gamma
    b_n = np.sum(np.sqrt(v[v >= cut])) * gamma / math.sqrt(n)
    return float(a_n), float(b_n)


def bobkov_ledoux_rate(P, n):
    a_n, b_n = bobkov_ledoux_terms(P, n)
    return a_n + b_n
