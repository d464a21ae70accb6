"""Hard neighbouring distributions and nets used to probe the estimators.

Both 1-D constructions reweight P in mass coordinates. A factor g(u) is
chosen for every CDF level u in (0, 1], and each atom x receives the
integral of g over (F(x-), F(x)]. Atoms straddling a quantile boundary
therefore split their mass between the two factors, the construction stays
balanced on any grid, and every ratio Q(x)/P(x) is an average of factors in
[1/2, 3/2].
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from wassdp.core_dist import (
    DiscreteDistribution,
    _require_ordered,
    d_infinity,
    quantile_index,
    sample,
)
from wassdp.errors import ParameterError

LN2_TOL = 1e-12


@dataclass(frozen=True)
class Neighbor:
    distribution: DiscreteDistribution
    degenerate: bool = False


@dataclass(frozen=True)
class Net:
    distributions: list
    corners: np.ndarray
    pairs: np.ndarray
    degenerate: bool = False


def reweight_by_mass(P, breaks, factors):
    """Q(x) = integral of g over (F(x-), F(x)], g = factors[j] on (breaks[j], breaks[j+1]]."""
    _require_ordered(P)
    breaks = np.asarray(breaks, dtype=float)
    factors = np.asarray(factors, dtype=float)
    if breaks[0] != 0.0 or breaks[-1] != 1.0 or np.any(np.diff(breaks) < 0):
        raise ParameterError("breaks must run from 0 to 1 in order")
    if factors.size != breaks.size - 1:
        raise ParameterError("need one factor per band")
    knots = np.concatenate([[0.0], np.cumsum(factors * np.diff(breaks))])
    f = P.cdf()
    f_prev = np.concatenate([[0.0], f[:-1]])
    width = f - f_prev
    lo, hi = float(factors.min()), float(factors.max())
    # Average factor per atom, clipped so that rounding cannot leave [lo, hi].
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (np.interp(f, breaks, knots) - np.interp(f_prev, breaks, knots)) / width
    band = np.clip(np.searchsorted(breaks, f, side="left") - 1, 0, factors.size - 1)
    ratio = np.where(width > 0, ratio, factors[band])
    ratio = np.clip(ratio, lo, hi)
    w = P.weights
    q = np.where(w > 0, w * ratio, 0.0)
    # Rounding residue goes to atoms with room on both sides.
    slack = (w > 0) & (ratio > lo + 1e-6) & (ratio < hi - 1e-6)
    residue = 1.0 - math.fsum(q)
    if slack.any():
        q[slack] += residue * w[slack] / math.fsum(w[slack])
    else:
        q = q / math.fsum(q)
    return DiscreteDistribution(P.domain, q)


def _assert_neighborhood(P, Q):
    d = d_infinity(P, Q)
    assert d <= math.log(2) + LN2_TOL, f"neighbour left the ln 2 ball (D_inf = {d})"


def hard_privacy_neighbor_1d(P, k):
    """Halve the mass below q_{1/k} and add it, scaled by 3/2, from q_{1-1/k} on."""
    _require_ordered(P)
    if int(k) != k or k < 2:
        raise ParameterError("k must be an integer >= 2")
    lo = quantile_index(P, 1.0 / k)
    hi = quantile_index(P, 1.0 - 1.0 / k)
    if lo == hi:
        return Neighbor(P, degenerate=True)
    edge = 1.0 / k
    Q = reweight_by_mass(P, [0.0, edge, 1.0 - edge, 1.0], [0.5, 1.0, 1.5])
    _assert_neighborhood(P, Q)
    return Neighbor(Q)


def empirical_neighbor_bands(n, max_level=60):
    """Break points and factors in mass coordinates.

    Band i >= 2 is (2^-i, 2^-(i-1)] on the left and its mirror on the right,
    with factors 1 + s_i and 1 - s_i. s_i = sqrt(2^i/n) is capped at 1/2 so
    that the ratio to P never leaves [1/2, 3/2]; for 2^i >= n it is 1/2.
    The innermost bands near 0 and 1 keep the i >= log n factors.
    """
    if n < 4:
        raise ParameterError("n must be at least 4")
    log_n = math.log2(n)
    s = []
    for i in range(2, max_level + 1):
        s.append(0.5 if i >= log_n else min(math.sqrt(2.0**i / n), 0.5))
    left_breaks = [0.0] + [2.0**-i for i in range(max_level, 1, -1)]
    left_factors = [1.5] + [1.0 + s[i - 2] for i in range(max_level, 1, -1)]
    right_breaks = [1.0 - 2.0**-i for i in range(2, max_level + 1)] + [1.0]
    right_factors = [1.0 - s[i - 2] for i in range(2, max_level + 1)] + [0.5]
    breaks = left_breaks + [0.5] + right_breaks
    factors = left_factors + right_factors
    return np.array(breaks), np.array(factors)


def hard_empirical_neighbor_1d(P, n):
    """Push mass of order sqrt(2^i/n) * 2^-i from the upper to the lower 2^-i tails."""
    _require_ordered(P)
    breaks, factors = empirical_neighbor_bands(n)
    Q = reweight_by_mass(P, breaks, factors)
    _assert_neighborhood(P, Q)
    return Neighbor(Q)


def scale_partition(P):
    """Map s -> indices x with P(x) in (2^(-s-1), 2^-s]."""
    out = {}
    for x in np.flatnonzero(P.weights > 0):
        mant, exp = math.frexp(float(P.weights[x]))
        s = 1 - exp if mant == 0.5 else -exp
        out.setdefault(s, []).append(int(x))
    return {s: np.array(v, dtype=np.int64) for s, v in sorted(out.items())}


def assouad_net_discrete(P, perturbation, pairing_seed, n_corners=64, alpha=0.0, corners=None):
    """Hypercube of perturbations of P over random pairs of active atoms.

    Atoms with mass above `alpha` are paired at random. Corner u moves
    u_j * perturbation from the second atom of pair j to the first. Two corners
    differing in h coordinates are at total variation 2 * h * perturbation.
    All 2^k corners are returned when that is at most n_corners; otherwise
    n_corners random ones are drawn unless `corners` is given.
    """
    rng = np.random.default_rng(pairing_seed)
    active = np.flatnonzero(P.weights > alpha)
    if active.size < 2:
        return Net([], np.zeros((0, 0), dtype=np.int64), np.zeros((0, 2), dtype=np.int64), True)
    perm = rng.permutation(active)
    k = perm.size // 2
    pairs = perm[: 2 * k].reshape(k, 2)
    if not perturbation > 0:
        raise ParameterError("perturbation must be positive")
    limit = 0.5 * float(P.weights[pairs].min())
    if perturbation > limit * (1 + 1e-12):
        raise ParameterError(
            f"perturbation {perturbation} exceeds half the smallest paired mass ({limit})"
        )
    if corners is None:
        if k <= 20 and 2**k <= n_corners:
            grid = (np.arange(2**k)[:, None] >> np.arange(k)[None, :]) & 1
            corners = 2 * grid - 1
        else:
            corners = rng.choice([-1, 1], size=(n_corners, k))
    corners = np.asarray(corners, dtype=np.int64)
    if corners.ndim != 2 or corners.shape[1] != k or np.any(np.abs(corners) != 1):
        raise ParameterError(f"corners must be +-1 vectors of length {k}")
    dists = []
    for u in corners:
        w = np.array(P.weights)
        w[pairs[:, 0]] += u * perturbation
        w[pairs[:, 1]] -= u * perturbation
        Q = DiscreteDistribution(P.domain, w)
        _assert_neighborhood(P, Q)
        dists.append(Q)
    return Net(dists, corners, pairs)


def _regret_trial(args):
    P, estimator, n, eps, beta, k_override, K, hst, delta, seed = args
    from wassdp.hst import node_function
    from wassdp.onedim_estimator import estimate_1d, psmm_baseline
    from wassdp.tree_estimator import priv_density_est_tree
    from wassdp.wasserstein import w1_cdf, w1_tree

    rng = np.random.default_rng(seed)
    data = sample(P, n, rng)
    if estimator == "1d":
        est = estimate_1d(data, eps, P.domain, beta, rng, k_override=k_override)
        return w1_cdf(P, est)
    if estimator == "psmm":
        return w1_cdf(P, psmm_baseline(data, K))
    est, _ = priv_density_est_tree(data, hst, eps, beta, rng, delta=delta)
    return w1_tree(node_function(P, hst), node_function(est, hst))


def map_trials(fn, jobs_args, jobs=1):
    """Apply fn to every argument tuple, in order, optionally in worker processes."""
    if jobs <= 1:
        return [fn(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, jobs_args))


def regret_report(
    P,
    estimator,
    n,
    eps,
    trials,
    rng,
    beta=0.05,
    k_override=None,
    K=40,
    hst=None,
    C=1.0,
    delta=0.0,
    jobs=1,
):
    """Median W1 error of an estimator against the matching target rate."""
    from wassdp.onedim_estimator import target_rate_1d
    from wassdp.tree_estimator import target_rate_tree

    if estimator not in ("1d", "psmm", "tree"):
        raise ParameterError(f"unknown estimator {estimator!r}")
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    if estimator == "tree" and hst is None:
        raise ParameterError("the tree estimator needs an HST")
    seeds = np.random.SeedSequence(int(rng.integers(2**63))).spawn(trials)
    args = [(P, estimator, n, eps, beta, k_override, K, hst, delta, s) for s in seeds]
    errors = map_trials(_regret_trial, args, jobs)
    if estimator == "tree":
        target = target_rate_tree(P, hst, n, eps, delta)["max"]
    else:
        terms = target_rate_1d(P, n, eps, C=C, trials=max(1, min(trials, 20)), rng=rng)
        target = math.fsum(terms.values())
    median = float(np.median(errors))
    if median == 0:
        ratio = 0.0
    elif target == 0:
        ratio = math.inf
    else:
        ratio = median / target
    return {
        "estimator": estimator,
        "n": int(n),
        "eps": eps,
        "trials": int(trials),
        "measured_error_median": median,
        "target_rate": float(target),
        "ratio": ratio,
        "errors": [float(e) for e in errors],
    }
