"""Private density estimation on an HST and the discrete/tree target rates.

Pipeline: truncated empirical node masses -> private search for active
nodes -> Laplace noise on the active ones -> projection back onto the set of
distributions.
"""

import math

import numpy as np

from wassdp.core_dist import DiscreteDistribution, same_domain
from wassdp.dp_primitives import PrivacyLedger, check_epsilon, kappa, laplace_noise
from wassdp.errors import DomainMismatchError, ParameterError
from wassdp.hst import NodeFunction, aggregate_leaves, node_function


def _check_beta(beta):
    if not 0 < beta < 1:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")


def truncation_threshold(n, beta):
    return 7.0 * math.log(n / beta) / n


def emp_dist_truncated(data, hst, beta):
    """Empirical node masses, snapped to 0 below 7 ln(n/beta)/n and to 1 above 1 minus that."""
    _check_beta(beta)
    if not same_domain(data.domain, hst.domain):
        raise DomainMismatchError("samples are not mapped to this tree's leaves")
    n = data.n
    vals = aggregate_leaves(hst, data.counts() / n)
    tau = truncation_threshold(n, beta)
    vals = np.where(vals < tau, 0.0, vals)
    vals = np.where(vals > 1.0 - tau, 1.0, vals)
    return NodeFunction(hst, vals, n=n)


def _sample_size(G, n):
    n = G.n if n is None else n
    if n is None or n < 1:
        raise ParameterError("node function carries no sample size; pass n")
    return int(n)


def locate_threshold(eps, beta, n, delta=0.0):
    check_epsilon(eps)
    noise_slack = 0.0 if math.isinf(eps) else math.log(2.0 / beta) / (eps * n)
    return 2.0 * kappa(eps, delta, n) + noise_slack


def locate_active_nodes(Ghat, eps, beta, hst, rng, delta=0.0, ledger=None, n=None):
    """Top-down search for nodes whose noisy mass clears 2*kappa + ln(2/beta)/(eps*n).

    Children are only examined when their parent survived. Each level spends
    eps; the root is always kept.
    """
    _check_beta(beta)
    if Ghat.hst is not hst and Ghat.hst.key != hst.key:
        raise DomainMismatchError("node function belongs to another tree")
    n = _sample_size(Ghat, n)
    thresh = locate_threshold(eps, beta, n, delta)
    noisy = not math.isinf(eps)
    keep = np.zeros(hst.n_nodes, dtype=bool)
    keep[0] = True
    for l in range(1, hst.depth + 1):
        if ledger is not None:
            ledger.record(f"locate_active_nodes/level{l}", eps)
        nodes = hst.level_nodes(l)
        cand = nodes[keep[hst.parent[nodes]]]
        if cand.size == 0:
            continue
        vals = Ghat.values[cand]
        if noisy:
            vals = vals + laplace_noise(1.0 / (eps * n), rng, size=cand.size)
        keep[cand[vals > thresh]] = True
    return np.flatnonzero(keep)


def add_noise_active(Ghat, active, eps, rng, ledger=None, n=None):
    """Ghat + Lap(1/(eps*n)) on the active nodes, 0 elsewhere, root set to 1."""
    check_epsilon(eps)
    n = _sample_size(Ghat, n)
    active = np.asarray(sorted(set(int(v) for v in np.ravel(active))), dtype=np.int64)
    if active.size and (active.min() < 0 or active.max() >= Ghat.hst.n_nodes):
        raise ParameterError("active set names nodes outside the tree")
    if ledger is not None:
        ledger.record("add_noise_active", eps)
    vals = np.zeros(Ghat.hst.n_nodes)
    vals[active] = Ghat.values[active]
    if not math.isinf(eps) and active.size:
        vals[active] += laplace_noise(1.0 / (eps * n), rng, size=active.size)
    vals[0] = 1.0
    return NodeFunction(Ghat.hst, vals, n=n)


def projection(G):
    """Turn a node function into a distribution on the leaves, top-down.

    Negative values are clamped to 0. Each node's children are rescaled to
    sum to the node's assigned mass; if they all vanish the mass is split
    evenly among them.
    """
    hst = G.hst
    if not math.isclose(G.values[0], 1.0, abs_tol=1e-12):
        raise ParameterError("projection needs root value 1")
    raw = np.clip(G.values, 0.0, None)
    out = np.zeros(hst.n_nodes)
    out[0] = 1.0
    nchild = hst.n_children
    for l in range(1, hst.depth + 1):
        nodes = hst.level_nodes(l)
        par = hst.parent[nodes]
        sums = np.bincount(par, weights=raw[nodes], minlength=hst.n_nodes)[par]
        even = out[par] / nchild[par]
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = out[par] * raw[nodes] / sums
        out[nodes] = np.where(sums > 0, scaled, even)
    leaf = out[hst.leaf_nodes]
    return DiscreteDistribution(hst.domain, leaf / leaf.sum())


def priv_density_est_tree(data, hst, eps, beta, rng, delta=0.0, ledger=None):
    """Full pipeline. Returns (distribution, ledger); the ledger totals (depth+1)*eps."""
    if ledger is None:
        ledger = PrivacyLedger()
    ghat = emp_dist_truncated(data, hst, beta)
    active = locate_active_nodes(ghat, eps, beta, hst, rng, delta=delta, ledger=ledger)
    noisy = add_noise_active(ghat, active, eps, rng, ledger=ledger)
    return projection(noisy), ledger


def target_rate_discrete(weights, n, eps, delta=0.0):
    """Statistical, inactive and active terms of the discrete target rate.

    A point is active when its mass is strictly above 2*kappa.
    """
    p = np.clip(np.asarray(getattr(weights, "weights", weights), dtype=float), 0.0, 1.0)
    k = kappa(eps, delta, n)
    var = p * (1.0 - p)
    statistical = float(np.sum(np.minimum(var, np.sqrt(var / n))))
    active = p > 2 * k
    inactive = math.fsum(p[~active])
    n_active = int(np.count_nonzero(active))
    return {
        "statistical_term": statistical,
        "inactive_term": inactive,
        "active_term": max(0.0, (n_active - 1) * k),
    }


def target_rate_tree(P, hst, n, eps, delta=0.0):
    """Per-level discrete rates scaled by r_l, with their max and their sum."""
    G = node_function(P, hst)
    levels = []
    for l in range(1, hst.depth + 1):
        terms = target_rate_discrete(G.level_values(l), n, eps, delta)
        r = float(hst.weights[l])
        scaled = {key: r * v for key, v in terms.items()}
        levels.append({"level": l, "r": r, **scaled, "total": math.fsum(scaled.values())})
    totals = [lv["total"] for lv in levels]
    return {
        "levels": levels,
        "max": max(totals, default=0.0),
        "sum": math.fsum(totals),
    }


def tree_upper_rate(P, hst, n, eps, beta, delta=0.0):
    """Shape of the estimator's error guarantee, summed over levels.

    The per-node statistical quantity is min{P, 1-P, sqrt(P ln(n/beta)/n)}.
    """
    G = node_function(P, hst)
    k = kappa(eps, delta, n)
    total = 0.0
    for l in range(1, hst.depth + 1):
        p = np.clip(G.level_values(l), 0.0, 1.0)
        stat = np.minimum(np.minimum(p, 1.0 - p), np.sqrt(p * math.log(n / beta) / n))
        active = p > 2 * k
        n_active = int(np.count_nonzero(active))
        term = stat.sum() + p[~active].sum() + max(0, n_active - 1) * k
        total += hst.weights[l] * term
    return float(total)
