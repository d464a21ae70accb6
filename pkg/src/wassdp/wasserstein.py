"""1-Wasserstein evaluators.

w1_cdf    area between CDFs on a grid.
w1_tree   closed form on a hierarchically separated tree.
w1_exact  exact transportation LP, used as the ground-truth oracle.
"""

import numpy as np

from wassdp.core_dist import _require_ordered, _require_same_domain
from wassdp.errors import DomainMismatchError, SizeError

MAX_EXACT_PAIRS = 10**4
_FLOW_TOL = 1e-14


def w1_cdf(P, Q):
    _require_same_domain(P, Q)
    _require_ordered(P)
    gap = np.abs(P.cdf() - Q.cdf())[:-1]
    return float(gap.sum() * P.domain.gamma)


def w1_tree(GP, GQ):
    """sum over non-root nodes of r_node * |GP(node) - GQ(node)|.

    Works for arbitrary node functions, in which case it is the weighted
    l1 distance between them. For distribution-induced functions it is the
    Wasserstein distance under the tree metric.
    """
    if GP.hst is not GQ.hst and GP.hst.key != GQ.hst.key:
        raise DomainMismatchError("node functions live on different trees")
    diff = np.abs(np.asarray(GP.values) - np.asarray(GQ.values))
    return float(np.dot(GP.hst.node_weight, diff))


def w1_exact(P, Q):
    """Optimal transport cost between P and Q under the domain's distances."""
    _require_same_domain(P, Q)
    sp, sq = P.support, Q.support
    if sp.size * sq.size > MAX_EXACT_PAIRS:
        raise SizeError(
            f"exact transport on {sp.size}x{sq.size} supports exceeds {MAX_EXACT_PAIRS} pairs"
        )
    cost = np.asarray(P.domain.distances(sp, sq), dtype=float)
    plan = transport_plan(P.weights[sp], Q.weights[sq], cost)
    return float(np.sum(plan * cost))


def transport_plan(a, b, cost):
    """Exact transportation plan by successive shortest paths.

    Sources carry supplies `a`, sinks demands `b`, every source-sink arc is
    uncapacitated with cost cost[i, j]. Dijkstra runs on reduced costs, so
    each augmentation follows a cheapest residual path.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cost = np.asarray(cost, dtype=float)
    m, k = cost.shape
    flow = np.zeros((m, k))
    supply = a.copy()
    demand = b.copy()
    pot_s = np.zeros(m)
    pot_t = np.zeros(k)

    while np.any(supply > _FLOW_TOL) and np.any(demand > _FLOW_TOL):
        dist_s = np.where(supply > _FLOW_TOL, 0.0, np.inf)
        dist_t = np.full(k, np.inf)
        prev_t = np.full(k, -1)
        prev_s = np.full(m, -1)
        done_s = np.zeros(m, dtype=bool)
        done_t = np.zeros(k, dtype=bool)
        target = -1
        while True:
            cand_s = np.where(done_s, np.inf, dist_s)
            cand_t = np.where(done_t, np.inf, dist_t)
            i = int(np.argmin(cand_s))
            j = int(np.argmin(cand_t))
            if cand_s[i] == np.inf and cand_t[j] == np.inf:
                break
            if cand_s[i] <= cand_t[j]:
                done_s[i] = True
                reduced = np.maximum(cost[i] + pot_s[i] - pot_t, 0.0)
                nd = dist_s[i] + reduced
                better = (nd < dist_t) & ~done_t
                dist_t[better] = nd[better]
                prev_t[better] = i
            else:
                done_t[j] = True
                if demand[j] > _FLOW_TOL:
                    target = j
                    break
                back = flow[:, j] > _FLOW_TOL
                reduced = np.maximum(-cost[:, j] + pot_t[j] - pot_s, 0.0)
                nd = dist_t[j] + reduced
                better = back & (nd < dist_s) & ~done_s
                dist_s[better] = nd[better]
                prev_s[better] = j
        if target < 0:
            break

        cap = dist_t[target]
        pot_s += np.minimum(dist_s, cap)
        pot_t += np.minimum(dist_t, cap)

        # Walk back to find the path and its bottleneck.
        path = []
        j = target
        bottleneck = demand[target]
        while True:
            i = int(prev_t[j])
            path.append((i, j))
            if prev_s[i] < 0:
                bottleneck = min(bottleneck, supply[i])
                start = i
                break
            j = int(prev_s[i])
            bottleneck = min(bottleneck, flow[i, j])
        for i, j in path:
            flow[i, j] += bottleneck
        # Step s and step s+1 share the arc (source of s, sink of s+1), used backwards.
        for step in range(len(path) - 1):
            i = path[step][0]
            j_back = path[step + 1][1]
            flow[i, j_back] -= bottleneck
            if flow[i, j_back] < _FLOW_TOL:
                flow[i, j_back] = 0.0
        supply[start] -= bottleneck
        demand[target] -= bottleneck
    return flow
