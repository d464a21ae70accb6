"""Hierarchically separated trees and the embeddings that produce them.

Nodes are numbered level by level starting with the root (node 0), so the
nodes of one level form a contiguous block. The edge from a level-l node to
its parent has weight r_l = r_1 * 2**(1 - l).
"""

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from wassdp.core_dist import DiscreteDistribution, FiniteMetric, same_domain
from wassdp.errors import DomainMismatchError, MetricError, ParameterError

__all__ = [
    "CellDomain",
    "FiniteMetric",
    "GridEmbedding",
    "Hst",
    "NodeFunction",
    "active_nodes",
    "binary_hst",
    "build_frt_embedding",
    "embed_grid",
    "node_function",
    "random_hst",
]


class Hst:
    def __init__(self, parent, level, top_weight, leaf_nodes=None, domain=None):
        parent = np.array(parent, dtype=np.int64)
        level = np.array(level, dtype=np.int64)
        n = parent.size
        if n == 0 or level.shape != parent.shape:
            raise ParameterError("parent and level arrays must be non-empty and aligned")
        if parent[0] != -1 or level[0] != 0:
            raise ParameterError("node 0 must be the root")
        if np.any(np.diff(level) < 0):
            raise ParameterError("nodes must be ordered by level")
        if n > 1:
            p = parent[1:]
            if np.any(p < 0) or np.any(p >= n) or np.any(level[p] != level[1:] - 1):
                raise ParameterError("every parent must sit exactly one level up")
        depth = int(level[-1])
        has_child = np.zeros(n, dtype=bool)
        has_child[parent[1:]] = True
        leaves = np.flatnonzero(~has_child)
        if np.any(level[leaves] != depth):
            raise ParameterError("all leaves must sit at the bottom level")
        if leaf_nodes is None:
            leaf_nodes = leaves
        leaf_nodes = np.array(leaf_nodes, dtype=np.int64)
        if leaf_nodes.shape != leaves.shape or not np.array_equal(np.sort(leaf_nodes), leaves):
            raise ParameterError("leaf map must be a bijection onto the leaves")
        if not top_weight > 0:
            raise ParameterError("edge weights must be positive")
        for arr in (parent, level, leaf_nodes):
            arr.flags.writeable = False
        self.parent = parent
        self.level = level
        self.depth = depth
        self.top_weight = float(top_weight)
        self.leaf_nodes = leaf_nodes
        self._domain = domain
        if domain is not None and domain.size != leaf_nodes.size:
            raise DomainMismatchError("domain size differs from the number of leaves")

    @property
    def n_nodes(self):
        return self.parent.size

    @property
    def n_leaves(self):
        return self.leaf_nodes.size

    @cached_property
    def weights(self):
        """r_l for l = 0..depth; r_0 is 0 because the root has no parent edge."""
        r = self.top_weight * 2.0 ** (1 - np.arange(self.depth + 1, dtype=float))
        r[0] = 0.0
        return r

    @cached_property
    def node_weight(self):
        return self.weights[self.level]

    @cached_property
    def level_bounds(self):
        return np.searchsorted(self.level, np.arange(self.depth + 2))

    def level_nodes(self, l):
        lo, hi = self.level_bounds[l], self.level_bounds[l + 1]
        return np.arange(lo, hi)

    @cached_property
    def children(self):
        order = np.argsort(self.parent[1:], kind="stable") + 1
        counts = np.bincount(self.parent[1:], minlength=self.n_nodes)
        starts = np.concatenate([[0], np.cumsum(counts)])
        return [order[starts[v] : starts[v + 1]] for v in range(self.n_nodes)]

    @cached_property
    def n_children(self):
        return np.bincount(self.parent[1:], minlength=self.n_nodes)

    @cached_property
    def lca_distance(self):
        """Tree distance between two leaves whose deepest common ancestor is at level l."""
        r = self.weights
        tail = np.concatenate([np.cumsum(r[::-1])[::-1][1:], [0.0]])
        return 2.0 * tail

    @cached_property
    def ancestors(self):
        """(depth+1) x n_leaves array; row l holds each leaf's level-l ancestor."""
        anc = np.empty((self.depth + 1, self.n_leaves), dtype=np.int64)
        cur = self.leaf_nodes.copy()
        for l in range(self.depth, -1, -1):
            anc[l] = cur
            cur = self.parent[cur]
        return anc

    def tree_distance(self, u, v):
        """Path length between the leaves of domain points u and v."""
        a, b = int(self.leaf_nodes[u]), int(self.leaf_nodes[v])
        while a != b:
            a, b = int(self.parent[a]), int(self.parent[b])
        if u == v:
            return 0.0
        return float(self.lca_distance[self.level[a]])

    def leaf_distances(self, i=None, j=None):
        anc = self.ancestors
        ai = anc if i is None else anc[:, np.atleast_1d(i)]
        aj = anc if j is None else anc[:, np.atleast_1d(j)]
        same = ai[:, :, None] == aj[:, None, :]
        lca_level = same.sum(axis=0) - 1
        return self.lca_distance[lca_level]

    @property
    def domain(self):
        if self._domain is None:
            self._domain = FiniteMetric(
                self.leaf_distances(), metric_id=self.key, validate=False
            )
        return self._domain

    @cached_property
    def key(self):
        h = hashlib.sha256()
        for arr in (self.parent, self.leaf_nodes):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(repr(self.top_weight).encode())
        return "hst:" + h.hexdigest()[:16]

    def to_json(self):
        out = {
            "depth": self.depth,
            "weights": [float(x) for x in self.weights[1:]],
            "parent": self.parent.tolist(),
            "level": self.level.tolist(),
            "leaf_nodes": self.leaf_nodes.tolist(),
        }
        if self._domain is not None:
            out["domain"] = self._domain.to_json()
        return out

    @classmethod
    def from_json(cls, obj, domain=None):
        weights = obj["weights"]
        top = weights[0] if weights else 1.0
        for l, r in enumerate(weights, start=1):
            if not math.isclose(r, top * 2.0 ** (1 - l), rel_tol=1e-12):
                raise ParameterError("HST weights must halve at every level")
        hst = cls(obj["parent"], obj["level"], top, obj["leaf_nodes"], domain=domain)
        if hst.depth != obj["depth"]:
            raise ParameterError("declared depth disagrees with the level array")
        return hst

    @classmethod
    def from_parents(cls, parent, top_weight=1.0, domain=None):
        """Build from an arbitrary parent array (root has parent -1).

        Nodes are renumbered into level order; leaves keep their relative
        order in the leaf map.
        """
        parent = np.asarray(parent, dtype=np.int64)
        n = parent.size
        roots = np.flatnonzero(parent < 0)
        if roots.size != 1:
            raise ParameterError("tree needs exactly one root")
        depth_of = np.full(n, -1)
        depth_of[roots[0]] = 0
        for _ in range(n):
            todo = depth_of < 0
            if not np.any(todo):
                break
            ready = todo & (depth_of[np.where(parent < 0, 0, parent)] >= 0)
            depth_of[ready] = depth_of[parent[ready]] + 1
        if np.any(depth_of < 0):
            raise ParameterError("parent array contains a cycle")
        order = np.lexsort((np.arange(n), depth_of))
        new_id = np.empty(n, dtype=np.int64)
        new_id[order] = np.arange(n)
        new_parent = np.where(parent[order] < 0, -1, new_id[np.maximum(parent[order], 0)])
        has_child = np.zeros(n, dtype=bool)
        has_child[parent[parent >= 0]] = True
        old_leaves = np.flatnonzero(~has_child)
        return cls(new_parent, depth_of[order], top_weight, new_id[old_leaves], domain)


@dataclass(frozen=True, eq=False)
class NodeFunction:
    """A real value for every node of `hst`. `n` records the sample size, if any."""

    hst: Hst
    values: np.ndarray
    n: int | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.hst.n_nodes,):
            raise DomainMismatchError("node function has the wrong number of values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def level_values(self, l):
        return self.values[self.hst.level_nodes(l)]


def aggregate_leaves(hst, leaf_values):
    """Node values obtained by summing leaf values up the tree."""
    vals = np.zeros(hst.n_nodes)
    vals[hst.leaf_nodes] = leaf_values
    for l in range(hst.depth, 0, -1):
        nodes = hst.level_nodes(l)
        vals += np.bincount(hst.parent[nodes], weights=vals[nodes], minlength=hst.n_nodes)
    return vals


def node_function(P, hst):
    if not same_domain(P.domain, hst.domain):
        if P.domain.size != hst.n_leaves:
            raise DomainMismatchError("distribution has points with no leaf in the tree")
        raise DomainMismatchError("distribution and tree use different domains")
    return NodeFunction(hst, aggregate_leaves(hst, P.weights))


def active_nodes(G, alpha):
    """Nodes whose value is strictly greater than alpha."""
    if alpha < 0:
        raise ParameterError("alpha must be non-negative")
    return np.flatnonzero(G.values > alpha)


def binary_hst(depth, top_weight=1.0, domain=None):
    """Complete binary HST with 2**depth leaves."""
    parent = [-1]
    level = [0]
    for l in range(1, depth + 1):
        first_prev = 2 ** (l - 1) - 1
        for k in range(2**l):
            parent.append(first_prev + k // 2)
            level.append(l)
    return Hst(parent, level, top_weight, domain=domain)


def random_hst(rng, max_leaves=8, max_depth=4, top_weight=None):
    """Random HST with between 1 and max_leaves leaves, all at the same depth."""
    depth = int(rng.integers(1, max_depth + 1))
    n_leaves = int(rng.integers(1, max_leaves + 1))
    # Choose the leaf count per level by splitting downward.
    sizes = [1]
    for l in range(1, depth + 1):
        remaining = depth - l
        target = n_leaves if remaining == 0 else int(rng.integers(sizes[-1], n_leaves + 1))
        sizes.append(max(target, sizes[-1]))
    parent = [-1]
    level = [0]
    prev_ids = [0]
    for l in range(1, depth + 1):
        k = sizes[l]
        # every node of the previous level gets one child, extras go at random
        owners = list(prev_ids) + list(rng.choice(prev_ids, size=k - len(prev_ids)))
        owners.sort()
        ids = []
        for o in owners:
            ids.append(len(parent))
            parent.append(o)
            level.append(l)
        prev_ids = ids
    if top_weight is None:
        top_weight = float(rng.uniform(0.25, 4.0))
    return Hst(parent, level, top_weight)


def build_frt_embedding(metric, rng):
    """Random dominating HST for a finite metric (Fakcharoenphol-Rao-Talwar).

    A random permutation of the points and a radius scale beta in [1/2, 1)
    (log-uniform) define nested partitions: at level i each point joins the
    first point of the permutation within distance beta * 2**-i * diameter.
    """
    m = metric.size
    if m == 1:
        return Hst([-1], [0], 1.0, [0], domain=metric)
    dist = metric.dist
    off = dist[~np.eye(m, dtype=bool)]
    if np.any(off <= 0):
        raise MetricError("distinct points must have positive distance")
    diam = float(off.max())
    d = dist / diam
    dmin = float(off.min()) / diam
    depth = int(math.ceil(math.log2(1.0 / dmin) - 1e-12)) + 1

    perm = rng.permutation(m)
    beta = 2.0 ** (rng.uniform() - 1.0)
    d_perm = d[:, perm]
    labels = [np.zeros(m, dtype=np.int64)]
    i = 0
    while i < depth or np.unique(labels[-1]).size < m:
        i += 1
        rho = beta * 2.0**-i
        center = perm[np.argmax(d_perm <= rho, axis=1)]
        _, lab = np.unique(labels[-1] * m + center, return_inverse=True)
        labels.append(lab.ravel())
    depth = i

    parent = [-1]
    level = [0]
    prev_node = np.zeros(1, dtype=np.int64)  # node id of each label at the previous level
    for l in range(1, depth + 1):
        lab = labels[l]
        k = int(lab.max()) + 1
        rep = np.zeros(k, dtype=np.int64)
        rep[lab] = np.arange(m)
        first = len(parent)
        parent.extend(prev_node[labels[l - 1][rep]].tolist())
        level.extend([l] * k)
        prev_node = np.arange(first, first + k)
    leaf_nodes = prev_node[labels[depth]]

    # Edges scale with the cluster radii: two points first split below a
    # level-(l-1) cluster are within 2*beta*2**(1-l)*diam = 2*r_l of each other.
    top = beta * diam
    hst = Hst(parent, level, top, leaf_nodes, domain=metric)
    dt = hst.leaf_distances()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dist > 0, dist / np.where(dt > 0, dt, np.nan), 0.0)
    if np.any(np.isnan(ratio)):
        raise AssertionError("distinct points collapsed onto one leaf")
    inflate = float(ratio.max())
    if inflate > 1.0:
        hst = Hst(parent, level, top * inflate * (1 + 1e-12), leaf_nodes, domain=metric)
    assert np.all(hst.leaf_distances() >= dist), "FRT tree must dominate the metric"
    return hst


class CellDomain:
    """Leaves of a shifted dyadic grid over [0,1]^d, one domain point per cell."""

    ordered = False

    def __init__(self, dim, depth, shift, lo, hi):
        self.dim = int(dim)
        self.depth = int(depth)
        self.shift = np.asarray(shift, dtype=float)
        self.lo = np.asarray(lo, dtype=np.int64)
        self.hi = np.asarray(hi, dtype=np.int64)
        self.side = 2.0 ** (1 - self.depth)
        self.shape = tuple(int(x) for x in self.hi - self.lo + 1)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def key(self):
        return ("cells", self.dim, self.depth, tuple(self.shift.tolist()))

    def cell_coords(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.dim == 1 else x[None, :]
        if x.shape[1] != self.dim:
            raise DomainMismatchError(f"points must have {self.dim} coordinates")
        if not np.all(np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
            raise DomainMismatchError("points must lie in the unit cube")
        return np.floor((x + self.shift) / self.side).astype(np.int64)

    def index_of(self, values, snap=False):
        c = self.cell_coords(values) - self.lo
        return np.ravel_multi_index(tuple(c.T), self.shape)

    def centers(self, idx=None):
        idx = np.arange(self.size) if idx is None else np.asarray(idx)
        c = np.stack(np.unravel_index(idx, self.shape), axis=1) + self.lo
        return np.clip((c + 0.5) * self.side - self.shift, 0.0, 1.0)

    def distances(self, i, j):
        a, b = self.centers(i), self.centers(j)
        return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))

    def to_json(self):
        return {
            "cells": {
                "dim": self.dim,
                "depth": self.depth,
                "shift": self.shift.tolist(),
                "lo": self.lo.tolist(),
                "hi": self.hi.tolist(),
            }
        }


@dataclass(frozen=True, eq=False)
class GridEmbedding:
    hst: Hst
    cells: CellDomain

    def map_points(self, x):
        """Leaf (domain) index of the cell holding each point."""
        return self.cells.index_of(x)


def embed_grid(d, alpha, rng):
    """Randomly shifted dyadic tree over [0,1]^d with leaf cells of side <= alpha.

    The unit cube sits inside a box of side 2 shifted by a uniform vector
    in [0,1)^d, so every level is an honest 2^d-ary refinement. Level l cells
    have side 2**(1-l) and depth = ceil(log2(1/alpha)) + 1.
    """
    if int(d) != d or d < 1:
        raise ParameterError("dimension must be a positive integer")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    d = int(d)
    depth = int(math.ceil(math.log2(1.0 / alpha) - 1e-12)) + 1
    shift = rng.uniform(size=d)

    parent = [np.array([-1], dtype=np.int64)]
    level = [np.zeros(1, dtype=np.int64)]
    prev_lo = np.zeros(d, dtype=np.int64)
    prev_shape = (1,) * d
    first_prev = 0
    count = 1
    for l in range(1, depth + 1):
        side = 2.0 ** (1 - l)
        lo = np.floor(shift / side).astype(np.int64)
        hi = np.floor((1.0 + shift) / side).astype(np.int64)
        shape = tuple(int(x) for x in hi - lo + 1)
        grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij")
        coords = np.stack([g.ravel() for g in grids], axis=1)
        par_coords = coords // 2 - prev_lo
        par = first_prev + np.ravel_multi_index(tuple(par_coords.T), prev_shape)
        parent.append(par)
        level.append(np.full(coords.shape[0], l, dtype=np.int64))
        first_prev = count
        count += coords.shape[0]
        prev_lo, prev_shape = lo, shape
    cells = CellDomain(d, depth, shift, prev_lo, prev_lo + np.array(prev_shape) - 1)
    hst = Hst(
        np.concatenate(parent),
        np.concatenate(level),
        math.sqrt(d),
        np.arange(first_prev, count),
        domain=cells,
    )
    return GridEmbedding(hst, cells)
