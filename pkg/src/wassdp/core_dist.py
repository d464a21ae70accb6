"""Sample spaces, distributions over them, quantiles, restrictions and divergences.

Two kinds of domain are supported: GridDomain, an evenly spaced grid on an
interval, and FiniteMetric, a labelled point set with a distance matrix.
Distributions store one weight per domain point and are immutable.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from wassdp.errors import DomainMismatchError, MetricError, ParameterError

NORMALIZATION_TOL = 1e-9
# Used when comparing a CDF against a level; absorbs cumulative-sum rounding.
CDF_TOL = 1e-12


@dataclass(frozen=True)
class GridDomain:
    """Grid {a, a+gamma, ..., b} on the interval [a, b]."""

    a: float
    b: float
    gamma: float
    size: int = field(init=False)

    def __post_init__(self):
        a, b, gamma = float(self.a), float(self.b), float(self.gamma)
        if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(gamma)):
            raise ParameterError("grid endpoints and step must be finite")
        if not b > a:
            raise ParameterError(f"grid needs b > a, got a={a}, b={b}")
        if not gamma > 0:
            raise ParameterError(f"grid step must be positive, got {gamma}")
        cells = (b - a) / gamma
        rounded = round(cells)
        if rounded < 1 or abs(cells - rounded) > 1e-9 * max(1.0, cells):
            raise ParameterError(f"(b-a)/gamma = {cells} is not an integer")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "size", int(rounded) + 1)

    ordered = True

    @property
    def points(self):
        return np.linspace(self.a, self.b, self.size)

    @property
    def key(self):
        return ("grid", self.a, self.b, self.gamma)

    def index_of(self, values, snap=False):
        """Map values to grid indices.

        With snap=False every value must sit on a grid point (up to 1e-6 of a
        step). With snap=True values are rounded to the nearest grid point.
        Values outside [a, b] are rejected either way.
        """
        x = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(x)):
            raise DomainMismatchError("non-finite sample value")
        pos = (x - self.a) / self.gamma
        idx = np.rint(pos)
        if not snap:
            off = np.abs(pos - idx) > 1e-6
            if np.any(off):
                bad = float(x[off].ravel()[0])
                raise DomainMismatchError(f"value {bad!r} is not a grid point")
        if np.any(idx < 0) or np.any(idx > self.size - 1):
            bad = float(x[(idx < 0) | (idx > self.size - 1)].ravel()[0])
            raise DomainMismatchError(f"value {bad!r} lies outside [{self.a}, {self.b}]")
        return idx.astype(np.int64)

    def distances(self, i, j):
        p = self.points
        return np.abs(p[np.asarray(i)][:, None] - p[np.asarray(j)][None, :])

    def to_json(self):
        return {"a": self.a, "b": self.b, "gamma": self.gamma}


class FiniteMetric:
    """A finite metric space given by a labelled distance matrix."""

    ordered = False

    def __init__(self, dist, labels=None, metric_id=None, validate=True):
        d = np.array(dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
            raise MetricError("distance matrix must be square and non-empty")
        m = d.shape[0]
        if labels is None:
            labels = [str(i) for i in range(m)]
        labels = [str(x) for x in labels]
        if len(labels) != m:
            raise MetricError(f"{len(labels)} labels for {m} points")
        if len(set(labels)) != m:
            raise MetricError("labels must be distinct")
        if validate:
            _check_metric(d)
        d.flags.writeable = False
        self.dist = d
        self.labels = tuple(labels)
        self._label_index = {x: i for i, x in enumerate(self.labels)}
        self.metric_id = metric_id or self._fingerprint()

    @classmethod
    def from_points(cls, coords, labels=None, metric_id=None):
        """Euclidean metric on the rows of `coords`."""
        x = np.asarray(coords, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=-1))
        return cls(d, labels=labels, metric_id=metric_id, validate=False)

    @property
    def size(self):
        return self.dist.shape[0]

    @property
    def key(self):
        return ("metric", self.metric_id)

    @property
    def diameter(self):
        return float(self.dist.max())

    def normalized(self):
        """Copy scaled to diameter 1 (unchanged when the diameter is 0)."""
        diam = self.diameter
        if diam == 0:
            return self
        return FiniteMetric(self.dist / diam, self.labels, validate=False)

    def index_of(self, values, snap=False):
        out = []
        for v in np.ravel(np.asarray(values, dtype=object)):
            key = str(v)
            if key not in self._label_index:
                raise DomainMismatchError(f"unknown metric point {v!r}")
            out.append(self._label_index[key])
        return np.asarray(out, dtype=np.int64)

    def distances(self, i, j):
        return self.dist[np.ix_(np.asarray(i), np.asarray(j))]

    def to_json(self):
        return {"metric_id": self.metric_id}

    def metric_json(self):
        return {
            "labels": list(self.labels),
            "dist": self.dist.tolist(),
            "metric_id": self.metric_id,
        }

    def _fingerprint(self):
        blob = json.dumps([list(self.labels), self.dist.tolist()]).encode()
        return "sha256:" + hashlib.sha256(blob).hexdigest()[:16]


def _check_metric(d):
    scale = max(1.0, float(np.abs(d).max()))
    tol = 1e-9 * scale
    if not np.all(np.isfinite(d)):
        raise MetricError("distances must be finite")
    if np.any(d < 0):
        raise MetricError("distances must be non-negative")
    if np.any(np.abs(np.diag(d)) > tol):
        raise MetricError("diagonal must be zero")
    if np.any(np.abs(d - d.T) > tol):
        raise MetricError("distance matrix is not symmetric")
    for k in range(d.shape[0]):
        viol = d > d[:, k : k + 1] + d[k : k + 1, :] + tol
        if np.any(viol):
            i, j = np.argwhere(viol)[0]
            raise MetricError(f"triangle inequality fails for ({i}, {j}) via {k}")


def same_domain(d1, d2):
    return d1 is d2 or d1.key == d2.key


def _require_same_domain(p, q):
    if not same_domain(p.domain, q.domain):
        raise DomainMismatchError("distributions live on different domains")


def _require_ordered(p):
    if not getattr(p.domain, "ordered", False):
        raise DomainMismatchError("operation needs an ordered (grid) domain")


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    domain: object
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.domain.size,):
            raise DomainMismatchError(
                f"{w.shape} weights for a domain of {self.domain.size} points"
            )
        if not np.all(np.isfinite(w)):
            raise ParameterError("weights must be finite")
        if np.any(w < -NORMALIZATION_TOL):
            raise ParameterError("weights must be non-negative")
        w = np.clip(w, 0.0, None)
        total = w.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ParameterError(f"weights sum to {total}, not 1")
        if abs(total - 1.0) > 1e-12:
            w = w / total
        assert abs(w.sum() - 1.0) <= NORMALIZATION_TOL
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @classmethod
    def point_mass(cls, domain, index):
        w = np.zeros(domain.size)
        w[index] = 1.0
        return cls(domain, w)

    @classmethod
    def uniform(cls, domain):
        return cls(domain, np.full(domain.size, 1.0 / domain.size))

    @property
    def support(self):
        return np.flatnonzero(self.weights > 0)

    def cdf(self):
        _require_ordered(self)
        f = np.cumsum(self.weights)
        f = np.minimum(f, 1.0)
        f[-1] = 1.0
        return f

    def allclose(self, other, atol=1e-12):
        return same_domain(self.domain, other.domain) and np.allclose(
            self.weights, other.weights, rtol=0, atol=atol
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """n samples, stored as indices into `domain`."""

    domain: object
    indices: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64).ravel()
        if idx.size == 0:
            raise ParameterError("dataset must contain at least one sample")
        if idx.min() < 0 or idx.max() >= self.domain.size:
            raise DomainMismatchError("sample index outside the domain")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_values(cls, values, domain, snap=False):
        return cls(domain, domain.index_of(values, snap=snap))

    @property
    def n(self):
        return int(self.indices.size)

    @property
    def samples(self):
        if isinstance(self.domain, GridDomain):
            return self.domain.points[self.indices]
        return self.indices.copy()

    def counts(self):
        return np.bincount(self.indices, minlength=self.domain.size)


def empirical_distribution(data, domain=None):
    domain = data.domain if domain is None else domain
    if not same_domain(data.domain, domain):
        raise DomainMismatchError("dataset was built on a different domain")
    return DiscreteDistribution(domain, data.counts() / data.n)


def sample(P, n, rng):
    """Draw n iid samples from P."""
    if n < 1:
        raise ParameterError("n must be at least 1")
    idx = rng.choice(P.domain.size, size=int(n), p=P.weights)
    return Dataset(P.domain, idx)


def first_crossing(cdf, alpha):
    """Index of the first entry of a non-decreasing vector that reaches alpha."""
    hits = np.flatnonzero(np.asarray(cdf) >= alpha - CDF_TOL)
    if hits.size == 0:
        return len(cdf) - 1
    return int(hits[0])


def quantile_index(P, alpha):
    _require_ordered(P)
    if not 0 < alpha <= 1:
        raise ParameterError(f"quantile level must lie in (0, 1], got {alpha}")
    return first_crossing(P.cdf(), alpha)


def quantile(P, alpha):
    """Smallest grid point t with F_P(t) >= alpha."""
    return float(P.domain.points[quantile_index(P, alpha)])


def restrict_indices(P, iu, iv):
    _require_ordered(P)
    if iu > iv:
        raise ParameterError("restriction needs u <= v")
    w = np.zeros(P.domain.size)
    if iu == iv:
        w[iu] = 1.0
        return DiscreteDistribution(P.domain, w)
    f = P.cdf()
    w[iu] = f[iu]
    w[iu + 1 : iv] = P.weights[iu + 1 : iv]
    w[iv] = 1.0 - f[iv - 1]
    return DiscreteDistribution(P.domain, np.clip(w, 0.0, None))


def restrict(P, u, v):
    """P restricted to [u, v]: tails collapse onto atoms at the endpoints.

    The CDF of the result is 0 below u, F_P on [u, v) and 1 from v on.
    """
    _require_ordered(P)
    if u > v:
        raise ParameterError(f"restriction needs u <= v, got {u} > {v}")
    iu, iv = P.domain.index_of([u, v])
    return restrict_indices(P, int(iu), int(iv))


def d_infinity(P, Q):
    _require_same_domain(P, Q)
    p, q = P.weights, Q.weights
    if not np.array_equal(p > 0, q > 0):
        return math.inf
    s = p > 0
    return float(np.max(np.abs(np.log(p[s]) - np.log(q[s]))))


def tv(P, Q):
    _require_same_domain(P, Q)
    return float(0.5 * np.abs(P.weights - Q.weights).sum())


def kl(P, Q):
    _require_same_domain(P, Q)
    p, q = P.weights, Q.weights
    s = p > 0
    if np.any(q[s] == 0):
        return math.inf
    return float(max(0.0, np.sum(p[s] * (np.log(p[s]) - np.log(q[s])))))


def hellinger_sq(P, Q):
    _require_same_domain(P, Q)
    return float(0.5 * np.sum((np.sqrt(P.weights) - np.sqrt(Q.weights)) ** 2))
