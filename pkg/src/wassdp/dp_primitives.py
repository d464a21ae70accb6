"""Laplace noise, the binary-tree CDF mechanism, private quantiles and accounting.

Pass eps=math.inf to switch every mechanism to its noiseless counterpart;
the ledger still records the (infinite) spend.
"""

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.special import lambertw

from wassdp.core_dist import GridDomain, empirical_distribution, first_crossing, same_domain
from wassdp.errors import DomainMismatchError, ParameterError

DEFAULT_SEED = 0


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        check_epsilon(self.epsilon)
        if not 0 <= self.delta <= 1:
            raise ParameterError(f"delta must lie in [0, 1], got {self.delta}")


@dataclass
class PrivacyLedger:
    """Basic composition: totals are plain sums of the recorded spends.

    Spends are summed as exact rationals, so a budget split into equal
    shares (Fraction(eps) / parts) adds back to eps bit for bit.
    """

    entries: list = field(default_factory=list)

    def record(self, mechanism, epsilon, delta=0.0):
        if not isinstance(epsilon, Fraction):
            epsilon = float(epsilon)
        self.entries.append((str(mechanism), epsilon, float(delta)))

    @staticmethod
    def _exact_sum(values):
        values = list(values)
        if any(math.isinf(v) for v in values):
            return math.inf
        return float(sum((Fraction(v) for v in values), Fraction(0)))

    @property
    def total_epsilon(self):
        return self._exact_sum(e for _, e, _ in self.entries)

    @property
    def total_delta(self):
        return self._exact_sum(d for _, _, d in self.entries)

    def to_json(self):
        def num(x):
            x = float(x)
            return "inf" if math.isinf(x) else x

        return {
            "entries": [
                {"mechanism": m, "epsilon": num(e), "delta": d} for m, e, d in self.entries
            ],
            "total_epsilon": num(self.total_epsilon),
            "total_delta": self.total_delta,
        }


def check_epsilon(eps):
    if not (eps > 0):
        raise ParameterError(f"epsilon must be positive, got {eps}")


def resolve_seed(seed=None):
    """Explicit seed, else $WASSDP_SEED, else the package default."""
    if seed is not None:
        return int(seed)
    env = os.environ.get("WASSDP_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ParameterError(f"WASSDP_SEED must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def make_rng(seed=None):
    return np.random.default_rng(np.random.SeedSequence(resolve_seed(seed)))


def split_rngs(seed, count):
    """`count` independent generators derived from one seed, in a fixed order."""
    children = np.random.SeedSequence(resolve_seed(seed)).spawn(count)
    return [np.random.default_rng(s) for s in children]


def laplace_noise(scale, rng, size=None):
    if not (scale > 0) or math.isinf(scale):
        raise ParameterError(f"Laplace scale must be positive and finite, got {scale}")
    return rng.laplace(0.0, scale, size=size)


def _tree_depth(cells):
    return max(1, math.ceil(math.log2(cells))) if cells > 1 else 1


def private_cdf(data, domain, eps, rng, ledger=None, project=True):
    """Noisy CDF of the data on the grid via the binary-tree mechanism.

    Leaves are grid points (padded to a power of two). Every node's
    normalised count gets Lap(depth/(eps*n)); the value at grid point t is the
    sum of the O(log |D|) dyadic nodes covering [0, t]. The root is never
    queried, so `depth` levels carry eps/depth each.

    With project=True the prefix sums go through an isotonic fit, are clipped
    to [0, 1] and the last entry is pinned to 1.
    """
    if not isinstance(domain, GridDomain):
        raise DomainMismatchError("private_cdf needs a grid domain")
    if not same_domain(data.domain, domain):
        raise DomainMismatchError("dataset was built on a different domain")
    check_epsilon(eps)
    n = data.n
    m = domain.size
    depth = _tree_depth(m)
    if ledger is not None:
        share = eps if math.isinf(eps) else Fraction(eps) / depth
        for level in range(1, depth + 1):
            ledger.record(f"private_cdf/level{level}", share)

    if math.isinf(eps):
        return empirical_distribution(data).cdf()
    counts = data.counts()

    width = 2**depth
    leaf = np.zeros(width)
    leaf[:m] = counts / n
    # levels[h] holds the 2**h node values at height h (leaves at h=0).
    levels = [leaf]
    for _ in range(depth - 1):
        prev = levels[-1]
        levels.append(prev[0::2] + prev[1::2])
    scale = depth / (eps * n)
    noisy = [v + laplace_noise(scale, rng, size=v.size) for v in levels]

    g = np.zeros(m)
    ends = np.arange(m) + 1  # prefix [0, t] covers t+1 leaves
    for h in range(depth):
        bit = (ends >> h) & 1
        idx = (ends >> (h + 1)) << 1  # node index at height h covering that chunk
        take = bit == 1
        g[take] += noisy[h][idx[take]]
    # A prefix spanning every leaf is the root, whose value 1 is public.
    g[ends == width] = 1.0
    if not project:
        return g
    return monotone_projection(g)


def monotone_projection(g):
    fit = np.asarray(isotonic_regression(g).x)
    fit = np.clip(fit, 0.0, 1.0)
    fit[-1] = 1.0
    return fit


def private_quantiles(data, domain, eps, alphas, rng, ledger=None):
    """First grid point at which the private CDF reaches each alpha."""
    alphas = np.asarray(alphas, dtype=float)
    if alphas.size == 0:
        return np.array([])
    if np.any(np.diff(alphas) < 0):
        raise ParameterError("quantile levels must be sorted")
    if np.any(alphas <= 0) or np.any(alphas > 1):
        raise ParameterError("quantile levels must lie in (0, 1]")
    g = private_cdf(data, domain, eps, rng, ledger=ledger)
    idx = np.array([first_crossing(g, a) for a in alphas], dtype=np.int64)
    return domain.points[idx]


def lambert_w(x):
    """Principal branch of the Lambert W function on [0, inf]."""
    if x < 0:
        raise ParameterError("lambert_w is only defined here for x >= 0")
    if math.isinf(x):
        return math.inf
    if x == 0:
        return 0.0
    w = float(lambertw(x).real)
    # one Newton polish keeps the relative residual at rounding level
    ew = math.exp(w)
    step = (w * ew - x) / (ew * (w + 1))
    return w - step


def kappa(eps, delta, n):
    """(1/(10 eps n)) * min{W(0.45 eps/delta), 0.6}; zero when eps is infinite."""
    check_epsilon(eps)
    if not 0 <= delta <= 1:
        raise ParameterError("delta must lie in [0, 1]")
    if n < 1:
        raise ParameterError("n must be at least 1")
    if math.isinf(eps):
        return 0.0
    arg = math.inf if delta == 0 else 0.45 * eps / delta
    return min(lambert_w(arg), 0.6) / (10 * eps * n)
