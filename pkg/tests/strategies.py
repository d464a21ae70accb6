import numpy as np
from hypothesis import strategies as st

from wassdp.core_dist import DiscreteDistribution, GridDomain


@st.composite
def grid_domains(draw, max_size=30):
    m = draw(st.integers(2, max_size))
    a = draw(st.sampled_from([0.0, -3.0, 10.0]))
    gamma = draw(st.sampled_from([1.0, 0.5, 0.25, 2.0]))
    return GridDomain(a, a + (m - 1) * gamma, gamma)


@st.composite
def weight_vectors(draw, size, sparse=True):
    raw = np.array(
        draw(st.lists(st.floats(0.0, 1.0), min_size=size, max_size=size)), dtype=float
    )
    if sparse:
        mask = np.array(draw(st.lists(st.booleans(), min_size=size, max_size=size)))
        raw = raw * mask
    if raw.sum() <= 1e-6:
        raw = np.zeros(size)
        raw[draw(st.integers(0, size - 1))] = 1.0
    return raw / raw.sum()


@st.composite
def grid_distributions(draw, max_size=30, sparse=True):
    domain = draw(grid_domains(max_size))
    return DiscreteDistribution(domain, draw(weight_vectors(domain.size, sparse)))


@st.composite
def distribution_pairs(draw, max_size=30):
    domain = draw(grid_domains(max_size))
    p = draw(weight_vectors(domain.size))
    q = draw(weight_vectors(domain.size))
    return DiscreteDistribution(domain, p), DiscreteDistribution(domain, q)
