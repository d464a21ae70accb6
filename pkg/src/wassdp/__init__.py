"""Differentially private density estimation under the 1-Wasserstein distance."""

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
from wassdp.dp_primitives import PrivacyLedger, PrivacyParams, kappa, private_cdf, private_quantiles
from wassdp.errors import (
    DomainMismatchError,
    InputFormatError,
    MetricError,
    ParameterError,
    SizeError,
    WassDPError,
)
from wassdp.hst import Hst, build_frt_embedding, embed_grid, node_function
from wassdp.onedim_estimator import estimate_1d, psmm_baseline, target_rate_1d
from wassdp.tree_estimator import priv_density_est_tree, target_rate_discrete, target_rate_tree
from wassdp.wasserstein import w1_cdf, w1_exact, w1_tree

__version__ = "0.1.0"
