"""Bayesian covariance selection on decomposable Gaussian graphical models."""

from .counts import (
    CounterConfig,
    CountTable,
    UniformityReport,
    brute_force_counts,
    estimate_counts,
    exact_table,
    table_for,
    verify_counts,
)
from .experiments import (
    ExperimentSpec,
    NumericError,
    bayes_estimator,
    compare_priors,
    l1_loss,
    make_structure,
    threshold_graph,
)
from .graph import (
    FlipContext,
    Graph,
    NotDecomposableError,
    PerfectSequence,
    enumerate_decomposable,
    flip_context,
    is_decomposable,
    legal_flip,
    perfect_sequence,
)
from .hiw import (
    DataSummary,
    HyperParams,
    log_h,
    log_h_ratio_flip,
    log_marginal_likelihood,
    posterior_mean_omega,
    posterior_params,
    sample_omega,
)
from .priors import GraphPrior, HyperPriorSpec, log_prior, log_prior_ratio
from .sampler import ChainOutput, McmcConfig, edge_inclusion_probs, ess, run_chain

__version__ = "0.1.0"
