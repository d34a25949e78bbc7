"""Probabilistic network embedding (CNE) plus edge-flip sensitivity analysis.

Fit a conditional network embedding, then measure how much each single
edge flip would change the model's link predictions: exactly (full
re-embedding), cheaply (two-row incremental re-embedding), or in closed
form (second-order KL expansion with diagonal Hessian blocks).
"""

from .backend import BACKEND
from .cne import (
    EmbeddingConfig,
    EmbeddingError,
    FitDiagnostics,
    FitResult,
    embed,
    embedding_hash,
    link_probability,
    link_probability_matrix,
    log_likelihood,
    log_likelihood_gradient,
)
from .evaluation import (
    RankingComparison,
    TimingRecord,
    benchmark_runtime,
    compare_rankings,
    ndcg,
    randomization_test,
    spearman,
)
from .graphio import (
    EdgeFlip,
    EdgeListParseError,
    FlipDirection,
    Graph,
    GraphError,
    enumerate_flips,
    flip_edge,
    is_bridge,
    largest_connected_component,
    load_edge_list,
    save_edge_list,
)
from .sensitivity import (
    HessianBlock,
    HessianBlockStore,
    SensitivityError,
    SensitivityRanking,
    bernoulli_kl,
    compute_hessian_blocks,
    grad_link_prob_block,
    grad_link_prob_exact,
    hessian_block,
    rank_all,
    sensitivity_approx,
    sensitivity_ipre,
    sensitivity_re,
)

__version__ = "0.1.0"
