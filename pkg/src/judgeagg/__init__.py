"""Dependence-aware aggregation of binary judge votes.

Model hierarchy: conditionally-independent judges (majority votes and
Dawid-Skene-style EM) < shared-coupling Ising (linear correlation-corrected
vote) < class-dependent Ising (quadratic rule), plus an exchangeable
logistic-normal latent-factor model. Includes exact small-K enumeration,
Curie-Weiss simulators for the risk-separation experiments, and a CLI.
"""

from .ci import CIParams, ci_log_odds, em_fit_ci, sample_ci, umv_predict, wmv_predict
from .curie_weiss import (
    CWClassSpec,
    CWExperimentSpec,
    ci_oracle_predict,
    magnetization_classifier,
    magnetization_log_pmf,
    run_separation,
    sample_cw,
    solve_mean_field,
    true_marginals,
)
from .data import (
    PosteriorVector,
    SplitSpec,
    VoteDataError,
    VoteMatrix,
    accuracy,
    load_votes,
    rng_from,
    save_votes,
    split,
)
from .em import EMConfig
from .factor import (
    FactorParams,
    MultiFactorParams,
    bayes_limit_score,
    ci_limit_score,
    em_fit_factor,
    factor_to_ising,
    marginal_success,
    run_factor_separation,
    sample_factor,
)
from .ising import (
    ExactEvidence,
    ExactEvidenceUnavailable,
    IsingParams,
    K_MAX_EXACT,
    exact_evidence,
    bayes_log_odds,
    ci_from_marginals,
    class_conditional_prob,
    em_fit_ising,
    energy,
    fit_pseudo,
    log_partition,
    pseudo_log_likelihood,
    pseudo_log_likelihood_grad,
    sample_ising,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
