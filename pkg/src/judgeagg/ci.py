"""Conditionally-independent aggregation.

Uniform and weighted majority vote, the exact posterior log-odds under
per-judge sensitivity/specificity, and the closed-form EM fitter (asymmetric
Dawid-Skene with Beta-prior MAP updates).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .data import PosteriorVector, VoteMatrix, rng_from
from .em import EMConfig, EMTrace, init_gamma, judge_weights, relative_change, resolve_flip


@dataclass(frozen=True)
class CIParams:
    """Class prior plus per-judge sensitivity alpha and specificity beta.

    All entries must be strictly inside (0,1); Beta-prior smoothing in the
    fitter keeps estimates interior, and boundary values are rejected here.
    """

    pi: float
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if alpha.shape != beta.shape or alpha.ndim != 1:
            raise ValueError("alpha and beta must be 1-D vectors of equal length")
        for name, arr in (("pi", np.array([self.pi])), ("alpha", alpha), ("beta", beta)):
            if np.any(arr <= 0.0) or np.any(arr >= 1.0):
                raise ValueError(f"{name} must lie strictly inside (0,1)")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def k(self) -> int:
        return len(self.alpha)

    def weights(self) -> np.ndarray:
        return judge_weights(self.alpha, self.beta)

    def flipped(self) -> "CIParams":
        # Relabeling Y -> 1-Y swaps the error roles: alpha' = 1-beta, beta' = 1-alpha.
        return CIParams(pi=1.0 - self.pi, alpha=1.0 - self.beta, beta=1.0 - self.alpha)


def ci_log_odds(p: CIParams, j) -> float:
    """Posterior log-odds of Y=1 for one K-vector of votes.

    logit(pi) + sum_j [J_j log(alpha_j/(1-beta_j)) + (1-J_j) log((1-alpha_j)/beta_j)],
    an affine function of the votes with slopes given by ``p.weights()``.
    """
    j = np.asarray(j, dtype=float)
    return float(_log_odds_matrix(p, j[None, :])[0])


def _log_odds_matrix(p: CIParams, votes: np.ndarray) -> np.ndarray:
    w1 = np.log(p.alpha) - np.log1p(-p.beta)
    w0 = np.log1p(-p.alpha) - np.log(p.beta)
    return np.log(p.pi / (1.0 - p.pi)) + votes @ w1 + (1.0 - votes) @ w0


def _class_log_liks(p: CIParams, votes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    l1 = votes @ np.log(p.alpha) + (1.0 - votes) @ np.log1p(-p.alpha)
    l0 = votes @ np.log1p(-p.beta) + (1.0 - votes) @ np.log(p.beta)
    return l0, l1


def wmv_predict(p: CIParams, v: VoteMatrix) -> PosteriorVector:
    """Weighted majority vote: per-item sigmoid of the CI posterior log-odds."""
    return PosteriorVector(expit(_log_odds_matrix(p, v.votes.astype(float))))


def umv_predict(v: VoteMatrix) -> PosteriorVector:
    """Uniform majority vote; gamma is the vote fraction, ties predict 1."""
    return PosteriorVector(v.votes.mean(axis=1))


def sample_ci(p: CIParams, n: int, seed: int, judge_names=None) -> VoteMatrix:
    """Simulate n items from the CI model, gold labels included."""
    rng = rng_from(seed, 11)
    y = (rng.random(n) < p.pi).astype(np.int8)
    rates = np.where(y[:, None] == 1, p.alpha[None, :], 1.0 - p.beta[None, :])
    votes = (rng.random((n, p.k)) < rates).astype(np.int8)
    names = judge_names if judge_names is not None else tuple(f"j{i+1}" for i in range(p.k))
    ids = tuple(str(i) for i in range(n))
    return VoteMatrix(votes=votes, item_ids=ids, judge_names=names, gold_labels=y)


@dataclass
class EMFit:
    """Fitted parameters, per-item posteriors, and run diagnostics."""

    params: CIParams
    posterior: PosteriorVector
    trace: EMTrace


def observed_loglik(p: CIParams, votes: np.ndarray) -> float:
    """Observed-data log-likelihood sum_i log(pi P(J_i|1) + (1-pi) P(J_i|0))."""
    l0, l1 = _class_log_liks(p, votes)
    stacked = np.stack([np.log(p.pi) + l1, np.log1p(-p.pi) + l0])
    return float(logsumexp(stacked, axis=0).sum())


def _beta_log_prior(p: CIParams, a: float, b: float) -> float:
    # Beta(a,b) kernels on every alpha_j and beta_j; normalizing constants dropped.
    t = (a - 1.0) * (np.log(p.alpha) + np.log(p.beta))
    t = t + (b - 1.0) * (np.log1p(-p.alpha) + np.log1p(-p.beta))
    return float(t.sum())


def em_fit_ci(v: VoteMatrix, config: EMConfig = EMConfig()) -> EMFit:
    """Closed-form EM for the asymmetric CI model.

    E-step: exact posteriors from the current parameters. M-step: Beta-MAP
    updates for (alpha, beta) from soft counts and pi = mean(gamma). The
    penalized observed log-likelihood is non-decreasing (tracked in the
    trace); convergence is relative change below ``config.tol``.
    """
    if v.n < 2:
        raise ValueError("em_fit_ci requires at least 2 items")
    votes = v.votes.astype(float)
    a, b = config.prior_a, config.prior_b
    trace = EMTrace(init_used="majority")
    if v.k >= 2 and np.all(v.votes == v.votes[:, :1]):
        msg = "all judge columns identical: low-information input, estimates rely on priors"
        warnings.warn(msg)
        trace.notes.append(msg)
    gamma = init_gamma(votes, config.seed)
    params = None
    prev = -np.inf
    for _ in range(config.max_iters):
        params = _map_mstep(votes, gamma, a, b)
        gamma = expit(_log_odds_matrix(params, votes))
        ll = observed_loglik(params, votes)
        obj = ll + _beta_log_prior(params, a, b)
        trace.loglik.append(ll)
        trace.objective.append(obj)
        trace.n_iters += 1
        if relative_change(obj, prev) < config.tol:
            trace.converged = True
            break
        prev = obj
    if resolve_flip(float(params.weights().sum()), params.pi):
        params = params.flipped()
        gamma = 1.0 - gamma
        trace.flipped = True
    return EMFit(params=params, posterior=PosteriorVector(gamma), trace=trace)


def _map_mstep(votes: np.ndarray, gamma: np.ndarray, a: float, b: float) -> CIParams:
    pi = float(gamma.mean())
    alpha = (a - 1.0 + gamma @ votes) / (a + b - 2.0 + gamma.sum())
    beta = (a - 1.0 + (1.0 - gamma) @ (1.0 - votes)) / (a + b - 2.0 + (1.0 - gamma).sum())
    return CIParams(pi=pi, alpha=alpha, beta=beta)
