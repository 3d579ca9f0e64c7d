"""Exchangeable logistic-normal latent-factor model.

Sampling, quadrature marginals, the asymptotic plug-in scores for the
factor-vs-CI comparison, the second-order reduction of a weak multi-factor
model to Ising fields and couplings, and a quadrature-EM fitter for the
rank-1 per-judge model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .ci import em_fit_ci
from .data import PosteriorVector, VoteMatrix, rng_from
from .em import (
    EMConfig,
    EMTrace,
    INIT_STRATEGIES,
    RESTART_MARGIN,
    init_gamma,
    judge_weights,
    relative_change,
    resolve_flip,
)

QUAD_NODES = 61

_H_NODES, _H_WEIGHTS = np.polynomial.hermite.hermgauss(QUAD_NODES)
# E_{Z~N(0,1)} f(Z) = sum_q wq f(zq) with the substitution below.
_ZQ = np.sqrt(2.0) * _H_NODES
_LOG_WQ = np.log(_H_WEIGHTS) - 0.5 * np.log(np.pi)


@dataclass(frozen=True)
class FactorParams:
    """Scalar exchangeable model: vote rate sigma(b + a(2y-1) + lam(2y-1) Z)."""

    pi: float
    a: float
    b: float
    lam: float
    sigma2_z: float

    def __post_init__(self):
        if not (0.0 < self.pi < 1.0):
            raise ValueError("pi must lie strictly inside (0,1)")
        if not (self.sigma2_z > 0.0):
            raise ValueError("sigma2_z must be positive")
        for name in ("a", "b", "lam"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class MultiFactorParams:
    """Per-judge model: J_j | (Y=y, Z=z) ~ Bernoulli(sigma(a_j y + b_j + lambda_j . z)).

    Z is standard normal in R^r; loadings has shape (K, r).
    """

    a: np.ndarray
    b: np.ndarray
    loadings: np.ndarray
    pi: float = 0.5

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        lo = np.asarray(self.loadings, dtype=float)
        if lo.ndim == 1:
            lo = lo[:, None]
        if a.ndim != 1 or a.shape != b.shape or lo.shape[0] != len(a) or lo.shape[1] < 1:
            raise ValueError("need K-vectors a, b and a (K, r>=1) loading matrix")
        if not (0.0 < self.pi < 1.0):
            raise ValueError("pi must lie strictly inside (0,1)")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "loadings", lo)

    @property
    def k(self) -> int:
        return len(self.a)

    @property
    def rank(self) -> int:
        return self.loadings.shape[1]

    def eta(self, y: int) -> np.ndarray:
        return self.a * y + self.b

    def flipped(self) -> "MultiFactorParams":
        # Relabeling y -> 1-y: eta_j(1-y) = (a_j + b_j) - a_j y; the loading
        # sign is immaterial because Z is symmetric.
        return MultiFactorParams(a=-self.a, b=self.a + self.b, loadings=self.loadings, pi=1.0 - self.pi)


def sample_factor(p: FactorParams, k: int, n: int, seed: int, judge_names=None) -> VoteMatrix:
    """Simulate n items: Y ~ Bern(pi), Z ~ N(0, sigma2_z), votes i.i.d. given (Y, Z)."""
    rng = rng_from(seed, 31)
    y = (rng.random(n) < p.pi).astype(np.int8)
    z = rng.normal(0.0, np.sqrt(p.sigma2_z), size=n)
    rate = expit(p.b + p.a * (2 * y - 1) + p.lam * (2 * y - 1) * z)
    votes = (rng.random((n, k)) < rate[:, None]).astype(np.int8)
    names = judge_names if judge_names is not None else tuple(f"j{i+1}" for i in range(k))
    return VoteMatrix(votes=votes, item_ids=tuple(str(i) for i in range(n)),
                      judge_names=names, gold_labels=y)


def marginal_success(p: FactorParams, y: int) -> float:
    """q_y = E_Z[sigma(b + a(2y-1) + lam(2y-1) Z)] by Gauss-Hermite quadrature."""
    z = np.sqrt(p.sigma2_z) * _ZQ
    vals = expit(p.b + p.a * (2 * y - 1) + p.lam * (2 * y - 1) * z)
    return float(np.exp(_LOG_WQ) @ vals)


def bayes_limit_score(p: FactorParams, s: float) -> float:
    """Large-ensemble Bayes score logit(pi) + (2a / (lam^2 sigma2)) (logit(s) - b)."""
    if p.lam == 0.0:
        raise ValueError("factor degenerate (lam = 0); Bayes limit undefined by this formula")
    if not (0.0 < s < 1.0):
        raise ValueError("s must lie strictly inside (0,1)")
    slope = 2.0 * p.a / (p.lam ** 2 * p.sigma2_z)
    return float(np.log(p.pi / (1.0 - p.pi)) + slope * (np.log(s / (1.0 - s)) - p.b))


def ci_limit_score(q0: float, q1: float, s: float) -> float:
    """Per-judge CI score s log(q1/q0) + (1-s) log((1-q1)/(1-q0)).

    Equals KL(s || q0) - KL(s || q1); positive when the vote fraction s is
    better explained by the class-1 marginal.
    """
    for name, val in (("q0", q0), ("q1", q1), ("s", s)):
        if not (0.0 < val < 1.0):
            raise ValueError(f"{name} must lie strictly inside (0,1)")
    return float(s * np.log(q1 / q0) + (1.0 - s) * np.log((1.0 - q1) / (1.0 - q0)))


def clamp_fraction(s, k: int):
    """Continuity correction pulling vote fractions off the {0,1} boundary."""
    lo = 1.0 / (2.0 * k)
    return np.clip(s, lo, 1.0 - lo)


def run_factor_separation(p: FactorParams, k_grid, n: int, seed: int) -> list[dict]:
    """Empirical risks of the two plug-in rules for each judge count.

    The Bayes-limit rule thresholds the asymptotic score at the clamped vote
    fraction; the CI rule keeps the exact finite-K prior term
    logit(pi) + K * ci_limit_score(s). Returns one row per K with risks,
    standard errors, and their difference.
    """
    if p.lam == 0.0:
        raise ValueError("factor degenerate (lam = 0); separation undefined")
    q0 = marginal_success(p, 0)
    q1 = marginal_success(p, 1)
    rows = []
    for i, k in enumerate(k_grid):
        v = sample_factor(p, int(k), n, seed + 1000 * i)
        s = clamp_fraction(v.votes.mean(axis=1), int(k))
        slope = 2.0 * p.a / (p.lam ** 2 * p.sigma2_z)
        bayes_scores = np.log(p.pi / (1.0 - p.pi)) + slope * (np.log(s / (1 - s)) - p.b)
        ci_scores = np.log(p.pi / (1.0 - p.pi)) + k * (
            s * np.log(q1 / q0) + (1.0 - s) * np.log((1.0 - q1) / (1.0 - q0))
        )
        gold = v.gold_labels
        risk_b = float(np.mean((bayes_scores >= 0).astype(int) != gold))
        risk_c = float(np.mean((ci_scores >= 0).astype(int) != gold))
        se = lambda r: float(np.sqrt(r * (1 - r) / n)) if n > 1 else float("nan")
        rows.append({
            "K": int(k),
            "risk_bayes": risk_b,
            "risk_ci": risk_c,
            "sep": risk_c - risk_b,
            "se_bayes": se(risk_b),
            "se_ci": se(risk_c),
        })
    return rows


def factor_to_ising(p: MultiFactorParams, epsilon: float, y: int) -> tuple[np.ndarray, np.ndarray]:
    """Second-order reduction of a weak-loading factor model to Ising form.

    With loadings eps * base, the couplings are the off-diagonal entries of
    the scaled Gram matrix (rank <= r) and the fields pick up the
    second-order corrections h_j = eta_j + (1/2 - p_j)||lam_j||^2
    - sum_{k != j} p_k lam_j . lam_k with p_j = sigma(eta_j).
    """
    lam = epsilon * p.loadings
    eta = p.eta(y)
    pj = expit(eta)
    gram = lam @ lam.T
    w = gram.copy()
    np.fill_diagonal(w, 0.0)
    sq = np.diag(gram)
    h = eta + (0.5 - pj) * sq - (w @ pj)
    return h, w


def factor_log_lik(p: MultiFactorParams, votes: np.ndarray, y: int) -> np.ndarray:
    """Exact (quadrature) log Pr(J | Y=y) per item for the rank-1 model."""
    if p.rank != 1:
        raise ValueError("quadrature evidence implemented for rank-1 loadings only")
    votes = np.asarray(votes, dtype=float)
    lam = p.loadings[:, 0]
    return _quad_scores(votes, p.eta(y), lam)


def _quad_scores(votes: np.ndarray, eta0: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """log sum_q wq prod_j Bern(J_j; sigma(eta0_j + lam_j z_q)) per item.

    Decomposes votes @ eta.T over the node grid: the per-node logits are
    eta0_j + lam_j z_q, so the item-dependent part needs only two matvecs.
    """
    base = votes @ eta0           # (n,)
    load = votes @ lam            # (n,)
    eta = eta0[None, :] + np.outer(_ZQ, lam)        # (Q, K)
    norm = np.logaddexp(0.0, eta).sum(axis=1)       # (Q,)
    scores = base[:, None] + np.outer(load, _ZQ) - norm[None, :]
    return logsumexp(scores + _LOG_WQ[None, :], axis=1)


def posterior_predict(p: MultiFactorParams, v: VoteMatrix) -> PosteriorVector:
    votes = v.votes.astype(float)
    l0 = factor_log_lik(p, votes, 0)
    l1 = factor_log_lik(p, votes, 1)
    return PosteriorVector(expit(np.log(p.pi / (1.0 - p.pi)) + l1 - l0))


@dataclass
class FactorEMFit:
    params: MultiFactorParams
    posterior: PosteriorVector
    trace: EMTrace


def em_fit_factor(v: VoteMatrix, r: int = 1, config: EMConfig = EMConfig()) -> FactorEMFit:
    """Quadrature EM for the rank-1 per-judge factor model.

    The E-step scores both classes with 61-node quadrature evidence (the
    factor scale is fixed to sigma_Z = 1 and absorbed into the loadings).
    The M-step maximizes the node-responsibility minorizer of the weighted
    quadrature log-likelihood: per judge, a concave 3-parameter weighted
    logistic problem solved by safeguarded Newton steps. The surrogate
    mixture objective is non-decreasing across iterations. Loadings are
    canonicalized to non-negative total sign.
    """
    if r != 1:
        raise ValueError("only rank r=1 fitting is supported")
    if v.n < 2:
        raise ValueError("em_fit_factor requires at least 2 items")
    votes = v.votes.astype(float)

    best = None
    for stream, strategy in enumerate(INIT_STRATEGIES):
        if strategy == "ci":
            gamma0 = np.clip(em_fit_ci(v, config).posterior.gamma, 1e-3, 1 - 1e-3)
        else:
            gamma0 = init_gamma(votes, config.seed, strategy, stream=0 if strategy == "majority" else stream)
        run = _factor_em_run(votes, gamma0, config, strategy)
        if best is None or run[0] > best[0] + RESTART_MARGIN * abs(best[0]):
            best = run
    _, gamma, params, trace = best

    if params.loadings[:, 0].sum() < 0:
        params = MultiFactorParams(a=params.a, b=params.b, loadings=-params.loadings, pi=params.pi)
    alpha, beta = _implied_rates(params)
    if resolve_flip(float(judge_weights(alpha, beta).sum()), params.pi):
        params = params.flipped()
        gamma = 1.0 - gamma
        trace.flipped = True
    return FactorEMFit(params=params, posterior=PosteriorVector(gamma), trace=trace)


def _implied_rates(p: MultiFactorParams) -> tuple[np.ndarray, np.ndarray]:
    lam = p.loadings[:, 0]
    eps = 1e-9
    wq = np.exp(_LOG_WQ)
    alpha = wq @ expit(p.eta(1)[None, :] + np.outer(_ZQ, lam))
    m0 = wq @ expit(p.eta(0)[None, :] + np.outer(_ZQ, lam))
    return np.clip(alpha, eps, 1 - eps), np.clip(1.0 - m0, eps, 1 - eps)


def _factor_em_run(votes, gamma0, config, strategy):
    n, k = votes.shape
    gamma = gamma0.copy()
    a = np.zeros(k)
    b = np.zeros(k)
    # Small positive loading init: breaks the lam = 0 stationary point while
    # staying below the noise floor, so a null factor is not inflated.
    lam = 0.05 * np.ones(k)
    trace = EMTrace(init_used=strategy)
    prev_obj = -np.inf
    pi = float(gamma.mean())
    for _ in range(config.max_iters):
        pi = float(gamma.mean())
        a, b, lam = _mstep_newton(votes, gamma, a, b, lam)
        l0 = _quad_scores(votes, b, lam)
        l1 = _quad_scores(votes, a + b, lam)
        gamma = expit(np.log(pi / (1.0 - pi)) + l1 - l0)
        ll = float(logsumexp(np.stack([np.log(pi) + l1, np.log1p(-pi) + l0]), axis=0).sum())
        trace.loglik.append(ll)
        trace.objective.append(ll)
        trace.n_iters += 1
        if relative_change(ll, prev_obj) < config.tol:
            trace.converged = True
            break
        prev_obj = ll
    params = MultiFactorParams(a=a, b=b, loadings=lam[:, None], pi=pi)
    return trace.objective[-1], gamma, params, trace


def _mstep_newton(votes, gamma, a, b, lam, n_steps: int = 12):
    """Improve the weighted quadrature log-likelihood via its node minorizer.

    Node responsibilities R are computed once at the current parameters; the
    resulting bound is, for each judge, a weighted logistic log-likelihood in
    (a_j, b_j, lam_j) with node-level weights shared across judges. Newton
    steps with halving keep the bound (and hence the objective) from
    decreasing.
    """
    n, k = votes.shape
    g = np.stack([1.0 - gamma, gamma], axis=1)          # (n, 2)
    theta = np.stack([a, b, lam], axis=1)               # (K, 3)
    c = np.zeros((2, QUAD_NODES))                        # sum_i g R per node
    d = np.zeros((2, k, QUAD_NODES))                     # sum_i g R J per node/judge
    for y in (0, 1):
        eta0 = a * y + b
        base = votes @ eta0
        load = votes @ lam
        eta = eta0[None, :] + np.outer(_ZQ, lam)         # (Q, K)
        norm = np.logaddexp(0.0, eta).sum(axis=1)
        scores = base[:, None] + np.outer(load, _ZQ) - norm[None, :] + _LOG_WQ[None, :]
        scores -= logsumexp(scores, axis=1)[:, None]
        R = np.exp(scores)                               # (n, Q)
        gw = g[:, y][:, None] * R
        c[y] = gw.sum(axis=0)
        d[y] = votes.T @ gw                              # (K, Q)

    x = np.stack([
        np.concatenate([np.zeros(QUAD_NODES), np.ones(QUAD_NODES)]),   # y feature
        np.ones(2 * QUAD_NODES),                                       # intercept
        np.tile(_ZQ, 2),                                               # node value
    ], axis=1)                                                          # (2Q, 3)
    cw = np.concatenate([c[0], c[1]])                                   # (2Q,)
    dw = np.concatenate([d[0], d[1]], axis=1)                           # (K, 2Q)

    def bound(th):
        eta = th @ x.T                                                  # (K, 2Q)
        return np.sum(dw * eta, axis=1) - np.logaddexp(0.0, eta) @ cw

    cur = bound(theta)
    for _ in range(n_steps):
        eta = theta @ x.T
        sig = expit(eta)
        grad = (dw - cw[None, :] * sig) @ x                             # (K, 3)
        wts = cw[None, :] * sig * (1.0 - sig)                           # (K, 2Q)
        hess = np.einsum("kq,qa,qb->kab", wts, x, x)
        hess += 1e-9 * np.eye(3)[None, :, :]
        step = np.linalg.solve(hess, grad[:, :, None])[:, :, 0]
        new = theta + step
        val = bound(new)
        shrink = val < cur
        tries = 0
        while np.any(shrink) and tries < 30:
            step[shrink] *= 0.5
            new = theta + step
            val = bound(new)
            shrink = val < cur
            tries += 1
        improved = val >= cur
        theta[improved] = new[improved]
        cur = np.maximum(cur, val)
        if np.max(np.abs(grad)) < 1e-8:
            break
    return theta[:, 0].copy(), theta[:, 1].copy(), theta[:, 2].copy()
