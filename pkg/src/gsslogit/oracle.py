"""Exact-enumeration oracle, posterior-ratio traces and theory-condition reports.

With the latent responses y and scales s² held fixed, selection reduces to a
Gaussian linear model in which β integrates out in closed form:
y | Z=k ~ N(0, τ² X_k X_kᵀ + W⁻¹). For small r every model can be scored.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, logsumexp

from .core import GroupedDesign, Hyperparams, InitPolicy, PosteriorDraws
from .distributions import cholesky

MAX_ENUM_GROUPS = 12


class EnumerationSizeError(ValueError):
    pass


@dataclass
class EnumeratedPosterior:
    models: list[tuple[int, ...]]
    log_marginals: np.ndarray
    probs: np.ndarray
    q: float

    def prob_of(self, model) -> float:
        return float(self.probs[self.models.index(tuple(sorted(model)))])

    def inclusion(self, r: int) -> np.ndarray:
        out = np.zeros(r)
        for m, pr in zip(self.models, self.probs):
            out[list(m)] += pr
        return out


def all_models(r: int) -> list[tuple[int, ...]]:
    return [m for size in range(r + 1) for m in itertools.combinations(range(r), size)]


def log_marginal_dense(design: GroupedDesign, y, s2, tau2: float, model) -> float:
    """log N(y; 0, τ² X_k X_kᵀ + W⁻¹) from the n×n covariance directly."""
    y = np.asarray(y, dtype=float)
    cov = np.diag(np.asarray(s2, dtype=float))
    cols = design.support(model)
    if cols.any():
        xk = design.x[:, cols]
        cov = cov + tau2 * xk @ xk.T
    low = cholesky(cov)
    v = np.linalg.solve(low, y)
    return float(-0.5 * y.size * math.log(2 * math.pi) - np.sum(np.log(np.diag(low))) - 0.5 * v @ v)


def log_marginal_factored(design: GroupedDesign, y, s2, tau2: float, model) -> float:
    """Same quantity through the |G_k|-dimensional matrix X_kᵀWX_k + I/τ²."""
    y = np.asarray(y, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    wts = 1.0 / s2
    n = y.size
    base = -0.5 * n * math.log(2 * math.pi) - 0.5 * np.sum(np.log(s2)) - 0.5 * float(y @ (wts * y))
    cols = design.support(model)
    pk = int(cols.sum())
    if pk == 0:
        return float(base)
    xk = design.x[:, cols]
    inner = xk.T @ (wts[:, None] * xk) + np.eye(pk) / tau2
    low = cholesky(inner)
    v = np.linalg.solve(low, xk.T @ (wts * y))
    # det(W⁻¹ + τ²X_kX_kᵀ) = det(W⁻¹) τ^{2 p_k} det(X_kᵀWX_k + I/τ²)
    logdet_extra = 0.5 * pk * math.log(tau2) + np.sum(np.log(np.diag(low)))
    return float(base - logdet_extra + 0.5 * v @ v)


def enumerate_posterior(design: GroupedDesign, y_fixed, s2_fixed, hyper: Hyperparams) -> EnumeratedPosterior:
    """Exact posterior over all 2^r group subsets with y and W frozen."""
    r = design.r
    if r > MAX_ENUM_GROUPS:
        raise EnumerationSizeError(f"r = {r} exceeds the enumeration limit of {MAX_ENUM_GROUPS}")
    models = all_models(r)
    cap = hyper.max_model_groups
    lm = np.array([log_marginal_factored(design, y_fixed, s2_fixed, hyper.tau2, m) for m in models])
    log_prior = np.array(
        [len(m) * math.log(hyper.q) + (r - len(m)) * math.log1p(-hyper.q) for m in models]
    )
    if cap is not None:
        log_prior[[len(m) > cap for m in models]] = -np.inf
    logpost = lm + log_prior
    probs = np.exp(logpost - logsumexp(logpost))
    return EnumeratedPosterior(models=models, log_marginals=lm, probs=probs, q=hyper.q)


def model_frequencies(z_draws: np.ndarray) -> Counter:
    return Counter(tuple(int(j) for j in np.flatnonzero(row)) for row in np.asarray(z_draws))


def total_variation(freq: Counter, target: EnumeratedPosterior) -> float:
    total = sum(freq.values())
    emp = np.array([freq.get(m, 0) / total for m in target.models])
    return 0.5 * float(np.abs(emp - target.probs).sum())


def compare_chain_to_oracle(
    engine: str,
    design: GroupedDesign,
    y_fixed,
    s2_fixed,
    hyper: Hyperparams,
    n_sweeps: int,
    seed: int = 0,
    init: Optional[InitPolicy] = None,
) -> float:
    """Total-variation distance between a frozen-(y, W) chain's model frequencies and the exact posterior."""
    from .sampler_gibbs import initial_state, run_gibbs_fixed
    from .sampler_neuronized import run_neuronized_fixed

    target = enumerate_posterior(design, y_fixed, s2_fixed, hyper)
    init = init or InitPolicy(n_active=min(3, design.r))
    if n_sweeps == 0:
        z0 = initial_state(design, np.zeros(design.n), hyper, init, np.random.default_rng(seed)).z
        return total_variation(model_frequencies(z0[None, :]), target)
    if engine == "gibbs":
        draws = run_gibbs_fixed(design, y_fixed, s2_fixed, hyper, n_sweeps, seed=seed, init=init)
    elif engine == "neuronized":
        draws = run_neuronized_fixed(design, y_fixed, s2_fixed, hyper, n_sweeps, seed=seed, init=init)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return total_variation(model_frequencies(draws.z_draws), target)


# ---------------------------------------------------------------- posterior ratios


@dataclass
class PosteriorRatioTrace:
    true_model: tuple[int, ...]
    true_prob: float
    ratios: dict
    true_visited: bool

    def superset_mass(self, freq_total: Optional[float] = None) -> float:
        t = set(self.true_model)
        return float(sum(v for k, v in self.ratios.items() if set(k) > t) * self.true_prob)


def posterior_ratio_trace(draws: PosteriorDraws, true_model) -> PosteriorRatioTrace:
    """Empirical π(Z=k|E)/π(Z=t|E) for every visited model k ≠ t."""
    freq = model_frequencies(draws.z_draws)
    total = sum(freq.values())
    t = tuple(sorted(int(j) for j in true_model))
    ft = freq.get(t, 0)
    ratios = {}
    for k, c in freq.items():
        if k == t:
            continue
        ratios[k] = c / ft if ft else math.inf
    return PosteriorRatioTrace(true_model=t, true_prob=ft / total if total else 0.0, ratios=ratios, true_visited=ft > 0)


# ---------------------------------------------------------------- condition report


@dataclass
class ConditionReport:
    m_n: float
    lambda_hat: float
    Lambda_hat: float
    beta_min_lhs: float
    beta_min_rhs: float
    c0_ratio: float
    tau2_rule_ok: bool
    q_rule_ok: bool
    true_size_ok: bool
    d: float
    d_prime: float
    n_probe: int

    def as_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in asdict(self).items()}


def effective_dimension(n: int, r: int, p: int, d_prime: float) -> float:
    return min((n / math.log(r)) ** ((1.0 - d_prime) / 2.0), float(p))


def _random_model(r: int, max_cols: float, sizes: np.ndarray, base: tuple, rng) -> list[int]:
    chosen = list(base)
    cols = int(sizes[chosen].sum()) if chosen else 0
    for j in rng.permutation(r):
        if j in chosen:
            continue
        if cols + sizes[j] > max_cols:
            continue
        if rng.random() < 0.5:
            chosen.append(int(j))
            cols += int(sizes[j])
    return chosen


def condition_report(dataset, hyper: Hyperparams, d: float = 0.0, d_prime: float = 1.0, n_probe: int = 2000, seed: int = 0, delta: float = 0.01) -> ConditionReport:
    """Measurable pieces of the selection-consistency conditions for a simulated dataset.

    λ̂ and Λ̂ are sampled bounds: extremes over ``n_probe`` random models of
    bounded size, not the exact combinatorial optimum.
    """
    if not (0 <= d < (1 + d) / 2 <= d_prime <= 1):
        raise ValueError("need 0 <= d < (1+d)/2 <= d' <= 1")
    design = dataset.design
    n, r, p = design.n, design.r, design.p
    sizes = design.sizes
    t = tuple(dataset.true_model)
    size_t_cols = int(sizes[list(t)].sum()) if t else 0
    m_n = effective_dimension(n, r, p, d_prime)
    max_cols = m_n + size_t_cols
    beta0 = np.asarray(dataset.beta0, dtype=float)
    mu = expit(np.asarray(dataset.x_raw) @ beta0)
    sig = mu * (1.0 - mu)
    rng = np.random.default_rng(seed)
    lam_min, lam_max = math.inf, 0.0
    for _ in range(n_probe):
        k = _random_model(r, max_cols, sizes, (), rng)
        if not k:
            continue
        cols = design.support(k)
        xk = design.x[:, cols]
        lam_min = min(lam_min, float(np.linalg.eigvalsh(xk.T @ (sig[:, None] * xk) / n)[0]))
    max_groups = max(1, len(t))
    for _ in range(n_probe):
        k = list(rng.choice(r, size=rng.integers(1, max_groups + 1), replace=False))
        xk = design.x[:, design.support(k)]
        lam_max = max(lam_max, float(np.linalg.eigvalsh(xk.T @ xk / n)[-1]))
    if t:
        xt = design.x[:, design.support(t)]
        lam_max = max(lam_max, float(np.linalg.eigvalsh(xt.T @ xt / n)[-1]))
    if not math.isfinite(lam_min):
        lam_min = 0.0
    lam_min = min(lam_min, lam_max)
    lhs = min(float(beta0[design.groups[j]] @ beta0[design.groups[j]]) for j in t) if t else math.inf
    rhs = size_t_cols * lam_max * math.log(r) / n
    tau2_target = max(1.0, r ** (2.0 + 2.0 * delta) / n)
    return ConditionReport(
        m_n=m_n,
        lambda_hat=lam_min,
        Lambda_hat=lam_max,
        beta_min_lhs=lhs,
        beta_min_rhs=rhs,
        c0_ratio=lhs / rhs if rhs > 0 else math.inf,
        tau2_rule_ok=bool(1e-2 <= hyper.tau2 / tau2_target <= 1e2),
        q_rule_ok=bool(0.1 <= hyper.q * r <= 10.0),
        true_size_ok=bool(size_t_cols <= m_n),
        d=d,
        d_prime=d_prime,
        n_probe=n_probe,
    )
