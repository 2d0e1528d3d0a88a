"""Data-augmented Gibbs sampler with group indicators integrated out of the β step.

A sweep updates the latent responses, then the mixture scales, then for
each group the indicator (with the group's coefficients marginalized) followed
by the coefficients themselves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .core import ChainState, GroupedDesign, Hyperparams, IllConditionedError, InitPolicy, PosteriorDraws
from .distributions import bernoulli_from_log_odds, cholesky, sample_inverse_gamma, sample_truncated_normal


class SamplerError(RuntimeError):
    """Numerical failure inside a chain, tagged with the iteration it happened at."""

    def __init__(self, iteration: int, cause: Exception):
        super().__init__(f"iteration {iteration}: {cause}")
        self.iteration = iteration
        self.cause = cause


# ---------------------------------------------------------------- shared latent updates


def truncation_bounds(e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(e)
    lower = np.where(e == 1, 0.0, -np.inf)
    upper = np.where(e == 1, np.inf, 0.0)
    return lower, upper


def draw_latent_y(eta, s2, e, rng) -> np.ndarray:
    lower, upper = truncation_bounds(e)
    return sample_truncated_normal(eta, np.sqrt(s2), lower, upper, rng)


def draw_scales(resid, hyper: Hyperparams, rng) -> np.ndarray:
    shape = 0.5 * (1.0 + hyper.nu)
    scale = 0.5 * (np.square(resid) + hyper.sigma02 * hyper.nu)
    return sample_inverse_gamma(shape, scale, rng)


def step_latent_y(state: ChainState, design: GroupedDesign, e, rng) -> np.ndarray:
    """Latent responses from N(x_iᵀβ, s_i²) truncated to the side given by E_i."""
    state.y = draw_latent_y(design.x @ state.beta, state.s2, e, rng)
    return state.y


def step_scales(state: ChainState, design: GroupedDesign, hyper: Hyperparams, rng) -> np.ndarray:
    """Mixture scales s_i² ~ InvGamma((1+ν)/2, ((y_i - x_iᵀβ)² + σ₀²ν)/2)."""
    state.s2 = draw_scales(state.y - design.x @ state.beta, hyper, rng)
    return state.s2


# ---------------------------------------------------------------- group updates


@dataclass
class GroupConditional:
    """Pieces of group j's collapsed conditional given everything else."""

    log_odds: float
    mean: np.ndarray
    chol_precision: np.ndarray


def group_conditional(state: ChainState, design: GroupedDesign, hyper: Hyperparams, j: int) -> GroupConditional:
    g = design.groups[j]
    xg = design.x[:, g]
    wts = 1.0 / state.s2
    beta_minus = state.beta.copy()
    beta_minus[g] = 0.0
    partial = state.y - design.x @ beta_minus
    prec = xg.T @ (wts[:, None] * xg) + np.eye(g.size) / hyper.tau2
    low = cholesky(prec)
    v = solve_triangular(low, xg.T @ (wts * partial), lower=True)
    log_odds = (
        hyper.log_prior_odds
        - 0.5 * g.size * math.log(hyper.tau2)
        - np.sum(np.log(np.diag(low)))
        + 0.5 * float(v @ v)
    )
    mean = solve_triangular(low, v, lower=True, trans="T")
    return GroupConditional(log_odds=float(log_odds), mean=mean, chol_precision=low)


def step_group_indicator(state: ChainState, design: GroupedDesign, hyper: Hyperparams, j: int, rng) -> int:
    """Draw z_j with β_{G_j} integrated out; log-odds are formed in log space."""
    cond = group_conditional(state, design, hyper, j)
    z = bernoulli_from_log_odds(cond.log_odds, rng)
    cap = hyper.max_model_groups
    if cap is not None and int(state.z.sum() - state.z[j]) + 1 > cap:
        z = 0
    state.z[j] = z
    return z


def step_group_beta(state: ChainState, design: GroupedDesign, hyper: Hyperparams, j: int, rng) -> np.ndarray:
    """β_{G_j} = 0 when z_j = 0, else a draw from N(μ_{G_j}, Σ_{G_j})."""
    g = design.groups[j]
    if state.z[j] == 0:
        state.beta[g] = 0.0
    else:
        cond = group_conditional(state, design, hyper, j)
        eps = rng.standard_normal(g.size)
        state.beta[g] = cond.mean + solve_triangular(cond.chol_precision, eps, lower=True, trans="T")
    return state.beta[g]


# ---------------------------------------------------------------- chains


def initial_state(design: GroupedDesign, e, hyper: Hyperparams, init: InitPolicy, rng) -> ChainState:
    z = init.choose(design.r, rng)
    beta = np.zeros(design.p)
    for j in np.flatnonzero(z):
        g = design.groups[j]
        beta[g] = init.beta_sd * rng.standard_normal(g.size)
    y = np.where(np.asarray(e) == 1, 1.0, -1.0)
    s2 = np.full(design.n, hyper.sigma02 * hyper.nu / (hyper.nu - 2.0))
    return ChainState(beta=beta, z=z, y=y, s2=s2)


class GibbsChain:
    """Compiled-path Gibbs chain holding the incrementally maintained residual y - Xβ."""

    def __init__(self, design: GroupedDesign, e, hyper: Hyperparams, state: ChainState, refresh_every: int = 100):
        self.design = design
        self.e = np.asarray(e)
        self.hyper = hyper
        self.refresh_every = refresh_every
        self._x = design.x_grouped
        self._order = design.order
        self._cap = -1 if hyper.max_model_groups is None else int(hyper.max_model_groups)
        self._sweep_order = np.arange(design.r, dtype=np.int64)
        self.z = state.z.astype(np.int64).copy()
        self.beta_g = state.beta[self._order].copy()
        self.y = state.y.astype(float).copy()
        self.s2 = state.s2.astype(float).copy()
        self.eta = self._x @ self.beta_g
        self.res = self.y - self.eta
        self.sweeps = 0

    @property
    def state(self) -> ChainState:
        beta = np.empty(self.design.p)
        beta[self._order] = self.beta_g
        return ChainState(beta=beta, z=self.z.copy(), y=self.y.copy(), s2=self.s2.copy())

    @property
    def beta(self) -> np.ndarray:
        return self.state.beta

    def residual_drift(self) -> float:
        """Max relative gap between the tracked residual and y - Xβ recomputed from scratch."""
        fresh = self.y - self._x @ self.beta_g
        return float(np.max(np.abs(fresh - self.res)) / max(1.0, np.max(np.abs(fresh))))

    def set_sweep_order(self, order) -> None:
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(self.design.r)):
            raise ValueError("sweep order must be a permutation of the groups")
        self._sweep_order = order

    def group_sweep(self, rng) -> None:
        _kernels.gibbs_group_sweep(
            self._x,
            self.design.starts,
            self.design.sizes,
            1.0 / self.s2,
            self.res,
            self.beta_g,
            self.z,
            self.hyper.log_prior_odds,
            self.hyper.tau2,
            self._cap,
            self._sweep_order,
            rng,
        )

    def sweep(self, rng) -> None:
        if self.sweeps % self.refresh_every == 0:
            self.eta = self._x @ self.beta_g
        else:
            self.eta = self.y - self.res
        self.y = draw_latent_y(self.eta, self.s2, self.e, rng)
        self.s2 = draw_scales(self.y - self.eta, self.hyper, rng)
        self.res = self.y - self.eta
        self.group_sweep(rng)
        self.sweeps += 1


def _run_chain(chain, n_burnin: int, n_samples: int, rng, store_beta: bool, step):
    if n_burnin < 0 or n_samples < 0:
        raise ValueError("n_burnin and n_samples must be nonnegative")
    r, p = chain.design.r, chain.design.p
    z_draws = np.zeros((n_samples, r), dtype=np.int8)
    beta_draws = np.zeros((n_samples, p)) if store_beta else None
    for it in range(n_burnin + n_samples):
        try:
            step(rng)
        except (np.linalg.LinAlgError, IllConditionedError, FloatingPointError) as exc:
            raise SamplerError(it, exc) from exc
        k = it - n_burnin
        if k >= 0:
            z_draws[k] = chain.z
            if store_beta:
                beta_draws[k] = chain.beta
    return z_draws, beta_draws


def run_gibbs(
    design: GroupedDesign,
    e,
    hyper: Hyperparams,
    n_burnin: int = 2000,
    n_samples: int = 2000,
    init: Optional[InitPolicy] = None,
    seed: int = 0,
    store_beta: bool = True,
    refresh_every: int = 100,
) -> PosteriorDraws:
    """Run the Gibbs engine and keep the post-burn-in indicators (and coefficients)."""
    e = np.asarray(e)
    if e.shape != (design.n,) or not np.all((e == 0) | (e == 1)):
        raise ValueError("e must be a 0/1 vector with one entry per row")
    rng = np.random.default_rng(seed)
    state = initial_state(design, e, hyper, init or InitPolicy(), rng)
    chain = GibbsChain(design, e, hyper, state, refresh_every=refresh_every)
    z_draws, beta_draws = _run_chain(chain, n_burnin, n_samples, rng, store_beta, chain.sweep)
    return PosteriorDraws(z_draws=z_draws, beta_draws=beta_draws, seed=seed, n_burnin=n_burnin, engine="gibbs")


def run_gibbs_fixed(
    design: GroupedDesign,
    y,
    s2,
    hyper: Hyperparams,
    n_sweeps: int,
    seed: int = 0,
    init: Optional[InitPolicy] = None,
) -> PosteriorDraws:
    """(z, β) updates only, with y and the scales frozen: a Gaussian-model selection chain."""
    rng = np.random.default_rng(seed)
    e = (np.asarray(y) >= 0).astype(np.int64)
    state = initial_state(design, e, hyper, init or InitPolicy(), rng)
    state.y = np.asarray(y, dtype=float).copy()
    state.s2 = np.asarray(s2, dtype=float).copy()
    chain = GibbsChain(design, e, hyper, state)
    z_draws, _ = _run_chain(chain, 0, n_sweeps, rng, False, chain.group_sweep)
    return PosteriorDraws(z_draws=z_draws, seed=seed, n_burnin=0, engine="gibbs")
