"""Neuronized reparameterization: β_{G_j} = 1(α_j ≥ α₀) w_{G_j}.

Each iteration draws the full weight vector jointly, then each group's scale
α_j from a two-piece truncated normal, then the latent responses and scales.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.special import log_ndtr

from . import _kernels
from .core import ChainState, GroupedDesign, Hyperparams, InitPolicy, PosteriorDraws
from .distributions import bernoulli_from_log_odds, sample_gaussian_posterior, sample_truncated_normal
from .sampler_gibbs import _run_chain, draw_latent_y, draw_scales


def activation_mask(alpha, design: GroupedDesign, alpha0: float) -> np.ndarray:
    """Per-coordinate 0/1 mask repeating 1(α_j ≥ α₀) over group j's columns."""
    on = (np.asarray(alpha) >= alpha0).astype(float)
    return on[design.group_of]


def kappa_logit(alpha0: float, quad_diff: float) -> float:
    """Log-odds of the inactive component, given (r_j - X_g w_g)ᵀW(...) - r_jᵀWr_j."""
    return float(log_ndtr(alpha0) - log_ndtr(-alpha0) + 0.5 * quad_diff)


def draw_alpha_given_side(active, alpha0: float, rng) -> np.ndarray:
    active = np.asarray(active, dtype=bool)
    lower = np.where(active, alpha0, -np.inf)
    upper = np.where(active, np.inf, alpha0)
    return np.atleast_1d(sample_truncated_normal(0.0, 1.0, lower, upper, rng))


def draw_weights(x, mask, y, s2, tau2: float, rng, fast_above: Optional[int] = None) -> np.ndarray:
    sw = np.sqrt(1.0 / np.asarray(s2))
    phi = (sw[:, None] * x) * mask[None, :]
    d = np.full(x.shape[1], tau2)
    return sample_gaussian_posterior(phi, d, sw * y, rng, fast_above=fast_above)


def step_weights(state: ChainState, design: GroupedDesign, hyper: Hyperparams, rng, fast_above=None) -> np.ndarray:
    """Joint draw of w from its Gaussian conditional given α, W and y."""
    mask = activation_mask(state.alpha, design, hyper.alpha0)
    state.w = draw_weights(design.x, mask, state.y, state.s2, hyper.tau2, rng, fast_above)
    state.beta = mask * state.w
    return state.w


def step_alpha(state: ChainState, design: GroupedDesign, hyper: Hyperparams, j: int, rng) -> float:
    """Draw α_j from κ N_tr(0,1; -∞, α₀) + (1-κ) N_tr(0,1; α₀, ∞)."""
    a0 = hyper.alpha0
    g = design.groups[j]
    wts = 1.0 / state.s2
    v = design.x[:, g] @ state.w[g]
    beta = activation_mask(state.alpha, design, a0) * state.w
    r_j = state.y - design.x @ beta + (state.alpha[j] >= a0) * v
    quad_diff = float(v @ (wts * v) - 2.0 * v @ (wts * r_j))
    inactive = bernoulli_from_log_odds(kappa_logit(a0, quad_diff), rng)
    state.alpha[j] = draw_alpha_given_side([not inactive], a0, rng)[0]
    state.z[j] = int(state.alpha[j] >= a0)
    state.beta = activation_mask(state.alpha, design, a0) * state.w
    return state.alpha[j]


def initial_state(design: GroupedDesign, e, hyper: Hyperparams, init: InitPolicy, rng) -> ChainState:
    z = init.choose(design.r, rng)
    a0 = hyper.alpha0
    alpha = np.where(z == 1, a0 + init.alpha_offset, a0 - init.alpha_offset)
    w = init.beta_sd * rng.standard_normal(design.p)
    y = np.where(np.asarray(e) == 1, 1.0, -1.0)
    s2 = np.full(design.n, hyper.sigma02 * hyper.nu / (hyper.nu - 2.0))
    beta = activation_mask(alpha, design, a0) * w
    return ChainState(beta=beta, z=z.astype(np.int64), y=y, s2=s2, alpha=alpha, w=w)


class NeuronizedChain:
    def __init__(self, design: GroupedDesign, e, hyper: Hyperparams, state: ChainState, fast_above=None):
        self.design = design
        self.e = np.asarray(e)
        self.hyper = hyper
        self.fast_above = fast_above
        self.alpha0 = hyper.alpha0
        self._x = design.x_grouped
        self._order = design.order
        self._group_of = design.group_of[self._order]
        self._logit_base = float(log_ndtr(self.alpha0) - log_ndtr(-self.alpha0))
        self.alpha = state.alpha.astype(float).copy()
        self.w_g = state.w[self._order].copy()
        self.y = state.y.astype(float).copy()
        self.s2 = state.s2.astype(float).copy()
        self.res = self.y - self._x @ (self.mask * self.w_g)
        self.iterations = 0

    @property
    def z(self) -> np.ndarray:
        return (self.alpha >= self.alpha0).astype(np.int64)

    @property
    def mask(self) -> np.ndarray:
        return self.z.astype(float)[self._group_of]

    @property
    def beta(self) -> np.ndarray:
        beta = np.empty(self.design.p)
        beta[self._order] = self.mask * self.w_g
        return beta

    @property
    def state(self) -> ChainState:
        w = np.empty(self.design.p)
        w[self._order] = self.w_g
        return ChainState(
            beta=self.beta, z=self.z, y=self.y.copy(), s2=self.s2.copy(), alpha=self.alpha.copy(), w=w
        )

    def residual_drift(self) -> float:
        fresh = self.y - self._x @ (self.mask * self.w_g)
        return float(np.max(np.abs(fresh - self.res)) / max(1.0, np.max(np.abs(fresh))))

    def scale_sweep(self, rng) -> None:
        """w draw, residual refresh, then the sequential α_j updates."""
        mask = self.mask
        self.w_g = draw_weights(self._x, mask, self.y, self.s2, self.hyper.tau2, rng, self.fast_above)
        self.res = self.y - self._x @ (mask * self.w_g)
        active = self.z.copy()
        _kernels.neuronized_alpha_components(
            self._x,
            self.design.starts,
            self.design.sizes,
            1.0 / self.s2,
            self.res,
            self.w_g,
            active,
            self._logit_base,
            rng,
        )
        self.alpha = draw_alpha_given_side(active, self.alpha0, rng)

    def sweep(self, rng) -> None:
        self.scale_sweep(rng)
        eta = self.y - self.res
        self.y = draw_latent_y(eta, self.s2, self.e, rng)
        self.s2 = draw_scales(self.y - eta, self.hyper, rng)
        self.res = self.y - eta
        self.iterations += 1


def run_neuronized(
    design: GroupedDesign,
    e,
    hyper: Hyperparams,
    n_burnin: int = 2000,
    n_samples: int = 2000,
    init: Optional[InitPolicy] = None,
    seed: int = 0,
    store_beta: bool = True,
    fast_above: Optional[int] = None,
) -> PosteriorDraws:
    """Run the neuronized engine; Z_j is recorded as 1(α_j ≥ α₀) at the end of each sweep."""
    e = np.asarray(e)
    if e.shape != (design.n,) or not np.all((e == 0) | (e == 1)):
        raise ValueError("e must be a 0/1 vector with one entry per row")
    rng = np.random.default_rng(seed)
    state = initial_state(design, e, hyper, init or InitPolicy(), rng)
    chain = NeuronizedChain(design, e, hyper, state, fast_above=fast_above)
    z_draws, beta_draws = _run_chain(chain, n_burnin, n_samples, rng, store_beta, chain.sweep)
    return PosteriorDraws(z_draws=z_draws, beta_draws=beta_draws, seed=seed, n_burnin=n_burnin, engine="neuronized")


def run_neuronized_fixed(
    design: GroupedDesign,
    y,
    s2,
    hyper: Hyperparams,
    n_sweeps: int,
    seed: int = 0,
    init: Optional[InitPolicy] = None,
    fast_above: Optional[int] = None,
) -> PosteriorDraws:
    """(w, α) updates only, with y and the scales frozen."""
    rng = np.random.default_rng(seed)
    e = (np.asarray(y) >= 0).astype(np.int64)
    state = initial_state(design, e, hyper, init or InitPolicy(), rng)
    state.y = np.asarray(y, dtype=float).copy()
    state.s2 = np.asarray(s2, dtype=float).copy()
    chain = NeuronizedChain(design, e, hyper, state, fast_above=fast_above)
    z_draws, _ = _run_chain(chain, 0, n_sweeps, rng, False, chain.scale_sweep)
    return PosteriorDraws(z_draws=z_draws, seed=seed, n_burnin=0, engine="neuronized")

