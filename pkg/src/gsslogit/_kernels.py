"""Compiled inner loops for the two samplers.

Columns are in grouped order: group j occupies ``starts[j]:starts[j]+sizes[j]``.
Random draws come from the caller's ``numpy.random.Generator`` so a chain
stays reproducible from its seed.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def sigmoid(t):
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@njit(cache=True)
def group_precision(x, s, k, wts, tau2):
    """X_gᵀ W X_g + I/τ² for the block starting at column s of width k."""
    n = x.shape[0]
    prec = np.zeros((k, k))
    for a in range(k):
        for c in range(a, k):
            acc = 0.0
            for i in range(n):
                acc += x[i, s + a] * wts[i] * x[i, s + c]
            prec[a, c] = acc
            prec[c, a] = acc
        prec[a, a] += 1.0 / tau2
    return prec


@njit(cache=True)
def group_score(x, s, k, wts, res, beta):
    """X_gᵀ W (res + X_g β_g), the data term of the group's conditional mean."""
    n = x.shape[0]
    b = np.zeros(k)
    for i in range(n):
        ri = res[i]
        for a in range(k):
            ri += x[i, s + a] * beta[s + a]
        wr = wts[i] * ri
        for a in range(k):
            b[a] += x[i, s + a] * wr
    return b


@njit(cache=True)
def forward_sub(low, b):
    k = b.shape[0]
    v = np.empty(k)
    for a in range(k):
        acc = b[a]
        for c in range(a):
            acc -= low[a, c] * v[c]
        v[a] = acc / low[a, a]
    return v


@njit(cache=True)
def backward_sub_t(low, v):
    """Solve Lᵀ x = v for lower-triangular L."""
    k = v.shape[0]
    x = np.empty(k)
    for a in range(k - 1, -1, -1):
        acc = v[a]
        for c in range(a + 1, k):
            acc -= low[c, a] * x[c]
        x[a] = acc / low[a, a]
    return x


@njit(cache=True)
def gibbs_group_sweep(x, starts, sizes, wts, res, beta, z, log_prior_odds, tau2, cap, order, rng):
    """One pass of (z_j, β_g) updates over the groups in ``order``.

    ``res`` holds y - Xβ and is kept current. ``cap`` < 0 disables the
    model-size cap. Returns the number of groups whose z changed.
    """
    n = x.shape[0]
    log_tau2 = math.log(tau2)
    n_on = 0
    for j in range(z.shape[0]):
        n_on += z[j]
    flips = 0
    for jj in range(order.shape[0]):
        j = order[jj]
        s = starts[j]
        k = sizes[j]
        prec = group_precision(x, s, k, wts, tau2)
        b = group_score(x, s, k, wts, res, beta)
        low = np.linalg.cholesky(prec)
        v = forward_sub(low, b)
        half_logdet_prec = 0.0
        quad = 0.0
        for a in range(k):
            half_logdet_prec += math.log(low[a, a])
            quad += v[a] * v[a]
        log_odds = log_prior_odds - 0.5 * k * log_tau2 - half_logdet_prec + 0.5 * quad
        u = rng.random()
        new_z = 1 if u < sigmoid(log_odds) else 0
        others = n_on - z[j]
        if cap >= 0 and others + 1 > cap:
            new_z = 0
        if new_z == 1:
            eps = rng.standard_normal(k)
            for a in range(k):
                v[a] += eps[a]
            new_beta = backward_sub_t(low, v)
        else:
            new_beta = np.zeros(k)
        for a in range(k):
            delta = new_beta[a] - beta[s + a]
            if delta != 0.0:
                for i in range(n):
                    res[i] -= x[i, s + a] * delta
            beta[s + a] = new_beta[a]
        if new_z != z[j]:
            flips += 1
        n_on += new_z - z[j]
        z[j] = new_z
    return flips


@njit(cache=True)
def neuronized_alpha_components(x, starts, sizes, wts, res, w, active, logit_base, rng):
    """Sequentially choose, for each group, which side of α₀ its scale falls on.

    ``res`` is r_e = y - X D_α w on entry and stays current. ``active`` is
    updated in place; ``logit_base`` = log Φ(α₀) - log(1 - Φ(α₀)).
    """
    n = x.shape[0]
    r = starts.shape[0]
    xw = np.empty(n)
    for j in range(r):
        s = starts[j]
        k = sizes[j]
        for i in range(n):
            acc = 0.0
            for a in range(k):
                acc += x[i, s + a] * w[s + a]
            xw[i] = acc
        # with r_j = r_e + [active] X_g w_g:
        # (r_j - X_g w_g)ᵀW(r_j - X_g w_g) - r_jᵀWr_j = vᵀWv - 2 vᵀW r_j
        vwv = 0.0
        vwr = 0.0
        on = active[j]
        for i in range(n):
            rj = res[i] + xw[i] if on else res[i]
            vwv += wts[i] * xw[i] * xw[i]
            vwr += wts[i] * xw[i] * rj
        logit_kappa = logit_base + 0.5 * (vwv - 2.0 * vwr)
        u = rng.random()
        new_on = 0 if u < sigmoid(logit_kappa) else 1
        if new_on != on:
            sign = 1.0 if on else -1.0
            for i in range(n):
                res[i] += sign * xw[i]
        active[j] = new_on
