"""Seeded sampling primitives shared by both samplers.

Every sampler takes an explicit ``numpy.random.Generator``; nothing here
touches global random state.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import lapack, solve_triangular
from scipy.special import expit, gammaln, ndtr, ndtri

from .core import IllConditionedError

# standardized bound beyond which inverse-CDF sampling hands over to rejection
TAIL_CUTOFF = 5.0


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def derive_seed(base: int, index: int) -> int:
    """Stable 63-bit child seed from a base seed and a replication index."""
    state = np.random.SeedSequence([int(base) & 0xFFFFFFFFFFFFFFFF, int(index)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


# ---------------------------------------------------------------- truncated normal


def _tail_exponential(a, b, rng):
    """Standard normal on [a, b] with a > 0 large, by exponential-proposal rejection."""
    out = np.empty(a.shape)
    todo = np.arange(a.size)
    lam = 0.5 * (a + np.sqrt(a * a + 4.0))
    # narrow windows: uniform proposal is more efficient than the exponential one
    narrow = -np.expm1(-lam * (b - a)) < 0.1
    while todo.size:
        aa, bb, ll, nn = a[todo], b[todo], lam[todo], narrow[todo]
        u = rng.random(todo.size)
        e = rng.standard_exponential(todo.size)
        x = np.where(nn, aa + (bb - aa) * rng.random(todo.size), aa + e / ll)
        log_acc = np.where(nn, 0.5 * (aa * aa - x * x), -0.5 * (x - ll) ** 2)
        ok = (np.log(u) <= log_acc) & (x <= bb)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def _standard_truncated(a, b, rng):
    z = np.empty(a.shape)
    left = a > TAIL_CUTOFF
    right = b < -TAIL_CUTOFF
    bulk = ~(left | right)
    if np.any(left):
        z[left] = _tail_exponential(a[left], b[left], rng)
    if np.any(right):
        z[right] = -_tail_exponential(-b[right], -a[right], rng)
    if np.any(bulk):
        ab, bb = a[bulk], b[bulk]
        u = rng.random(ab.size)
        # work on whichever side of zero keeps the CDF values away from 1
        upper_side = ab >= 0
        zb = np.empty(ab.size)
        sa, sb = ndtr(-ab[upper_side]), ndtr(-bb[upper_side])
        zb[upper_side] = -ndtri(sa - u[upper_side] * (sa - sb))
        la, lb = ndtr(ab[~upper_side]), ndtr(bb[~upper_side])
        zb[~upper_side] = ndtri(la + u[~upper_side] * (lb - la))
        z[bulk] = zb
    return z


def sample_truncated_normal(mean, sd, lower, upper, rng, size=None):
    """Draw from N(mean, sd²) restricted to the open interval (lower, upper).

    Arguments broadcast against each other (and ``size``). Inverse-CDF is used
    in the bulk; bounds more than ``TAIL_CUTOFF`` standard deviations into a
    tail use rejection, so extreme truncation still yields finite draws.
    """
    mean, sd, lower, upper = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (mean, sd, lower, upper))
    )
    if size is not None:
        mean, sd, lower, upper = (np.broadcast_to(v, size) for v in (mean, sd, lower, upper))
    if np.any(~(sd > 0)):
        raise ValueError("sd must be positive")
    if np.any(~(lower < upper)):
        raise ValueError("need lower < upper")
    shape = mean.shape
    m, s, lo, hi = (v.ravel() for v in (mean, sd, lower, upper))
    z = _standard_truncated((lo - m) / s, (hi - m) / s, rng)
    x = m + s * z
    x = np.clip(x, np.nextafter(lo, np.inf), np.nextafter(hi, -np.inf))
    x = x.reshape(shape)
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------- inverse gamma


def sample_inverse_gamma(shape, scale, rng, size=None):
    """Draw from the density proportional to x^(-shape-1) exp(-scale/x)."""
    shape = np.asarray(shape, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(~(shape > 0)) or np.any(~(scale > 0)):
        raise ValueError("inverse gamma needs shape > 0 and scale > 0")
    if size is None:
        size = np.broadcast_shapes(shape.shape, scale.shape)
    g = rng.standard_gamma(np.broadcast_to(shape, size), size=size)
    out = scale / g
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- Gaussians


def _failed_pivot(a: np.ndarray) -> float:
    """Diagonal pivot at which an unpivoted Cholesky of ``a`` breaks down."""
    a = np.array(a, dtype=float)
    k = a.shape[0]
    low = np.zeros_like(a)
    for j in range(k):
        piv = a[j, j] - low[j, :j] @ low[j, :j]
        if not piv > 0:
            return float(piv)
        low[j, j] = math.sqrt(piv)
        low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / low[j, j]
    return float(np.min(np.diag(low)) ** 2)


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, raising :class:`IllConditionedError` on failure."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    low, info = lapack.dpotrf(a, lower=1, clean=1)
    if info != 0 or not np.all(np.isfinite(low)):
        piv = _failed_pivot(a)
        raise IllConditionedError(f"Cholesky failed (minimum pivot {piv:.3e})", pivot=piv)
    return low


def sample_mvn(mean, cov=None, *, precision=None, rng, size=None):
    """Multivariate normal draw parameterized by a covariance or a precision matrix."""
    if (cov is None) == (precision is None):
        raise ValueError("give exactly one of cov or precision")
    mean = np.asarray(mean, dtype=float)
    k = mean.shape[0]
    shape = (k,) if size is None else (int(size), k)
    eps = rng.standard_normal(shape)
    if cov is not None:
        low = cholesky(cov)
        return mean + eps @ low.T
    low = cholesky(precision)
    # x = mean + L^{-T} eps has covariance (L L^T)^{-1}
    return mean + solve_triangular(low, eps.T, lower=True, trans="T").T


def sample_mvn_fast(phi, d, alpha_target, rng):
    """Draw from N((ΦᵀΦ + D⁻¹)⁻¹Φᵀα, (ΦᵀΦ + D⁻¹)⁻¹) solving only an n×n system.

    Structured-Gaussian scheme: u ~ N(0, D), δ ~ N(0, I_n), v = Φu + δ,
    solve (ΦDΦᵀ + I_n) w = α − v, return u + DΦᵀw.
    """
    phi = np.asarray(phi, dtype=float)
    d = np.asarray(d, dtype=float)
    n, p = phi.shape
    if d.shape != (p,) or np.shape(alpha_target) != (n,):
        raise ValueError("dimension mismatch in fast Gaussian sampler")
    if np.any(~(d > 0)):
        raise ValueError("prior variances must be positive")
    u = np.sqrt(d) * rng.standard_normal(p)
    delta = rng.standard_normal(n)
    v = phi @ u + delta
    phid = phi * d
    inner = phid @ phi.T
    inner[np.diag_indices(n)] += 1.0
    low = cholesky(inner)
    rhs = np.asarray(alpha_target, dtype=float) - v
    sol = solve_triangular(low, solve_triangular(low, rhs, lower=True), lower=True, trans="T")
    return u + phid.T @ sol


def sample_gaussian_posterior(phi, d, alpha_target, rng, fast_above: int | None = None):
    """Draw from the same posterior as :func:`sample_mvn_fast`, choosing the cheaper route.

    The fast route is taken when the dimension exceeds ``fast_above``
    (default: the number of rows of ``phi``).
    """
    n, p = np.shape(phi)
    limit = n if fast_above is None else fast_above
    if p > limit:
        return sample_mvn_fast(phi, d, alpha_target, rng)
    phi = np.asarray(phi, dtype=float)
    prec = phi.T @ phi
    prec[np.diag_indices(p)] += 1.0 / np.asarray(d, dtype=float)
    low = cholesky(prec)
    mean = solve_triangular(low, solve_triangular(low, phi.T @ alpha_target, lower=True), lower=True, trans="T")
    eps = rng.standard_normal(p)
    return mean + solve_triangular(low, eps, lower=True, trans="T")


# ---------------------------------------------------------------- Bernoulli


def bernoulli_from_log_odds(log_odds, rng):
    """Return 1 with probability 1/(1+exp(-log_odds)); stable for any magnitude."""
    lo = np.asarray(log_odds, dtype=float)
    if np.any(np.isnan(lo)):
        raise ValueError("log-odds is NaN")
    u = rng.random(lo.shape)
    out = (u < expit(lo)).astype(np.int64)
    return int(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- densities


def scaled_t_pdf(x, nu: float, sigma02: float):
    x = np.asarray(x, dtype=float)
    logc = gammaln((nu + 1) / 2) - gammaln(nu / 2) - 0.5 * math.log(nu * math.pi * sigma02)
    return np.exp(logc - (nu + 1) / 2 * np.log1p(x * x / (nu * sigma02)))


def logistic_pdf(x):
    x = np.abs(np.asarray(x, dtype=float))
    e = np.exp(-x)
    return e / (1.0 + e) ** 2


def sample_t_scale_mixture(size: int, nu: float, sigma02: float, rng) -> np.ndarray:
    """Draws of N(0, s²) with s² ~ InvGamma(ν/2, σ₀²ν/2), i.e. scaled t variates."""
    s2 = sample_inverse_gamma(nu / 2.0, sigma02 * nu / 2.0, rng, size=size)
    return np.sqrt(s2) * rng.standard_normal(size)
