"""Acceptance criteria, each checked at its stated tolerance.

Every test appends one ``PASS``/``FAIL`` line to the terminal summary (and
prints it) before asserting, so a failing criterion still reports its numbers.
"""
import math
import time

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.optimize import minimize_scalar

from gsslogit.core import default_hyperparams, t_scale_for_nu
from gsslogit.distributions import (
    logistic_pdf,
    sample_gaussian_posterior,
    sample_inverse_gamma,
    sample_mvn,
    sample_mvn_fast,
    sample_t_scale_mixture,
    sample_truncated_normal,
    scaled_t_pdf,
)
from gsslogit.inference import compute_metrics, inclusion_probabilities, matthews
from gsslogit.oracle import compare_chain_to_oracle, posterior_ratio_trace
from gsslogit.pipeline import fit, mean_metrics, replication_configs, run_batch
from gsslogit.sampler_gibbs import run_gibbs
from gsslogit.simulate import SimConfig, gen_dataset

from conftest import make_frozen_problem
from test_distributions import _energy_test
from test_inference import brute_force

pytestmark = pytest.mark.acceptance

BASE_SEED = 2024


def report(log, number, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}"
    log.append(line)
    print(line)
    return ok


def _fmt(m):
    return f"sens={m['sensitivity']:.3f} spec={m['specificity']:.3f} mcc={m['mcc']:.3f} mspe={m['mspe']:.4f}"


def test_criterion_1_table1_strong_signal(acceptance_log):
    base = SimConfig.from_design(1, setting=4, covariance="isotropic", seed=BASE_SEED)
    parts, ok = [], True
    for engine in ("gibbs", "neuronized"):
        res = run_batch(base, engine, reps=50, n_burnin=2000, n_samples=2000)
        m = mean_metrics(res)
        good = (
            m["n_ok"] == 50
            and m["sensitivity"] >= 0.95
            and m["specificity"] >= 0.98
            and m["mcc"] >= 0.95
            and abs(m["mspe"] - 0.10) <= 0.10
        )
        ok &= good
        parts.append(f"{engine}: {_fmt(m)} {'ok' if good else 'short'}")
    report(acceptance_log, 1, ok, "Design 1/Setting 4, 50 reps; " + "; ".join(parts))
    assert ok


def test_criterion_2_table7_high_dimensional(acceptance_log):
    base = SimConfig.from_design(3, setting=3, covariance="isotropic", seed=BASE_SEED)
    m = mean_metrics(run_batch(base, "gibbs", reps=50, n_burnin=2000, n_samples=2000))
    ok = m["n_ok"] == 50 and m["mcc"] >= 0.9 and m["specificity"] >= 0.98
    report(acceptance_log, 2, ok, f"Design 3/Setting 3 gibbs, 50 reps; {_fmt(m)}")
    assert ok


def test_criterion_3_oracle_equivalence(acceptance_log):
    design, y, s2, hyper = make_frozen_problem()
    t0 = time.perf_counter()
    tv = {eng: compare_chain_to_oracle(eng, design, y, s2, hyper, 200_000, seed=11) for eng in ("gibbs", "neuronized")}
    seconds = time.perf_counter() - t0
    ok = max(tv.values()) < 0.05 and seconds < 120
    report(acceptance_log, 3, ok, f"TV gibbs={tv['gibbs']:.4f} neuronized={tv['neuronized']:.4f}, {seconds:.1f}s")
    assert ok


def test_criterion_4_engine_agreement(acceptance_log):
    ds = gen_dataset(SimConfig.from_design(1, setting=2, covariance="isotropic", seed=BASE_SEED))
    hyper = default_hyperparams(ds.design.n, ds.design.r)
    incl = {
        eng: inclusion_probabilities(fit(ds.design, ds.e, eng, hyper, 2000, 20_000, seed=5, store_beta=False))
        for eng in ("gibbs", "neuronized")
    }
    gap = np.abs(incl["gibbs"] - incl["neuronized"])
    ok = gap.max() < 0.05
    report(acceptance_log, 4, ok, f"max |Δ inclusion| = {gap.max():.4f} (group {int(gap.argmax()) + 1}) over 50 groups")
    assert ok


def _binned_kde_supnorm(draws, density, lo=-8.0, hi=8.0, bin_width=0.005, bandwidth=None):
    """Gaussian KDE on a fine grid via a binned convolution, compared with ``density``."""
    n = draws.size
    bandwidth = bandwidth or 1.06 * draws.std() * n ** (-0.2)
    edges = np.arange(lo, hi + bin_width, bin_width)
    counts, _ = np.histogram(draws, bins=edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    half = int(np.ceil(5 * bandwidth / bin_width))
    offs = np.arange(-half, half + 1) * bin_width
    kernel = stats.norm.pdf(offs, scale=bandwidth)
    kde = np.convolve(counts, kernel, mode="same") / n
    inner = (centers > lo + 6 * bandwidth) & (centers < hi - 6 * bandwidth)
    return float(np.max(np.abs(kde[inner] - density(centers[inner]))))


def test_criterion_5_t_approximation(acceptance_log):
    nu = 7.3
    s02 = t_scale_for_nu(nu)
    grid = np.linspace(-15, 15, 30001)
    diff = np.abs(scaled_t_pdf(grid, nu, s02) - logistic_pdf(grid))
    # refine the grid maximum with a bounded optimizer around it
    k = int(diff.argmax())
    res = minimize_scalar(
        lambda t: -abs(scaled_t_pdf(t, nu, s02) - logistic_pdf(t)), bounds=(grid[k - 1], grid[k + 1]), method="bounded"
    )
    sup_density = max(float(diff.max()), -float(res.fun))
    mass = integrate.quad(lambda t: scaled_t_pdf(t, nu, s02), -np.inf, np.inf)[0]
    draws = sample_t_scale_mixture(1_000_000, nu, s02, np.random.default_rng(5))
    sup_kde = _binned_kde_supnorm(draws, lambda t: scaled_t_pdf(t, nu, s02))
    ok = sup_density < 0.01 and sup_kde < 0.01 and abs(mass - 1) < 1e-8
    report(acceptance_log, 5, ok, f"sup|t - logistic| = {sup_density:.5f}; KDE sup-norm at 1e6 draws = {sup_kde:.5f}")
    assert ok


def _random_spd_posterior(rng, n, p):
    phi = rng.standard_normal((n, p)) / math.sqrt(p)
    d = rng.uniform(0.3, 3.0, p)
    target = rng.standard_normal(n)
    return phi, d, target


def test_criterion_6_distribution_suite(acceptance_log):
    rng = np.random.default_rng(6)
    checks = {}
    # truncated normal: 10⁶ draws over random bounds, no violations
    m = rng.uniform(-50, 50, 1_000_000)
    sd = rng.uniform(0.05, 10, m.size)
    lo = rng.uniform(-60, 60, m.size)
    hi = lo + rng.uniform(1e-3, 30, m.size)
    lo[rng.random(m.size) < 0.2] = -np.inf
    hi[rng.random(m.size) < 0.2] = np.inf
    x = sample_truncated_normal(m, sd, lo, hi, rng)
    checks["tn_violations"] = int(np.sum(~((x > lo) & (x < hi)) | ~np.isfinite(x)))
    half = sample_truncated_normal(0.0, 1.0, 0.0, np.inf, rng, size=100_000)
    checks["half_normal_mean_err"] = abs(half.mean() - math.sqrt(2 / math.pi))
    ig = sample_inverse_gamma(3.0, 2.0, rng, size=100_000)
    checks["invgamma_mean_err"] = abs(ig.mean() - 1.0)
    mv = sample_mvn(np.zeros(3), np.eye(3), rng=rng, size=100_000)
    checks["mvn_frobenius"] = float(np.linalg.norm(np.cov(mv.T) - np.eye(3)))
    cov = np.array([[2.0, 1.0], [1.0, 2.0]])
    mv2 = sample_mvn(np.zeros(2), cov, rng=rng, size=100_000)
    maha = np.einsum("ij,jk,ik->i", mv2, np.linalg.inv(cov), mv2)
    checks["mahalanobis_ks"] = float(stats.kstest(maha, stats.chi2(2).cdf).statistic)
    prior = np.array([sample_mvn_fast(np.zeros((5, 4)), np.array([0.5, 1, 2, 4.0]), np.zeros(5), rng) for _ in range(100_000)])
    checks["fast_prior_var_err"] = float(np.max(np.abs(prior.var(0) / np.array([0.5, 1, 2, 4.0]) - 1)))
    # fast vs direct moments on random instances with p <= 20
    worst = 0.0
    for p in (3, 8, 20):
        phi, d, target = _random_spd_posterior(rng, 10, p)
        fast = np.array([sample_mvn_fast(phi, d, target, rng) for _ in range(100_000)])
        prec = phi.T @ phi + np.diag(1 / d)
        cov_exact = np.linalg.inv(prec)
        mean_exact = cov_exact @ phi.T @ target
        direct = sample_mvn(mean_exact, precision=prec, rng=rng, size=100_000)
        scale = math.sqrt(np.trace(cov_exact))
        worst = max(
            worst,
            float(np.linalg.norm(fast.mean(0) - direct.mean(0)) / scale),
            float(np.linalg.norm(np.cov(fast.T) - np.cov(direct.T)) / np.linalg.norm(cov_exact)),
        )
    checks["fast_vs_direct_rel"] = worst
    phi, d, target = _random_spd_posterior(rng, 50, 200)
    f = np.array([sample_gaussian_posterior(phi, d, target, rng) for _ in range(2500)])
    g = np.array([sample_gaussian_posterior(phi, d, target, rng, fast_above=10**9) for _ in range(2500)])
    checks["energy_pvalue"] = _energy_test(f, g)
    ok = (
        checks["tn_violations"] == 0
        and checks["half_normal_mean_err"] < 0.01
        and checks["invgamma_mean_err"] < 0.02
        and checks["mvn_frobenius"] < 0.05
        and checks["mahalanobis_ks"] < 0.01
        and checks["fast_prior_var_err"] < 0.02
        and checks["fast_vs_direct_rel"] < 0.03
        and checks["energy_pvalue"] > 0.01
    )
    text = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in checks.items())
    report(acceptance_log, 6, ok, text)
    assert ok


def test_criterion_7_consistency_trend(acceptance_log):
    sizes = (100, 200, 400)
    base = SimConfig(r=50, n_active=3, setting=4, covariance="isotropic", seed=BASE_SEED)
    configs = replication_configs(base, 10)
    probs = np.zeros((10, len(sizes)))
    for k, cfg in enumerate(configs):
        for i, n in enumerate(sizes):
            ds = gen_dataset(SimConfig(**{**cfg.__dict__, "n": n}))
            hyper = default_hyperparams(n, ds.design.r)
            draws = run_gibbs(ds.design, ds.e, hyper, 2000, 2000, seed=cfg.seed, store_beta=False)
            probs[k, i] = posterior_ratio_trace(draws, ds.true_model).true_prob
    monotone = int(np.sum(np.all(np.diff(probs, axis=1) >= 0, axis=1)))
    at400 = float(probs[:, -1].mean())
    ok = monotone >= 8 and at400 > 0.9
    means = ", ".join(f"n={n}: {probs[:, i].mean():.3f}" for i, n in enumerate(sizes))
    report(acceptance_log, 7, ok, f"nondecreasing in {monotone}/10 reps; mean π̂(Z=t) {means}; min at n=400 {probs[:, -1].min():.3f}")
    assert ok


def test_criterion_8_metric_oracle(acceptance_log):
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(1000):
        r = int(rng.integers(1, 80))
        sel = tuple(np.flatnonzero(rng.random(r) < rng.random()))
        tru = tuple(np.flatnonzero(rng.random(r) < rng.random()))
        m = compute_metrics(sel, tru, r)
        mismatches += (m.sensitivity, m.specificity, m.mcc, m.n_errors) != brute_force(set(sel), set(tru), r)
    mcc = matthews(3, 46, 1, 0)
    ok = mismatches == 0 and abs(mcc - 0.8568) <= 1e-4
    report(acceptance_log, 8, ok, f"{mismatches} mismatches in 1000 instances; MCC(3,46,1,0) = {mcc:.5f}")
    assert ok
