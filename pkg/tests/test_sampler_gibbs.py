import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import expit, logsumexp

from gsslogit.core import ChainState, GroupedDesign, Hyperparams, InitPolicy
from gsslogit.oracle import compare_chain_to_oracle, enumerate_posterior
from gsslogit.sampler_gibbs import (
    GibbsChain,
    group_conditional,
    initial_state,
    run_gibbs,
    run_gibbs_fixed,
    step_group_beta,
    step_group_indicator,
    step_latent_y,
    step_scales,
)

H = Hyperparams(tau2=1.0, q=0.5)


def one_column_design(n=1, value=0.0):
    x = np.full((n, 1), value)
    return GroupedDesign(x=x, groups=(np.array([0]),), center=np.zeros(1), scale=np.ones(1))


def _state(design, beta, s2, y=None):
    n = design.n
    return ChainState(
        beta=np.asarray(beta, float),
        z=(np.abs(np.asarray(beta)) > 0).astype(np.int64)[: design.r],
        y=np.zeros(n) if y is None else np.asarray(y, float),
        s2=np.full(n, s2),
    )


def test_latent_y_half_normal():
    d = one_column_design(100_000)
    st = _state(d, [0.0], 1.0)
    y = step_latent_y(st, d, np.ones(d.n, dtype=int), np.random.default_rng(0))
    assert np.all(y > 0)
    assert y.mean() == pytest.approx(math.sqrt(2 / math.pi), abs=0.01)


def test_latent_y_negative_side():
    d = one_column_design(1000, 1.0)
    st = _state(d, [3.0], 1.0)
    assert np.all(step_latent_y(st, d, np.zeros(d.n, dtype=int), np.random.default_rng(1)) < 0)


def test_latent_y_untruncated_regime():
    d = one_column_design(100_000, 1.0)
    st = _state(d, [10.0], 1.0)
    y = step_latent_y(st, d, np.ones(d.n, dtype=int), np.random.default_rng(2))
    assert y.mean() == pytest.approx(10.0, abs=0.05)


def test_scales_at_zero_residual():
    d = one_column_design(100_000)
    hyper = Hyperparams(tau2=1.0, q=0.1)
    st = _state(d, [0.0], 1.0)
    s2 = step_scales(st, d, hyper, np.random.default_rng(3))
    assert s2.mean() == pytest.approx(hyper.sigma02 * 3.65 / 3.15, abs=0.05)
    assert s2.mean() == pytest.approx(2.768, abs=0.05)


def test_scales_huge_residual_positive():
    d = one_column_design(1000)
    st = _state(d, [0.0], 1.0, y=np.full(1000, 1e3))
    s2 = step_scales(st, d, H, np.random.default_rng(4))
    assert np.all(s2 > 0)
    assert np.median(s2) > 1e5


def test_zero_column_gives_even_odds():
    d = one_column_design(10)
    st = _state(d, [0.0], 1.0)
    assert group_conditional(st, d, H, 0).log_odds == pytest.approx(0.0, abs=1e-12)
    draws = [step_group_indicator(st, d, H, 0, np.random.default_rng(k)) for k in range(4000)]
    assert np.mean(draws) == pytest.approx(0.5, abs=0.03)


def test_strong_signal_saturates():
    rng = np.random.default_rng(5)
    n = 200
    x = rng.standard_normal((n, 4))
    d = GroupedDesign(x=x, groups=(np.arange(4),), center=np.zeros(4), scale=np.ones(4))
    y = x @ np.full(4, 1.5)
    st = _state(d, np.zeros(4), 1.0, y=y)
    cond = group_conditional(st, d, Hyperparams(tau2=1.0, q=0.02), 0)
    # P(z=1) > 1 - 1e-30 exactly when the log-odds exceed ln(1e30) ≈ 69.1
    assert cond.log_odds > math.log(1e30)
    assert step_group_indicator(st, d, Hyperparams(tau2=1.0, q=0.02), 0, rng) == 1


def test_log_odds_match_direct_computation(small_dataset):
    ds, hyper = small_dataset
    d = ds.design
    rng = np.random.default_rng(6)
    st = initial_state(d, ds.e, hyper, InitPolicy(), rng)
    st.s2 = rng.uniform(0.5, 3.0, d.n)
    st.y = np.where(ds.e == 1, 1, -1) * np.abs(rng.standard_normal(d.n))
    for j in range(d.r):
        g = d.groups[j]
        xg = d.x[:, g]
        beta_minus = st.beta.copy()
        beta_minus[g] = 0
        partial = st.y - d.x @ beta_minus
        # ratio of the two Gaussian marginals of the partial residual, in direct space
        c1 = np.diag(st.s2) + hyper.tau2 * xg @ xg.T
        num = stats.multivariate_normal(np.zeros(d.n), c1).pdf(partial)
        den = stats.multivariate_normal(np.zeros(d.n), np.diag(st.s2)).pdf(partial)
        direct = hyper.q * num / (hyper.q * num + (1 - hyper.q) * den)
        assert expit(group_conditional(st, d, hyper, j).log_odds) == pytest.approx(direct, abs=1e-8)


def test_spike_sets_exact_zeros(small_dataset):
    ds, hyper = small_dataset
    d = ds.design
    st = initial_state(d, ds.e, hyper, InitPolicy(active=(0, 1)), np.random.default_rng(7))
    st.z[0] = 0
    step_group_beta(st, d, hyper, 0, np.random.default_rng(0))
    assert np.all(st.beta[d.groups[0]] == 0.0)


def test_kernel_matches_reference_steps(small_dataset):
    ds, hyper = small_dataset
    d = ds.design
    st = initial_state(d, ds.e, hyper, InitPolicy(), np.random.default_rng(0))
    st.y = np.where(ds.e == 1, 1.0, -1.0) * np.abs(np.random.default_rng(5).standard_normal(d.n))
    chain = GibbsChain(d, ds.e, hyper, st.copy())
    chain.group_sweep(np.random.default_rng(9))
    ref = st.copy()
    rng = np.random.default_rng(9)
    for j in range(d.r):
        step_group_indicator(ref, d, hyper, j, rng)
        step_group_beta(ref, d, hyper, j, rng)
    assert np.array_equal(chain.state.z, ref.z)
    assert np.allclose(chain.beta, ref.beta, atol=1e-10)


def test_invariants_every_sweep(small_dataset):
    ds, hyper = small_dataset
    d = ds.design
    rng = np.random.default_rng(10)
    chain = GibbsChain(d, ds.e, hyper, initial_state(d, ds.e, hyper, InitPolicy(), rng))
    for it in range(300):
        chain.sweep(rng)
        st = chain.state
        for j in range(d.r):
            block = st.beta[d.groups[j]]
            assert (st.z[j] == 0) == np.all(block == 0)
        assert np.all((st.y > 0) == (ds.e == 1))
        if it % 100 == 99:
            assert chain.residual_drift() < 1e-8


def test_zero_samples_is_empty(small_dataset):
    ds, hyper = small_dataset
    draws = run_gibbs(ds.design, ds.e, hyper, n_burnin=5, n_samples=0)
    assert draws.z_draws.shape == (0, ds.design.r)


def test_deterministic_given_seed(small_dataset):
    ds, hyper = small_dataset
    a = run_gibbs(ds.design, ds.e, hyper, 20, 30, seed=4)
    b = run_gibbs(ds.design, ds.e, hyper, 20, 30, seed=4)
    assert np.array_equal(a.z_draws, b.z_draws) and np.array_equal(a.beta_draws, b.beta_draws)


def test_model_size_cap(small_dataset):
    ds, _ = small_dataset
    hyper = Hyperparams(tau2=1.0, q=0.9, max_model_groups=2)
    draws = run_gibbs(ds.design, ds.e, hyper, 10, 200, init=InitPolicy(n_active=1), seed=1)
    assert draws.z_draws.sum(axis=1).max() <= 2


def test_frozen_chain_matches_enumeration(frozen_problem):
    design, y, s2, hyper = frozen_problem
    assert compare_chain_to_oracle("gibbs", design, y, s2, hyper, 50_000, seed=1) < 0.05


def test_sweep_order_does_not_change_target(frozen_problem):
    design, y, s2, hyper = frozen_problem
    incl = []
    for order in ([0, 1, 2], [2, 0, 1]):
        rng = np.random.default_rng(3)
        e = (y >= 0).astype(int)
        st = initial_state(design, e, hyper, InitPolicy(), rng)
        st.y, st.s2 = y.copy(), s2.copy()
        chain = GibbsChain(design, e, hyper, st)
        chain.set_sweep_order(order)
        total = np.zeros(3)
        for _ in range(100_000):
            chain.group_sweep(rng)
            total += chain.z
        incl.append(total / 100_000)
    assert np.max(np.abs(incl[0] - incl[1])) < 0.03


def test_full_chain_matches_rejection_oracle():
    # one group, five rows: the posterior of z can be computed by brute force
    rng = np.random.default_rng(3)
    n = 5
    x = rng.standard_normal((n, 2)) * 2
    design = GroupedDesign(x=x, groups=(np.array([0, 1]),), center=np.zeros(2), scale=np.ones(2))
    e = np.array([1, 1, 0, 1, 0])
    hyper = Hyperparams(tau2=1.0, q=0.5)
    tdist = stats.t(df=hyper.nu, scale=math.sqrt(hyper.sigma02))
    b = rng.standard_normal((400_000, 2))
    eta = b @ x.T
    ll = (e * tdist.logcdf(eta) + (1 - e) * tdist.logcdf(-eta)).sum(1)
    log_m1 = logsumexp(ll) - math.log(len(b))
    log_m0 = n * math.log(0.5)
    exact = expit(log_m1 - log_m0)
    draws = run_gibbs(design, e, hyper, 1000, 60_000, seed=1, store_beta=False)
    assert draws.z_draws.mean() == pytest.approx(exact, abs=0.015)


def test_fixed_mode_keeps_latents(frozen_problem):
    design, y, s2, hyper = frozen_problem
    draws = run_gibbs_fixed(design, y, s2, hyper, 10, seed=0)
    assert draws.z_draws.shape == (10, 3)
    assert enumerate_posterior(design, y, s2, hyper).probs.sum() == pytest.approx(1.0)
