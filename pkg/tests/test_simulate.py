import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsslogit.simulate import SimConfig, draw_group_sizes, gen_beta0, gen_covariates, gen_dataset, gen_response


def test_isotropic_correlation():
    x = gen_covariates(SimConfig(), 3, np.random.default_rng(0), n=100_000)
    assert np.max(np.abs(np.corrcoef(x.T) - np.eye(3))) < 0.02


@pytest.mark.parametrize("cov", ["compound_symmetry", "ar1"])
def test_correlated_structures(cov):
    cfg = SimConfig(covariance=cov, rho=0.5)
    x = gen_covariates(cfg, 4, np.random.default_rng(1), n=100_000)
    i, j = np.indices((4, 4))
    target = np.where(i == j, 1.0, 0.5) if cov == "compound_symmetry" else 0.5 ** np.abs(i - j)
    assert np.max(np.abs(np.cov(x.T) - target)) < 0.02


def test_null_response_is_fair_coin():
    e = gen_response(np.ones((100_000, 1)), np.zeros(1), np.random.default_rng(2))
    assert e.mean() == pytest.approx(0.5, abs=0.005)


def test_response_frequency_ln9():
    e = gen_response(np.ones((100_000, 1)), np.array([np.log(9)]), np.random.default_rng(3))
    assert e.mean() == pytest.approx(0.9, abs=0.005)


def test_response_saturates():
    assert gen_response(np.ones((1000, 1)), np.array([-50.0]), np.random.default_rng(4)).sum() == 0


def test_design1_shape():
    ds = gen_dataset(SimConfig.from_design(1, seed=5))
    assert 200 <= ds.design.p <= 300
    assert ds.true_model == (0, 1, 2)
    assert ds.design.r == 50


def test_design3_has_100_groups():
    ds = gen_dataset(SimConfig.from_design(3, seed=5))
    assert ds.design.r == 100 and ds.true_model == (0, 1, 2)


def test_setting2_constant():
    ds = gen_dataset(SimConfig.from_design(1, setting=2, seed=6))
    nz = ds.beta0[ds.beta0 != 0]
    assert np.all(nz == 1.5)


@pytest.mark.parametrize("setting,lo,hi", [(1, 0.5, 1.5), (3, 1.5, 3.0)])
def test_uniform_setting_ranges(setting, lo, hi):
    ds = gen_dataset(SimConfig.from_design(1, setting=setting, seed=7))
    nz = ds.beta0[ds.beta0 != 0]
    assert np.all((nz > lo) & (nz < hi))


def test_same_seed_identical():
    a = gen_dataset(SimConfig(seed=8))
    b = gen_dataset(SimConfig(seed=8))
    for name in ("x_raw", "e", "beta0", "x_test_raw", "e_test"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert not np.array_equal(a.x_raw, gen_dataset(SimConfig(seed=9)).x_raw)


def test_group_size_histogram_uniform():
    rng = np.random.default_rng(10)
    cfg = SimConfig()
    sizes = np.concatenate([draw_group_sizes(cfg, rng) for _ in range(10_000)])
    freq = np.array([np.mean(sizes == k) for k in (4, 5, 6)])
    assert np.all(np.abs(freq - 1 / 3) < 0.02)


@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(0, 5))
@settings(max_examples=40, deadline=None)
def test_support_matches_true_groups(seed, setting, n_active):
    cfg = SimConfig(r=8, n_active=n_active, setting=setting, seed=seed)
    rng = np.random.default_rng(seed)
    sizes = draw_group_sizes(cfg, rng)
    bounds = np.r_[0, np.cumsum(sizes)]
    groups = [np.arange(bounds[j], bounds[j + 1]) for j in range(cfg.r)]
    beta0 = gen_beta0(cfg, groups, int(sizes.sum()), rng)
    expected = np.zeros(beta0.size, dtype=bool)
    for j in range(n_active):
        expected[groups[j]] = True
    assert np.array_equal(beta0 != 0, expected)


def test_degenerate_responses_retry():
    # no signal and a single row: about half of all attempts are degenerate
    ds = gen_dataset(SimConfig(n=2, r=2, n_active=0, n_test=0, seed=11))
    assert 0 < ds.e.sum() < ds.e.size


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        SimConfig(covariance="banded")
    with pytest.raises(ValueError):
        SimConfig(setting=5)
