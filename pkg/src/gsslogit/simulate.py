"""Synthetic grouped logistic-regression experiments."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import expit

from .core import GroupedDesign, validate_design
from .distributions import derive_seed

COVARIANCES = ("isotropic", "compound_symmetry", "ar1")
SETTINGS = {
    1: ("uniform", 0.5, 1.5),
    2: ("constant", 1.5, 1.5),
    3: ("uniform", 1.5, 3.0),
    4: ("constant", 3.0, 3.0),
}
# design number -> (r, n_active)
DESIGNS = {1: (50, 3), 2: (50, 6), 3: (100, 3)}


@dataclass(frozen=True)
class SimConfig:
    n: int = 100
    r: int = 50
    n_active: int = 3
    covariance: str = "isotropic"
    rho: float = 0.5
    setting: int = 4
    group_size_choices: tuple[int, ...] = (4, 5, 6)
    n_test: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.covariance not in COVARIANCES:
            raise ValueError(f"unknown covariance {self.covariance!r}; choose from {COVARIANCES}")
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        if not 0 <= self.n_active <= self.r:
            raise ValueError("n_active must lie in [0, r]")
        if self.n < 2 or self.n_test < 0:
            raise ValueError("need n >= 2 and n_test >= 0")

    @classmethod
    def from_design(cls, design: int, **kw) -> "SimConfig":
        r, n_active = DESIGNS[design]
        return cls(r=r, n_active=n_active, **kw)


@dataclass(frozen=True, eq=False)
class SimDataset:
    config: SimConfig
    design: GroupedDesign
    e: np.ndarray
    true_model: tuple[int, ...]
    beta0: np.ndarray
    x_raw: np.ndarray
    x_test_raw: np.ndarray
    test_design: np.ndarray
    e_test: np.ndarray
    true_prob_test: np.ndarray
    attempts: int = 1


def draw_group_sizes(config: SimConfig, rng) -> np.ndarray:
    return rng.choice(np.asarray(config.group_size_choices), size=config.r)


def gen_covariates(config: SimConfig, p: int, rng, n: Optional[int] = None) -> np.ndarray:
    """n×p rows iid N(0, Σ) for the configured covariance structure."""
    n = config.n if n is None else n
    rho = config.rho
    z = rng.standard_normal((n, p))
    if config.covariance == "isotropic":
        return z
    if config.covariance == "compound_symmetry":
        shared = rng.standard_normal((n, 1))
        return np.sqrt(rho) * shared + np.sqrt(1.0 - rho) * z
    # AR(1) recursion reproduces Σ_ij = rho^|i-j| with unit variances
    x = np.empty((n, p))
    x[:, 0] = z[:, 0]
    c = np.sqrt(1.0 - rho * rho)
    for k in range(1, p):
        x[:, k] = rho * x[:, k - 1] + c * z[:, k]
    return x


def gen_response(x: np.ndarray, beta0: np.ndarray, rng) -> np.ndarray:
    """Independent Bernoulli responses with success probability expit(x β₀)."""
    prob = expit(np.asarray(x) @ np.asarray(beta0))
    return (rng.random(prob.shape) < prob).astype(np.int64)


def gen_beta0(config: SimConfig, groups, p: int, rng) -> np.ndarray:
    kind, lo, hi = SETTINGS[config.setting]
    beta0 = np.zeros(p)
    idx = np.concatenate([groups[j] for j in range(config.n_active)]) if config.n_active else np.empty(0, int)
    if kind == "constant":
        beta0[idx] = lo
    else:
        beta0[idx] = rng.uniform(lo, hi, size=idx.size)
    return beta0


def gen_dataset(config: SimConfig, max_attempts: int = 100) -> SimDataset:
    """Generate training and test data for one replication.

    The first ``n_active`` groups carry the signal. If every training
    response comes out equal, the data are regenerated from a derived seed.
    """
    for attempt in range(max_attempts):
        seed = config.seed if attempt == 0 else derive_seed(config.seed, 1_000_000 + attempt)
        rng = np.random.default_rng(seed)
        sizes = draw_group_sizes(config, rng)
        p = int(sizes.sum())
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        groups = [np.arange(bounds[j], bounds[j + 1]) for j in range(config.r)]
        beta0 = gen_beta0(config, groups, p, rng)
        x = gen_covariates(config, p, rng)
        e = gen_response(x, beta0, rng)
        if 0 < e.sum() < e.size:
            break
    else:
        raise RuntimeError(f"all-equal responses in {max_attempts} attempts")
    x_test = gen_covariates(config, p, rng, n=config.n_test)
    e_test = gen_response(x_test, beta0, rng)
    design = validate_design(x, groups)
    return SimDataset(
        config=config,
        design=design,
        e=e,
        true_model=tuple(range(config.n_active)),
        beta0=beta0,
        x_raw=x,
        x_test_raw=x_test,
        test_design=design.transform(x_test) if config.n_test else np.empty((0, p)),
        e_test=e_test,
        true_prob_test=expit(x_test @ beta0),
        attempts=attempt + 1,
    )


def with_seed(config: SimConfig, seed: int) -> SimConfig:
    return replace(config, seed=seed)
