"""Shared domain types: grouped design, hyperparameters, chain state, draws."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

NU_DEFAULT = 7.3


class StructuralError(ValueError):
    """Group partition does not cover the columns exactly once."""


class DegenerateColumnError(ValueError):
    """A covariate column has zero variance and cannot be standardized."""


class ConsistencyError(ValueError):
    """Inputs that should agree in shape or content do not; ``index`` names the offender when known."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class IllConditionedError(ArithmeticError):
    """Cholesky factorization failed; ``pivot`` holds the offending diagonal pivot."""

    def __init__(self, message: str, pivot: float = float("nan")):
        super().__init__(message)
        self.pivot = pivot


def _as_groups(groups: Sequence[Sequence[int]], p: int) -> list[np.ndarray]:
    out = []
    seen = np.zeros(p, dtype=np.int64)
    for j, g in enumerate(groups):
        idx = np.asarray(list(g), dtype=np.int64)
        if idx.size == 0:
            raise StructuralError(f"group {j} is empty")
        if idx.min() < 0 or idx.max() >= p:
            raise StructuralError(f"group {j} has indices outside 0..{p - 1}")
        if np.unique(idx).size != idx.size:
            raise StructuralError(f"group {j} repeats an index")
        seen[idx] += 1
        out.append(np.sort(idx))
    if np.any(seen > 1):
        raise StructuralError(f"overlapping groups at columns {np.flatnonzero(seen > 1).tolist()}")
    if np.any(seen == 0):
        raise StructuralError(f"columns not in any group: {np.flatnonzero(seen == 0).tolist()}")
    return out


@dataclass(frozen=True, eq=False)
class GroupedDesign:
    """Standardized design matrix with its column partition into groups.

    Group indices are 0-based. ``center`` and ``scale`` are the moments used
    for standardization, so new rows can be mapped with :meth:`transform`.
    """

    x: np.ndarray
    groups: tuple[np.ndarray, ...]
    center: np.ndarray
    scale: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def r(self) -> int:
        return len(self.groups)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups], dtype=np.int64)

    @cached_property
    def order(self) -> np.ndarray:
        """Column permutation placing groups contiguously, in group order."""
        return np.concatenate(self.groups)

    @cached_property
    def starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.int64)

    @cached_property
    def x_grouped(self) -> np.ndarray:
        """Columns of ``x`` reordered so group j occupies ``starts[j]:starts[j]+sizes[j]``."""
        return np.ascontiguousarray(self.x[:, self.order])

    @cached_property
    def group_of(self) -> np.ndarray:
        lab = np.empty(self.p, dtype=np.int64)
        for j, g in enumerate(self.groups):
            lab[g] = j
        return lab

    def transform(self, x_new: np.ndarray) -> np.ndarray:
        """Standardize new rows with this design's moments."""
        x_new = np.asarray(x_new, dtype=float)
        if x_new.ndim != 2 or x_new.shape[1] != self.p:
            raise ConsistencyError(f"expected {self.p} columns, got shape {x_new.shape}")
        return (x_new - self.center) / self.scale

    def support(self, selected) -> np.ndarray:
        """Boolean column mask for the union of the selected groups."""
        mask = np.zeros(self.p, dtype=bool)
        for j in selected:
            mask[self.groups[j]] = True
        return mask


def validate_design(x, groups: Sequence[Sequence[int]], standardize: bool = True) -> GroupedDesign:
    """Check a raw matrix and partition, and standardize the columns.

    Columns are centred at their mean and divided by the sample standard
    deviation (``ddof=1``), giving sample variance one.
    """
    x = np.array(x, dtype=float)
    if x.ndim != 2:
        raise ConsistencyError("design must be a 2-d matrix")
    n, p = x.shape
    if n < 2:
        raise ConsistencyError("need at least two rows")
    if not np.all(np.isfinite(x)):
        raise ConsistencyError("design contains non-finite values")
    grp = _as_groups(groups, p)
    if standardize:
        center = x.mean(axis=0)
        scale = x.std(axis=0, ddof=1)
        bad = np.flatnonzero(scale <= 1e-12 * np.maximum(1.0, np.abs(center)))
        if bad.size:
            raise DegenerateColumnError(f"zero-variance columns: {bad.tolist()}")
        x = (x - center) / scale
    else:
        center = np.zeros(p)
        scale = np.ones(p)
    x.setflags(write=False)
    return GroupedDesign(x=x, groups=tuple(grp), center=center, scale=scale)


def t_scale_for_nu(nu: float) -> float:
    """Scale σ₀² making the t density with ``nu`` dof mimic the logistic density."""
    return math.pi**2 * (nu - 2.0) / (3.0 * nu)


@dataclass(frozen=True)
class Hyperparams:
    tau2: float
    q: float
    nu: float = NU_DEFAULT
    sigma02: float = field(default=None)  # type: ignore[assignment]
    max_model_groups: Optional[int] = None

    def __post_init__(self):
        if not self.tau2 > 0:
            raise ValueError("tau2 must be positive")
        if not 0.0 < self.q < 1.0:
            raise ValueError("q must lie in (0, 1)")
        if not self.nu > 2:
            raise ValueError("nu must exceed 2")
        if self.sigma02 is None:
            object.__setattr__(self, "sigma02", t_scale_for_nu(self.nu))
        if not self.sigma02 > 0:
            raise ValueError("sigma02 must be positive")
        if self.max_model_groups is not None and self.max_model_groups < 1:
            raise ValueError("max_model_groups must be a positive integer")

    @property
    def alpha0(self) -> float:
        """Neuronized activation threshold, the (1-q) standard normal quantile."""
        return float(ndtri(1.0 - self.q))

    @property
    def log_prior_odds(self) -> float:
        return math.log(self.q) - math.log1p(-self.q)


def default_hyperparams(n: int, r: int, delta: float = 0.01, nu: float = NU_DEFAULT) -> Hyperparams:
    """τ² = max{1, 0.01 r^(2+2δ) / n} and q = 1/r."""
    if n < 1 or r < 2:
        raise ValueError("need n >= 1 and r >= 2")
    tau2 = max(1.0, 0.01 * r ** (2.0 + 2.0 * delta) / n)
    return Hyperparams(tau2=tau2, q=1.0 / r, nu=nu)


@dataclass
class ChainState:
    """Mutable state of one chain. ``alpha``/``w`` are set only by the neuronized engine."""

    beta: np.ndarray
    z: np.ndarray
    y: np.ndarray
    s2: np.ndarray
    alpha: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None

    def copy(self) -> "ChainState":
        return ChainState(
            beta=self.beta.copy(),
            z=self.z.copy(),
            y=self.y.copy(),
            s2=self.s2.copy(),
            alpha=None if self.alpha is None else self.alpha.copy(),
            w=None if self.w is None else self.w.copy(),
        )


@dataclass(frozen=True)
class InitPolicy:
    """Starting point: ``n_active`` randomly chosen active groups, or an explicit set."""

    n_active: int = 3
    active: Optional[tuple[int, ...]] = None
    beta_sd: float = 0.1
    alpha_offset: float = 0.5

    def choose(self, r: int, rng: np.random.Generator) -> np.ndarray:
        z = np.zeros(r, dtype=np.int64)
        if self.active is not None:
            z[list(self.active)] = 1
        else:
            z[rng.choice(r, size=min(self.n_active, r), replace=False)] = 1
        return z


@dataclass
class PosteriorDraws:
    z_draws: np.ndarray
    seed: int
    n_burnin: int
    engine: str
    beta_draws: Optional[np.ndarray] = None

    def __post_init__(self):
        self.z_draws = np.asarray(self.z_draws, dtype=np.int8)
        if self.z_draws.ndim != 2:
            raise ConsistencyError("z_draws must be a 2-d matrix")
        if self.engine not in ("gibbs", "neuronized"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.beta_draws is not None and self.beta_draws.shape[0] != self.z_draws.shape[0]:
            raise ConsistencyError("beta_draws and z_draws disagree on sample count")

    @property
    def n_samples(self) -> int:
        return self.z_draws.shape[0]

    @property
    def r(self) -> int:
        return self.z_draws.shape[1]

    def merge(self, other: "PosteriorDraws") -> "PosteriorDraws":
        """Pool draws from another chain on the same problem."""
        if other.r != self.r or other.engine != self.engine:
            raise ConsistencyError("cannot merge draws from different problems or engines")
        beta = None
        if self.beta_draws is not None and other.beta_draws is not None:
            beta = np.vstack([self.beta_draws, other.beta_draws])
        return PosteriorDraws(
            z_draws=np.vstack([self.z_draws, other.z_draws]),
            seed=self.seed,
            n_burnin=self.n_burnin,
            engine=self.engine,
            beta_draws=beta,
        )


@dataclass(frozen=True)
class MetricSet:
    sensitivity: float
    specificity: float
    mcc: float
    mspe: float
    n_errors: int

    def as_dict(self) -> dict:
        return {
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "mcc": self.mcc,
            "mspe": self.mspe,
            "n_errors": self.n_errors,
        }


@dataclass
class SelectionReport:
    inclusion_prob: np.ndarray
    selected: tuple[int, ...]
    model_counts: dict
    refit_beta: np.ndarray
    highest_frequency: tuple[int, ...] = ()
    metrics: Optional[MetricSet] = None
