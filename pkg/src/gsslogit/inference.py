"""From posterior draws to selected groups, refit coefficients and evaluation metrics."""
from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import expit

from .core import GroupedDesign, MetricSet, PosteriorDraws, SelectionReport


class SeparationWarning(UserWarning):
    pass


def inclusion_probabilities(draws: PosteriorDraws) -> np.ndarray:
    if draws.n_samples < 1:
        raise ValueError("no posterior draws to summarize")
    return draws.z_draws.mean(axis=0)


def select_median_probability_model(inclusion) -> tuple[int, ...]:
    """Groups whose inclusion probability is strictly above one half."""
    inclusion = np.asarray(inclusion, dtype=float)
    if np.any((inclusion < 0) | (inclusion > 1)):
        raise ValueError("inclusion probabilities must lie in [0, 1]")
    return tuple(int(j) for j in np.flatnonzero(inclusion > 0.5))


def model_counts(draws: PosteriorDraws) -> Counter:
    return Counter(tuple(int(j) for j in np.flatnonzero(row)) for row in draws.z_draws)


def select_highest_frequency_model(draws: PosteriorDraws) -> tuple[int, ...]:
    """Most visited model; ties go to the smaller model, then the lexicographically first."""
    if draws.n_samples < 1:
        raise ValueError("no posterior draws to summarize")
    counts = model_counts(draws)
    return min(counts, key=lambda m: (-counts[m], len(m), m))


# ---------------------------------------------------------------- refit


def is_separable(x: np.ndarray, e: np.ndarray) -> bool:
    """True when some β classifies every row strictly correctly (complete separation)."""
    if x.shape[1] == 0:
        return False
    sign = np.where(np.asarray(e) == 1, 1.0, -1.0)
    # feasibility of sign_i x_iᵀβ >= 1
    res = linprog(
        c=np.zeros(x.shape[1]),
        A_ub=-(sign[:, None] * x),
        b_ub=-np.ones(x.shape[0]),
        bounds=[(None, None)] * x.shape[1],
        method="highs",
    )
    return res.status == 0


def _irls(x, e, penalty=0.0, tol=1e-8, max_iter=100):
    k = x.shape[1]
    beta = np.zeros(k)

    def objective(b):
        eta = x @ b
        return float(np.sum(e * eta - np.logaddexp(0.0, eta)) - 0.5 * penalty * b @ b)

    obj = objective(beta)
    converged = False
    for _ in range(max_iter):
        prob = expit(x @ beta)
        score = x.T @ (e - prob) - penalty * beta
        if np.max(np.abs(score)) < tol:
            converged = True
            break
        hess = x.T @ (x * (prob * (1.0 - prob))[:, None]) + (penalty + 1e-12) * np.eye(k)
        step = np.linalg.solve(hess, score)
        t = 1.0
        while t > 1e-10:
            cand = beta + t * step
            new = objective(cand)
            if new >= obj - 1e-12:
                break
            t *= 0.5
        beta, obj = cand, new
    prob = expit(x @ beta)
    score = x.T @ (e - prob) - penalty * beta
    converged = converged or np.max(np.abs(score)) < tol
    return beta, score, converged


def refit_glm(design: GroupedDesign, e, selected, ridge: float = 1e-4) -> np.ndarray:
    """Logistic MLE (no intercept) on the columns of the selected groups; zeros elsewhere.

    Fits by IRLS with step halving. Under complete separation the MLE does not
    exist: a :class:`SeparationWarning` is issued and a ridge-stabilized
    estimate with penalty ``ridge`` is returned instead.
    """
    e = np.asarray(e, dtype=float)
    beta = np.zeros(design.p)
    cols = design.support(selected)
    if not cols.any():
        return beta
    x = design.x[:, cols]
    if is_separable(x, e):
        warnings.warn("selected columns separate the responses; using ridge estimate", SeparationWarning)
        fit, _, _ = _irls(x, e, penalty=ridge)
    else:
        fit, score, ok = _irls(x, e)
        if np.linalg.norm(fit) > 1e3 or not ok:
            warnings.warn("IRLS did not settle; using ridge estimate", SeparationWarning)
            fit, _, _ = _irls(x, e, penalty=ridge)
    beta[cols] = fit
    return beta


# ---------------------------------------------------------------- metrics


def confusion_counts(selected, true_model, r: int) -> tuple[int, int, int, int]:
    sel = np.zeros(r, dtype=bool)
    tru = np.zeros(r, dtype=bool)
    sel[list(selected)] = True
    tru[list(true_model)] = True
    tp = int(np.sum(sel & tru))
    tn = int(np.sum(~sel & ~tru))
    fp = int(np.sum(sel & ~tru))
    fn = int(np.sum(~sel & tru))
    return tp, tn, fp, fn


def matthews(tp: int, tn: int, fp: int, fn: int) -> float:
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def compute_metrics(
    selected,
    true_model,
    r: int,
    refit_beta=None,
    test_x=None,
    e_test=None,
    mspe_scale: str = "probability",
) -> MetricSet:
    """Group-level sensitivity, specificity, MCC and #errors, plus test MSPE.

    ``mspe_scale="probability"`` compares σ(xᵀβ̂) with the 0/1 test labels
    (Brier score); ``"linear"`` uses xᵀβ̂ itself.
    """
    if r < 1:
        raise ValueError("need at least one group")
    tp, tn, fp, fn = confusion_counts(selected, true_model, r)
    mspe = float("nan")
    if refit_beta is not None and test_x is not None and e_test is not None and len(e_test):
        lin = np.asarray(test_x) @ np.asarray(refit_beta)
        if mspe_scale == "probability":
            pred = expit(lin)
        elif mspe_scale == "linear":
            pred = lin
        else:
            raise ValueError(f"unknown mspe_scale {mspe_scale!r}")
        mspe = float(np.mean((pred - np.asarray(e_test)) ** 2))
    return MetricSet(
        sensitivity=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
        mcc=matthews(tp, tn, fp, fn),
        mspe=mspe,
        n_errors=fp + fn,
    )


@dataclass
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def roc_from_scores(scores, labels) -> RocCurve:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes in the test labels")
    thresholds = np.unique(scores)[::-1]
    order = np.argsort(-scores, kind="mergesort")
    s_sorted = scores[order]
    l_sorted = labels[order]
    # cumulative counts at the last position of each distinct score
    last = np.r_[np.flatnonzero(np.diff(s_sorted)), s_sorted.size - 1]
    tp = np.cumsum(l_sorted)[last]
    fp = np.cumsum(~l_sorted)[last]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, thresholds]
    auc = float(np.trapezoid(tpr, fpr)) if hasattr(np, "trapezoid") else float(np.trapz(tpr, fpr))
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr, auc=auc)


def roc_curve(refit_beta, test_x, e_test) -> RocCurve:
    """ROC of the predicted probabilities σ(xᵀβ̂) against the test labels."""
    return roc_from_scores(expit(np.asarray(test_x) @ np.asarray(refit_beta)), e_test)


def classify(refit_beta, test_x, cutoff: float = 0.5) -> np.ndarray:
    return (expit(np.asarray(test_x) @ np.asarray(refit_beta)) >= cutoff).astype(np.int64)


def summarize(draws: PosteriorDraws, design: GroupedDesign, e) -> SelectionReport:
    """Median-probability selection, highest-frequency model and GLM refit in one report."""
    incl = inclusion_probabilities(draws)
    selected = select_median_probability_model(incl)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SeparationWarning)
        beta = refit_glm(design, e, selected)
    return SelectionReport(
        inclusion_prob=incl,
        selected=selected,
        model_counts=dict(model_counts(draws)),
        refit_beta=beta,
        highest_frequency=select_highest_frequency_model(draws),
    )
