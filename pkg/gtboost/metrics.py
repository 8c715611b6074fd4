# ============================================================
# Imports
# ============================================================

from typing import Dict, Iterable, Optional, Sequence

import numpy as np
from sklearn.metrics import roc_auc_score

from gtboost.errors import DataError
from gtboost.models import EvalReport

# ============================================================
# Input Checks
# ============================================================

def _pair(pred: Sequence[float], truth: Sequence[float]):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise DataError(f"length mismatch: {pred.shape[0]} predictions vs {truth.shape[0]} labels")
    if pred.size == 0:
        raise DataError("metrics need at least one sample")
    return pred, truth


def _binary(labels: np.ndarray) -> np.ndarray:
    if not np.isin(labels, (0.0, 1.0)).all():
        raise DataError("labels must be 0/1")
    return labels.astype(np.int64)


def is_binary(labels: Sequence[float]) -> bool:
    labels = np.asarray(labels)
    return bool(np.isin(labels, (0, 1)).all() and 0 < labels.sum() < labels.size)


def ranking_order(scores: np.ndarray) -> np.ndarray:
    """Indices by descending score; equal scores keep their original order."""
    return np.argsort(-scores, kind="stable")


# ============================================================
# Regression and Classification Metrics
# ============================================================

def rmse(pred: Sequence[float], truth: Sequence[float]) -> float:
    pred, truth = _pair(pred, truth)
    diff = pred - truth
    return float(np.sqrt(np.mean(diff * diff)))


def auc_roc(scores: Sequence[float], labels: Sequence[float]) -> float:
    """Area under the ROC curve; tied scores count one half (Mann-Whitney with midranks)."""
    scores, labels = _pair(scores, labels)
    labels = _binary(labels)
    if labels.min() == labels.max():
        raise DataError("AUC-ROC needs both classes present")
    return float(roc_auc_score(labels, scores))


def auc_pr(scores: Sequence[float], labels: Sequence[float]) -> float:
    """
    Area under the precision-recall curve as average precision: the mean, over
    positives, of the precision at each positive's rank (step definition).
    """
    scores, labels = _pair(scores, labels)
    labels = _binary(labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise DataError("AUC-PR needs at least one positive")
    hits = labels[ranking_order(scores)]
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float(precision[hits == 1].sum() / n_pos)


# ============================================================
# Ranking Metrics
# ============================================================

def _groups(groups: Sequence[int], n: int) -> Dict[int, np.ndarray]:
    groups = np.asarray(groups)
    if groups.shape != (n,):
        raise DataError("groups must have one id per sample")
    return {int(g): np.flatnonzero(groups == g) for g in np.unique(groups)}


def precision_at_k(scores: Sequence[float], labels: Sequence[float], k: int,
                   groups: Optional[Sequence[int]] = None) -> float:
    """
    Share of positives among the top-k by score: globally, or averaged over the groups
    holding at least k items.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    scores, labels = _pair(scores, labels)
    labels = _binary(labels)
    if groups is None:
        if k > labels.size:
            raise DataError(f"k={k} exceeds the {labels.size} scored items")
        return float(labels[ranking_order(scores)[:k]].mean())
    values = []
    for rows in _groups(groups, labels.size).values():
        if rows.size >= k:
            top = rows[ranking_order(scores[rows])[:k]]
            values.append(labels[top].mean())
    if not values:
        raise DataError(f"k={k} is larger than every group")
    return float(np.mean(values))


def mrr(scores: Sequence[float], labels: Sequence[float], groups: Optional[Sequence[int]]) -> float:
    """Mean over groups (with a positive) of 1 / rank of the first positive."""
    if groups is None:
        raise DataError("MRR needs query groups")
    scores, labels = _pair(scores, labels)
    labels = _binary(labels)
    reciprocal = []
    for rows in _groups(groups, labels.size).values():
        hits = labels[rows][ranking_order(scores[rows])]
        if hits.any():
            reciprocal.append(1.0 / (int(np.argmax(hits)) + 1))
    if not reciprocal:
        raise DataError("MRR: no group has a positive label")
    return float(np.mean(reciprocal))


# ============================================================
# Feature Correlations
# ============================================================

def pearson_matrix(X: np.ndarray, feature_subset: Sequence[int]) -> np.ndarray:
    """Pairwise Pearson correlations of the chosen columns (unit diagonal, symmetric)."""
    X = np.asarray(X, dtype=np.float64)
    columns = X[:, list(feature_subset)]
    constant = [int(j) for j, col in zip(feature_subset, columns.T) if np.ptp(col) == 0]
    if constant:
        raise DataError(f"constant feature(s) {constant} have no correlation")
    corr = np.atleast_2d(np.corrcoef(columns, rowvar=False))
    corr = np.clip(0.5 * (corr + corr.T), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


# ============================================================
# Report Assembly
# ============================================================

def evaluate(pred: Sequence[float], truth: Sequence[float], groups: Optional[Sequence[int]] = None,
             ks: Iterable[int] = (1, 2, 5, 10), n_features_used: int = 0) -> EvalReport:
    """
    RMSE always; AUC-ROC, AUC-PR and precision@k when the labels are 0/1 with both
    classes; MRR when groups are given and some group has a positive.
    """
    pred, truth = _pair(pred, truth)
    report = {"rmse": rmse(pred, truth), "n_features_used": n_features_used}
    if is_binary(truth):
        report["auc_roc"] = auc_roc(pred, truth)
        report["auc_pr"] = auc_pr(pred, truth)
        precision = {}
        for k in ks:
            try:
                precision[int(k)] = precision_at_k(pred, truth, int(k), groups)
            except DataError:
                continue
        report["precision_at_k"] = precision
        if groups is not None:
            try:
                report["mrr"] = mrr(pred, truth, groups)
            except DataError:
                pass
    return EvalReport(**report)
