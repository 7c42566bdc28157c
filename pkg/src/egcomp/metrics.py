"""Classification and set-overlap metrics."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata


def roc_auc(labels, scores) -> float:
    """Rank-statistic AUC; tied scores contribute one half. NaN when a class is absent."""
    labels = np.asarray(labels).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    ranks = rankdata(scores)  # average ranks for ties
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def accuracy(labels, scores, threshold=0.5) -> float:
    labels = np.asarray(labels).astype(bool)
    pred = np.asarray(scores, dtype=np.float64) > threshold
    return float((pred == labels).mean()) if labels.size else math.nan


def set_jaccard(predicted, truth) -> float:
    predicted, truth = set(predicted), set(truth)
    union = predicted | truth
    return len(predicted & truth) / len(union) if union else 1.0


def set_f1(predicted, truth) -> float:
    predicted, truth = set(predicted), set(truth)
    if not predicted and not truth:
        return 1.0
    return 2.0 * len(predicted & truth) / (len(predicted) + len(truth))
