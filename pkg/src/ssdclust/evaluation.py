"""Clustering accuracy under the best matching of predicted to true labels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .spectral import Segmentation


@dataclass
class AccuracyReport:
    """``accuracy`` is a percentage. ``permutation[p]`` is the true class
    matched to predicted cluster ``p``; ``confusion[i, j]`` counts items of
    true class ``i`` whose relabelled prediction is ``j``."""

    accuracy: float
    permutation: np.ndarray
    confusion: np.ndarray

    @property
    def error(self) -> float:
        return 100.0 - self.accuracy

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "error": self.error,
            "permutation": self.permutation.tolist(),
            "confusion": self.confusion.tolist(),
        }


def confusion_matrix(pred, truth, n: int | None = None) -> np.ndarray:
    """``M[p, t]`` = number of items predicted ``p`` with true label ``t``."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if n is None:
        n = int(max(pred.max(initial=0), truth.max(initial=0))) + 1
    M = np.zeros((n, n), dtype=np.int64)
    np.add.at(M, (pred, truth), 1)
    return M


def clustering_accuracy(pred, truth) -> AccuracyReport:
    """Percentage of items correct under the optimal one-to-one relabelling
    of ``pred``, found exactly with the Hungarian algorithm."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError(f"label vectors differ in shape: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("empty label vectors")
    if pred.min() < 0 or truth.min() < 0:
        raise ValueError("labels must be non-negative")
    M = confusion_matrix(pred, truth)
    rows, cols = linear_sum_assignment(M, maximize=True)
    perm = np.empty(M.shape[0], dtype=np.int64)
    perm[rows] = cols
    correct = int(M[rows, cols].sum())
    relabelled = perm[pred]
    conf = confusion_matrix(truth, relabelled, M.shape[0])
    return AccuracyReport(100.0 * correct / pred.size, perm, conf)


def segmentation_error(pred: Segmentation, truth: Segmentation) -> float:
    """Percentage of items whose segment disagrees with the truth, under the
    best matching of segment labels."""
    if pred.n != truth.n:
        raise ValueError(f"segmentations cover {pred.n} and {truth.n} items")
    return clustering_accuracy(pred.labels, truth.labels).error
