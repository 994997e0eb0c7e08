"""Accuracy, expected calibration error and partition quality."""

from dataclasses import dataclass

import numpy as np


def accuracy(predictions, truths):
    return float(np.mean(np.asarray(predictions) == np.asarray(truths)))


@dataclass
class CalibrationReport:
    n_bins: int
    bin_edges: np.ndarray
    mean_conf: np.ndarray  # NaN for empty bins
    acc: np.ndarray
    counts: np.ndarray
    ece: float

    def rows(self):
        """Reliability-diagram rows ``(bin_low, bin_high, mean_conf, acc, count)``."""
        return [
            (self.bin_edges[b], self.bin_edges[b + 1], self.mean_conf[b], self.acc[b], int(self.counts[b]))
            for b in range(self.n_bins)
        ]


def ece(confidences, predictions, truths, n_bins=15):
    """Equal-width binned ECE, ``sum_b (n_b / N) |acc_b - conf_b|``.

    Bins are ``(lo, hi]`` with the first bin closed at 0; empty bins add nothing.
    """
    conf = np.asarray(confidences, dtype=np.float64)
    correct = np.asarray(predictions) == np.asarray(truths)
    n = conf.size
    if n == 0:
        raise ValueError("ece needs at least one example")
    if conf.shape != correct.shape:
        raise ValueError("confidences, predictions and truths must have equal length")
    if np.any((conf < 0) | (conf > 1)):
        raise ValueError("confidences must lie in [0, 1]")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    bins = np.clip(np.ceil(conf * n_bins).astype(np.int64) - 1, 0, n_bins - 1)
    counts = np.bincount(bins, minlength=n_bins)
    conf_sum = np.bincount(bins, weights=conf, minlength=n_bins)
    acc_sum = np.bincount(bins, weights=correct.astype(np.float64), minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_conf = conf_sum / counts
        acc = acc_sum / counts
    gap = np.where(counts > 0, np.abs(acc_sum - conf_sum), 0.0)
    return CalibrationReport(n_bins, edges, mean_conf, acc, counts, float(gap.sum() / n))


def partition_quality(assigned_clean, corrupted):
    """Precision, recall and F1 of clean detection.

    Precision (and F1) are None when nothing was assigned clean.
    """
    assigned = np.asarray(assigned_clean, dtype=bool)
    truly_clean = ~np.asarray(corrupted, dtype=bool)
    hits = int((assigned & truly_clean).sum())
    n_assigned = int(assigned.sum())
    n_clean = int(truly_clean.sum())
    precision = hits / n_assigned if n_assigned else None
    recall = hits / n_clean if n_clean else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None if precision is None or recall is None else 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1
