"""Reconstruction quality metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateSignalError, InvalidArgumentError


@dataclass
class Metrics:
    cnmse: float
    cnmse_db: float
    zero_columns: int = 0
    support_precision: float | None = None
    support_recall: float | None = None
    support_f1: float | None = None
    runtime_s: float | None = None
    rank_selected: int | None = None


def cnmse_detail(X, X_hat):
    """Column-averaged NMSE and the number of zero reference columns skipped."""
    X = np.asarray(X, dtype=float)
    X_hat = np.asarray(X_hat, dtype=float)
    if X.shape != X_hat.shape or X.ndim != 2:
        raise InvalidArgumentError(f"shape mismatch: {X.shape} vs {X_hat.shape}")
    power = np.sum(X ** 2, axis=0)
    keep = power > 0
    if not np.any(keep):
        raise DegenerateSignalError("every reference column is zero")
    err = np.sum((X - X_hat) ** 2, axis=0)
    return float(np.mean(err[keep] / power[keep])), int(np.count_nonzero(~keep))


def cnmse(X, X_hat):
    """``(1/T) sum_t ||x_t - x_hat_t||^2 / ||x_t||^2`` over nonzero reference columns."""
    return cnmse_detail(X, X_hat)[0]


def to_db(value):
    return float(10.0 * np.log10(max(value, 1e-300)))


def support_scores(true_support, row_prob, threshold=0.5):
    """Precision, recall and F1 of the thresholded row-activity estimate."""
    truth = np.asarray(true_support, dtype=bool)
    est = np.asarray(row_prob) > threshold
    tp = int(np.sum(truth & est))
    precision = tp / est.sum() if est.any() else (1.0 if not truth.any() else 0.0)
    recall = tp / truth.sum() if truth.any() else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return float(precision), float(recall), float(f1)


def evaluate(X, recon, true_support=None, runtime_s=None):
    value, zeros = cnmse_detail(X, recon.X_hat)
    m = Metrics(cnmse=value, cnmse_db=to_db(value), zero_columns=zeros,
                runtime_s=runtime_s, rank_selected=recon.rank)
    if true_support is not None:
        m.support_precision, m.support_recall, m.support_f1 = support_scores(
            true_support, recon.support_row)
    return m
