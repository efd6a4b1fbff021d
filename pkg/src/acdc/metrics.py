"""Classification scoring."""

from __future__ import annotations

import numpy as np

__all__ = ["weighted_f1"]


def weighted_f1(truth, pred) -> float:
    """Support-weighted mean of per-class F1 scores.

    A class with zero precision+recall contributes an F1 of 0. Weights are
    the class supports in ``truth``; classes appearing only in ``pred``
    get zero weight.
    """
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise ValueError(f"truth and pred must be equal-length 1-D arrays, got {truth.shape} vs {pred.shape}")
    if truth.size == 0:
        raise ValueError("cannot score an empty label set")

    total = 0.0
    for cls in np.unique(truth):
        tp = np.sum((pred == cls) & (truth == cls))
        fp = np.sum((pred == cls) & (truth != cls))
        fn = np.sum((pred != cls) & (truth == cls))
        support = tp + fn
        denom = 2 * tp + fp + fn
        f1 = (2 * tp / denom) if denom else 0.0
        total += f1 * support
    return float(total / truth.size)
