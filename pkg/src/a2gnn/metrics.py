"""Confusion matrices and Macro/Micro-F1."""

from __future__ import annotations

import numpy as np


def confusion(pred, truth, num_classes: int) -> np.ndarray:
    """C x C count matrix, rows indexed by true class, columns by prediction."""
    pred = np.asarray(pred, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(truth)} labels")
    if len(pred) == 0:
        raise ValueError("cannot build a confusion matrix from empty arrays")
    for name, a in (("prediction", pred), ("label", truth)):
        if a.min() < 0 or a.max() >= num_classes:
            raise ValueError(f"{name} outside [0, {num_classes})")
    counts = np.bincount(truth * num_classes + pred, minlength=num_classes * num_classes)
    return counts.reshape(num_classes, num_classes)


def macro_micro_f1(cm) -> tuple[float, float]:
    # Absent classes (no true and no predicted nodes) count as F1 = 0.
    cm = np.asarray(cm, dtype=np.int64)
    total = cm.sum()
    if total < 1:
        raise ValueError("confusion matrix is empty")
    tp = np.diag(cm).astype(np.float64)
    denom = cm.sum(axis=0) + cm.sum(axis=1)  # 2TP + FP + FN
    f1 = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(f1.mean()), float(tp.sum() / total)


def f1_scores(pred, truth, num_classes: int) -> tuple[float, float]:
    return macro_micro_f1(confusion(pred, truth, num_classes))
