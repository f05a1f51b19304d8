"""Macro/Micro-F1 evaluation over split masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ghgrl.errors import DataError


@dataclass(frozen=True)
class EvalReport:
    macro_f1: float
    micro_f1: float
    per_class_f1: tuple[float, ...]
    confusion: np.ndarray  # (C, C) counts, rows true class, cols predicted
    split: str

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "per_class_f1": list(self.per_class_f1),
            "confusion": self.confusion.tolist(),
        }


def predictions(logits: np.ndarray) -> np.ndarray:
    """Argmax per row; ties resolve to the lowest class index."""
    logits = np.asarray(logits)
    if logits.ndim != 2:
        raise DataError("logits must be 2-D")
    return np.argmax(logits, axis=1)


def evaluate(
    logits: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
    split: str = "",
) -> EvalReport:
    """Score argmax predictions on the masked rows.

    Macro-F1 averages per-class F1 over all classes, counting a class
    absent from both labels and predictions as 0. Micro-F1 comes from
    global TP/FP/FN counts, which for single-label rows equals accuracy.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    if logits.ndim != 2:
        raise DataError("logits must be 2-D")
    n, num_classes = logits.shape
    if labels.shape != (n,) or mask.shape != (n,):
        raise DataError("labels and mask must match logits rows")
    if not mask.any():
        raise DataError("empty evaluation mask")
    true = labels[mask]
    if true.min() < 0 or true.max() >= num_classes:
        raise DataError("labels out of range for logit width")
    pred = predictions(logits[mask])

    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (true, pred), 1)
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = 2.0 * tp + fp + fn
    per_class = np.where(denom > 0, 2.0 * tp / np.where(denom > 0, denom, 1.0), 0.0)
    micro_denom = 2.0 * tp.sum() + fp.sum() + fn.sum()
    micro = 2.0 * tp.sum() / micro_denom if micro_denom > 0 else 0.0
    return EvalReport(
        macro_f1=float(per_class.mean()),
        micro_f1=float(micro),
        per_class_f1=tuple(float(v) for v in per_class),
        confusion=confusion,
        split=split,
    )
