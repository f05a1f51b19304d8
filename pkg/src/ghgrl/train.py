"""Full-graph training with Adam, early stopping, and history records."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ghgrl.errors import DataError
from ghgrl.graph import HeteroGraph
from ghgrl.metrics import EvalReport, evaluate
from ghgrl.pagnn import (
    PagnnConfig,
    PagnnParams,
    TypedAdjacency,
    init_params,
    pagnn_backward,
    pagnn_forward,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 5e-3
    weight_decay: float = 5e-4
    early_stop_patience: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise DataError("epochs must be positive")
        # zero is allowed so a null update stays expressible
        if self.learning_rate < 0:
            raise DataError("learning_rate must be non-negative")
        if self.weight_decay < 0:
            raise DataError("weight_decay must be non-negative")
        if self.early_stop_patience < 1:
            raise DataError("early_stop_patience must be at least 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_macro_f1: float
    val_micro_f1: float


@dataclass(frozen=True)
class TrainResult:
    params: PagnnParams
    history: tuple[EpochRecord, ...]
    best_epoch: int
    best_val_macro_f1: float


def cross_entropy_loss(
    logits: np.ndarray, labels: np.ndarray, mask: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean NLL over masked rows plus its gradient w.r.t. the logits.

    Uses the log-sum-exp shift for stability. Gradient rows outside the
    mask are exactly zero.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DataError("empty loss mask")
    rows = logits[mask]
    lab = labels[mask]
    if lab.min() < 0 or lab.max() >= logits.shape[1]:
        raise DataError("labels out of range for logit width")
    shifted = rows - rows.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    k = rows.shape[0]
    loss = -log_probs[np.arange(k), lab].mean()
    grad_rows = np.exp(log_probs)
    grad_rows[np.arange(k), lab] -= 1.0
    grad = np.zeros_like(logits)
    grad[mask] = grad_rows / k
    return float(loss), grad


class AdamOptimizer:
    """Adam with L2 weight decay added to every tensor's gradient."""

    def __init__(self, params: PagnnParams, learning_rate: float, weight_decay: float):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.step_count = 0
        self._slots = [
            (np.zeros_like(t), np.zeros_like(t)) for _, t in params.named_tensors()
        ]

    def step(self, params: PagnnParams, grads: PagnnParams) -> None:
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - ADAM_BETA1**t
        bias2 = 1.0 - ADAM_BETA2**t
        tensors = params.named_tensors()
        grad_tensors = grads.named_tensors()
        for (name, p), (gname, g), (m, v) in zip(tensors, grad_tensors, self._slots):
            if name != gname or p.shape != g.shape:
                raise DataError(f"gradient for {gname} does not match parameter {name}")
            g = g + self.weight_decay * p
            m += (1.0 - ADAM_BETA1) * (g - m)
            v += (1.0 - ADAM_BETA2) * (g * g - v)
            m_hat = m / bias1
            v_hat = v / bias2
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def _labeled_mask(graph: HeteroGraph, tag: str) -> np.ndarray:
    labels = graph.label_array()
    return graph.split_mask(tag) & (labels >= 0)


def train(
    graph: HeteroGraph,
    annotations: Sequence,
    features: np.ndarray,
    config: PagnnConfig,
    train_config: TrainConfig,
) -> TrainResult:
    """Fit parameters on the train split, early-stopping on val Macro-F1.

    Deterministic given the config seeds. The best-validation parameters
    are restored at the end. When the val split has no labeled nodes,
    the train split drives early stopping instead.
    """
    adj = TypedAdjacency.from_graph(
        graph, annotations, config.num_format_types, config.num_content_types
    )
    labels = graph.label_array()
    train_mask = _labeled_mask(graph, "train")
    if not train_mask.any():
        raise DataError("no labeled nodes in the train split")
    val_mask = _labeled_mask(graph, "val")
    if not val_mask.any():
        val_mask = train_mask

    H0 = np.asarray(features, dtype=np.float64)
    params = init_params(config)
    optimizer = AdamOptimizer(
        params, train_config.learning_rate, train_config.weight_decay
    )
    best_params = params.copy()
    best_macro = -np.inf
    best_epoch = 0
    stale = 0
    history: list[EpochRecord] = []
    for epoch in range(1, train_config.epochs + 1):
        logits = pagnn_forward(H0, adj, config, params)
        loss, dlogits = cross_entropy_loss(logits, labels, train_mask)
        grads, _ = pagnn_backward(H0, adj, config, params, dlogits)
        optimizer.step(params, grads)
        val_logits = pagnn_forward(H0, adj, config, params)
        report = evaluate(val_logits, labels, val_mask, split="val")
        history.append(
            EpochRecord(
                epoch=epoch,
                train_loss=loss,
                val_macro_f1=report.macro_f1,
                val_micro_f1=report.micro_f1,
            )
        )
        if report.macro_f1 > best_macro:
            best_macro = report.macro_f1
            best_params = params.copy()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= train_config.early_stop_patience:
                break
    return TrainResult(
        params=best_params,
        history=tuple(history),
        best_epoch=best_epoch,
        best_val_macro_f1=float(best_macro),
    )


def save_history(history: Sequence[EpochRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_macro_f1", "val_micro_f1"])
        for rec in history:
            writer.writerow(
                [
                    rec.epoch,
                    f"{rec.train_loss:.10g}",
                    f"{rec.val_macro_f1:.10g}",
                    f"{rec.val_micro_f1:.10g}",
                ]
            )


def evaluate_params(
    graph: HeteroGraph,
    annotations: Sequence,
    features: np.ndarray,
    config: PagnnConfig,
    params: PagnnParams,
    split: str,
) -> EvalReport:
    """Forward pass plus evaluation on one labeled split."""
    adj = TypedAdjacency.from_graph(
        graph, annotations, config.num_format_types, config.num_content_types
    )
    mask = _labeled_mask(graph, split)
    if not mask.any():
        raise DataError(f"no labeled nodes in the {split!r} split")
    logits = pagnn_forward(np.asarray(features, dtype=np.float64), adj, config, params)
    return evaluate(logits, graph.label_array(), mask, split=split)
