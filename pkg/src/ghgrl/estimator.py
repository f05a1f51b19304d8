"""scikit-learn style facade over the typed-graph classifier.

PagnnNodeClassifier wires feature rows, an edge list, and per-node type
annotations into the training loop behind the usual fit / predict /
predict_proba surface, so it composes with sklearn model selection
utilities. Training is transductive: predict defaults to the fitted
graph and annotations unless overridden.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ghgrl.errors import DataError
from ghgrl.graph import HeteroGraph
from ghgrl.pagnn import PagnnConfig, TypedAdjacency, pagnn_forward
from ghgrl.rng import permutation
from ghgrl.train import TrainConfig, train

_ESTIMATOR_SPLIT_STREAM = 0xC3


def check_feature_matrix(X) -> np.ndarray:
    """Validate and convert features to a finite float64 2-D array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError(f"X must be a non-empty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("X contains non-finite values")
    return X


def check_label_vector(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise DataError(f"y must have shape ({n},), got {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        cast = y.astype(np.int64)
        if not np.array_equal(cast, y):
            raise DataError("y must hold integer class labels")
        y = cast
    return y.astype(np.int64)


def check_edge_list(edges, n: int) -> tuple[tuple[int, int], ...]:
    out = []
    for e in edges:
        if len(e) != 2:
            raise DataError(f"edge {e!r} is not a pair")
        s, d = int(e[0]), int(e[1])
        if not (0 <= s < n and 0 <= d < n):
            raise DataError(f"edge ({s}, {d}) out of range for {n} nodes")
        out.append((s, d))
    return tuple(out)


class PagnnNodeClassifier(BaseEstimator, ClassifierMixin):
    """Node classifier with type-conditioned per-node parameters.

    Parameters mirror the network and training knobs; all are plain
    values so get_params / set_params / clone behave normally. The graph
    structure itself travels through fit's keyword arguments, not the
    constructor.
    """

    def __init__(
        self,
        hidden_dim: int = 64,
        num_layers: int = 2,
        l_fmt: int = 1,
        l_cont: int = 2,
        alpha: float = 0.5,
        activation: str = "relu",
        confidence_floor: float = 0.0,
        learning_rate: float = 5e-3,
        weight_decay: float = 5e-4,
        epochs: int = 200,
        early_stop_patience: int = 30,
        val_fraction: float = 0.2,
        seed: int = 0,
    ):
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.l_fmt = l_fmt
        self.l_cont = l_cont
        self.alpha = alpha
        self.activation = activation
        self.confidence_floor = confidence_floor
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.early_stop_patience = early_stop_patience
        self.val_fraction = val_fraction
        self.seed = seed

    def _split_tags(self, y_idx: np.ndarray, num_classes: int) -> tuple[str, ...]:
        # per-class seeded shuffle; val_fraction of each class to val
        tags = ["train"] * len(y_idx)
        for cls in range(num_classes):
            members = np.flatnonzero(y_idx == cls)
            members = members[
                permutation(len(members), self.seed, _ESTIMATOR_SPLIT_STREAM + (cls << 8))
            ]
            n_val = int(np.floor(self.val_fraction * len(members) + 0.5))
            n_val = min(n_val, len(members) - 1)  # keep one train node per class
            for v in members[:n_val]:
                tags[v] = "val"
        return tuple(tags)

    def fit(self, X, y, *, edges: Sequence, annotations: Sequence):
        """Fit on one graph: features X, labels y, topology and types.

        `annotations` supplies per-node format/content indices and
        confidences (NodeAnnotation instances or anything with those
        four attributes).
        """
        if not (0.0 <= self.val_fraction < 1.0):
            raise DataError("val_fraction must lie in [0, 1)")
        X = check_feature_matrix(X)
        n = X.shape[0]
        y = check_label_vector(y, n)
        edges = check_edge_list(edges, n)
        if len(annotations) != n:
            raise DataError(f"{len(annotations)} annotations for {n} nodes")
        classes, y_idx = np.unique(y, return_inverse=True)
        if len(classes) < 2:
            raise DataError("need at least two distinct classes in y")

        graph = HeteroGraph(
            node_count=n,
            attributes=("",) * n,
            edges=edges,
            labels=tuple(int(c) for c in y_idx),
            splits=self._split_tags(y_idx, len(classes)),
            num_classes=len(classes),
        )
        config = PagnnConfig(
            num_layers=self.num_layers,
            l_fmt=self.l_fmt,
            l_cont=self.l_cont,
            d_in=X.shape[1],
            d_fmt=self.hidden_dim,
            d_cont=self.hidden_dim,
            d_rgn=self.hidden_dim,
            num_format_types=max(int(a.format_index) for a in annotations) + 1,
            num_content_types=max(int(a.content_index) for a in annotations) + 1,
            num_classes=len(classes),
            alpha=self.alpha,
            activation=self.activation,
            use_input_projection=True,
            confidence_floor=self.confidence_floor,
            seed=self.seed,
        )
        train_config = TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            early_stop_patience=self.early_stop_patience,
            seed=self.seed,
        )
        result = train(graph, annotations, X, config, train_config)
        self.classes_ = classes
        self.config_ = config
        self.params_ = result.params
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.n_features_in_ = X.shape[1]
        self._edges = edges
        self._annotations = tuple(annotations)
        return self

    def _adjacency(self, n: int, edges, annotations) -> TypedAdjacency:
        edges = self._edges if edges is None else check_edge_list(edges, n)
        annotations = self._annotations if annotations is None else tuple(annotations)
        if len(annotations) != n:
            raise DataError(f"{len(annotations)} annotations for {n} nodes")
        return TypedAdjacency.from_graph(
            HeteroGraph(node_count=n, attributes=("",) * n, edges=edges),
            annotations,
            self.config_.num_format_types,
            self.config_.num_content_types,
        )

    def decision_function(self, X, *, edges=None, annotations=None) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = check_feature_matrix(X)
        adj = self._adjacency(X.shape[0], edges, annotations)
        return pagnn_forward(X, adj, self.config_, self.params_)

    def predict_proba(self, X, *, edges=None, annotations=None) -> np.ndarray:
        logits = self.decision_function(X, edges=edges, annotations=annotations)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X, *, edges=None, annotations=None) -> np.ndarray:
        logits = self.decision_function(X, edges=edges, annotations=annotations)
        return self.classes_[np.argmax(logits, axis=1)]

    def transform(self, X, *, edges=None, annotations=None) -> np.ndarray:
        """Final-layer node representations (the classifier's input)."""
        check_is_fitted(self, "params_")
        X = check_feature_matrix(X)
        adj = self._adjacency(X.shape[0], edges, annotations)
        _, hidden = pagnn_forward(
            X, adj, self.config_, self.params_, return_hidden=True
        )
        return hidden[-1]
