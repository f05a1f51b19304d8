"""Heterogeneous-graph representation learning with LLM-estimated node types.

The pipeline runs in file-mediated stages: type-schema generation,
per-node annotation, sentence-embedding feature construction, and
training of a parameter-adaptive GNN whose per-node weights are selected
by the estimated types and gated by their confidence scores.
"""

__version__ = "0.1.0"

from ghgrl.errors import BackendError, DataError
from ghgrl.graph import CorruptionSpec, HeteroGraph, corrupt, load_dataset


def __getattr__(name):
    # lazy: the estimator pulls in scikit-learn, which the file-level
    # pipeline stages never need
    if name == "PagnnNodeClassifier":
        from ghgrl.estimator import PagnnNodeClassifier

        return PagnnNodeClassifier
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "BackendError",
    "CorruptionSpec",
    "DataError",
    "HeteroGraph",
    "PagnnNodeClassifier",
    "corrupt",
    "load_dataset",
    "__version__",
]
