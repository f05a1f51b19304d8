"""Depth diagnostics: simplified recurrences and over-smoothing profiles.

Two stripped-down message-passing models probe representation collapse:
a plain shared-weight recurrence h <- h + AGG(h W) and a typed variant
h <- h + AGG(h W[type(v)] + B[type(v)]). Deep normalized iteration of
the plain model drives all rows toward one direction; the typed model
keeps type groups apart. The over-smoothing profile quantifies the same
effect layer by layer on a real network's hidden states.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from ghgrl.errors import DataError
from ghgrl.graph import HeteroGraph
from ghgrl.pagnn import PagnnConfig, PagnnParams, TypedAdjacency, pagnn_forward
from ghgrl.rng import glorot_uniform, stream

_STREAM_PLAIN_W = 0x2000
_STREAM_TYPED_W = 0x2100
_STREAM_TYPED_B = 0x2200

BLOWUP_LIMIT = 1e12

VARIANTS = ("plain_g", "typed_g_tilde")


@dataclass(frozen=True)
class SimplifiedModelSpec:
    """Configuration of one simplified recurrence run.

    `identity_scale` pins the plain variant's weight to a positive
    multiple of the identity, the fixture whose deep limit is a
    computable dominant eigenvector; random weights are drawn from
    `weight_seed` otherwise.
    """

    variant: str
    layers: int
    weight_seed: int = 0
    type_index: tuple[int, ...] | None = None
    normalize_each_layer: bool = True
    identity_scale: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DataError(f"variant must be one of {VARIANTS}")
        if self.layers < 0:
            raise DataError("layers must be non-negative")
        if self.variant == "typed_g_tilde":
            if self.type_index is None or len(self.type_index) == 0:
                raise DataError("typed variant requires type indices for all nodes")
            if min(self.type_index) < 0:
                raise DataError("type indices must be non-negative")
            if self.identity_scale is not None:
                raise DataError("identity_scale applies to the plain variant only")
        if self.identity_scale is not None and self.identity_scale <= 0:
            raise DataError("identity_scale must be positive")


def _mean_adjacency(graph: HeteroGraph) -> TypedAdjacency:
    n = graph.node_count
    return TypedAdjacency.build(
        node_count=n,
        edges=graph.edges,
        fmt_index=[0] * n,
        fmt_conf=[1.0] * n,
        cont_index=[0] * n,
        cont_conf=[1.0] * n,
        num_format_types=1,
        num_content_types=1,
    )


def _normalize_rows(H: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(H, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return H / safe


def simplified_iterate(
    graph: HeteroGraph, features: np.ndarray, spec: SimplifiedModelSpec
) -> np.ndarray:
    """Run the simplified recurrence for spec.layers steps.

    With per-layer normalization each row is rescaled to unit norm after
    every step; direction-based conclusions are unaffected. Without it,
    magnitudes beyond BLOWUP_LIMIT abort with the offending layer index.
    """
    H = np.asarray(features, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != graph.node_count:
        raise DataError(
            f"features: expected ({graph.node_count}, d), got {H.shape}"
        )
    if not np.all(np.isfinite(H)):
        raise DataError("features contain non-finite values")
    d = H.shape[1]
    adj = _mean_adjacency(graph)

    if spec.variant == "plain_g":
        if spec.identity_scale is not None:
            W = spec.identity_scale * np.eye(d)
        else:
            W = glorot_uniform((d, d), spec.weight_seed, _STREAM_PLAIN_W)
        typed_rows = None
        W_t = B_t = None
    else:
        types = np.asarray(spec.type_index, dtype=np.int64)
        if types.shape != (graph.node_count,):
            raise DataError("type_index length must equal node count")
        t_count = int(types.max()) + 1
        W_t = glorot_uniform((t_count, d, d), spec.weight_seed, _STREAM_TYPED_W)
        B_t = stream(spec.weight_seed, _STREAM_TYPED_B).uniform(
            -1.0, 1.0, size=(t_count, d)
        )
        typed_rows = [np.flatnonzero(types == t) for t in range(t_count)]
        W = None

    H = H.copy()
    nz = adj.degrees > 0
    for layer in range(1, spec.layers + 1):
        M = adj.mean_neighbors(H)
        if spec.variant == "plain_g":
            H = H + M @ W
        else:
            # bias rides inside the aggregation, so isolated nodes get
            # neither the transform nor the bias
            agg = np.zeros_like(H)
            for t, rows in enumerate(typed_rows):
                if rows.size:
                    agg[rows] = M[rows] @ W_t[t] + B_t[t]
            agg[~nz] = 0.0
            H = H + agg
        if spec.normalize_each_layer:
            H = _normalize_rows(H)
        elif not np.all(np.isfinite(H)) or np.abs(H).max() > BLOWUP_LIMIT:
            raise DataError(f"magnitude blow-up at layer {layer}")
    return H


@dataclass(frozen=True)
class DependenceReport:
    dependent: bool
    numerical_rank: int
    max_abs_cosine: float


def linear_dependence_check(vectors: np.ndarray, tol: float) -> DependenceReport:
    """Numerical-rank dependence verdict for a set of row vectors.

    Rows are normalized first, so the verdict is invariant to positive
    rescaling of any row. Rank counts singular values above
    tol * largest; any zero row makes the set dependent outright.
    """
    V = np.asarray(vectors, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] < 1:
        raise DataError("need a 2-D array with at least one row")
    if tol <= 0:
        raise DataError("tol must be positive")
    norms = np.linalg.norm(V, axis=1)
    normalized = V / np.where(norms > 0, norms, 1.0)[:, None]
    s = np.linalg.svd(normalized, compute_uv=False)
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    cosines = normalized @ normalized.T
    np.fill_diagonal(cosines, 0.0)
    max_cos = float(np.abs(cosines).max()) if V.shape[0] > 1 else 0.0
    return DependenceReport(
        dependent=rank < V.shape[0],
        numerical_rank=rank,
        max_abs_cosine=max_cos,
    )


def min_pairwise_cosine(rows: np.ndarray) -> float:
    """Smallest cosine over all distinct row pairs."""
    R = _normalize_rows(np.asarray(rows, dtype=np.float64))
    cosines = R @ R.T
    iu = np.triu_indices(R.shape[0], k=1)
    if iu[0].size == 0:
        raise DataError("need at least two rows")
    return float(cosines[iu].min())


def min_cross_type_cosine(rows: np.ndarray, type_index: Sequence[int]) -> float:
    """Smallest cosine over row pairs with differing types."""
    R = _normalize_rows(np.asarray(rows, dtype=np.float64))
    types = np.asarray(type_index, dtype=np.int64)
    if types.shape != (R.shape[0],):
        raise DataError("type_index length must equal row count")
    cosines = R @ R.T
    diff = types[:, None] != types[None, :]
    if not diff.any():
        raise DataError("no cross-type pair exists")
    return float(cosines[diff].min())


@dataclass(frozen=True)
class OversmoothingProfile:
    """Per-layer, per-type cosine of type means against the global mean.

    `values[l]` is the mean over types present; `per_type[l][t]` is
    None for types with no node.
    """

    values: tuple[float, ...]
    per_type: tuple[tuple[float | None, ...], ...]
    layer_count: int
    type_count: int

    def __post_init__(self):
        for v in self.values:
            if not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
                raise DataError("profile values must lie in [-1, 1]")


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def oversmoothing_profile(
    runner: Callable[[HeteroGraph, Sequence, int], Sequence[np.ndarray]],
    graph: HeteroGraph,
    annotations: Sequence,
    max_layer: int,
) -> OversmoothingProfile:
    """Profile the states produced by `runner` across layers 0..max_layer.

    `runner(graph, annotations, max_layer)` must return at least
    max_layer + 1 matrices, index 0 being the input features and index l
    the state after layer l. Grouping is by content type. Each layer's
    value is the mean over present types of cosine(type mean vector,
    global mean vector).
    """
    if max_layer < 0:
        raise DataError("max_layer must be non-negative")
    hidden = runner(graph, annotations, max_layer)
    if len(hidden) < max_layer + 1:
        raise DataError(
            f"runner produced {len(hidden)} states, need {max_layer + 1}"
        )
    cont = np.asarray([a.content_index for a in annotations], dtype=np.int64)
    if cont.shape != (graph.node_count,):
        raise DataError("annotation count must equal node count")
    type_count = int(cont.max()) + 1
    groups = [np.flatnonzero(cont == t) for t in range(type_count)]
    values: list[float] = []
    per_type: list[tuple[float | None, ...]] = []
    for layer in range(max_layer + 1):
        H = np.asarray(hidden[layer], dtype=np.float64)
        global_mean = H.mean(axis=0)
        layer_vals: list[float | None] = []
        present: list[float] = []
        for rows in groups:
            if rows.size == 0:
                layer_vals.append(None)
                continue
            c = _cosine(H[rows].mean(axis=0), global_mean)
            layer_vals.append(c)
            present.append(c)
        if not present:
            raise DataError("no content type has any node")
        values.append(float(np.mean(present)))
        per_type.append(tuple(layer_vals))
    return OversmoothingProfile(
        values=tuple(values),
        per_type=tuple(per_type),
        layer_count=max_layer + 1,
        type_count=type_count,
    )


def pagnn_profile_runner(
    features: np.ndarray, config: PagnnConfig, params: PagnnParams
) -> Callable[[HeteroGraph, Sequence, int], Sequence[np.ndarray]]:
    """Runner capturing post-layer states of a configured network."""

    def run(graph: HeteroGraph, annotations: Sequence, max_layer: int):
        if config.num_layers < max_layer:
            raise DataError(
                f"network has {config.num_layers} layers, profile wants {max_layer}"
            )
        adj = TypedAdjacency.from_graph(
            graph, annotations, config.num_format_types, config.num_content_types
        )
        _, hidden = pagnn_forward(
            np.asarray(features, dtype=np.float64), adj, config, params,
            return_hidden=True,
        )
        return hidden

    return run


def ablation_config(config: PagnnConfig) -> PagnnConfig:
    """The same network with every type-conditioned block removed."""
    return replace(config, l_fmt=0, l_cont=0)


def save_profile_csv(profile: OversmoothingProfile, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "value"])
        for layer, value in enumerate(profile.values):
            writer.writerow([layer, f"{value:.10g}"])


def save_comparison_csv(
    profiles: Mapping[str, OversmoothingProfile], path: str | Path
) -> None:
    names = list(profiles)
    if not names:
        raise DataError("no profiles to compare")
    layer_count = min(profiles[n].layer_count for n in names)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer"] + names)
        for layer in range(layer_count):
            writer.writerow(
                [layer] + [f"{profiles[n].values[layer]:.10g}" for n in names]
            )


def save_gnuplot_data(
    profiles: Mapping[str, OversmoothingProfile], path: str | Path
) -> None:
    """Blank-line-separated blocks, one per profile, for `plot ... index k`."""
    lines: list[str] = []
    for name, profile in profiles.items():
        lines.append(f"# {name}")
        for layer, value in enumerate(profile.values):
            lines.append(f"{layer} {value:.10g}")
        lines.append("")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")
