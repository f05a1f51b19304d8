"""Heterogeneous graph data model, dataset files, splits, and corruption.

Graphs are plain immutable values: raw text attributes, undirected
edges, optional labels and split tags. Node files are JSONL, edge files
CSV (see `load_dataset`). The two corruption generators rewrite node
attributes only; topology, labels, and splits are never touched.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from ghgrl.errors import DataError
from ghgrl.rng import permutation, stream

SPLIT_TAGS = ("train", "val", "test", "none")

_SELECTION_STREAM = 0xC0
_SPLIT_STREAM = 0xC1
# per-node streams live above 2**32 so they never collide with the
# small module-level stream constants
_NODE_STREAM_BASE = 1 << 32


@dataclass(frozen=True)
class HeteroGraph:
    """An undirected graph whose nodes carry free-form string attributes.

    `labels` holds one entry per node (None for unlabeled nodes) or is
    None when the dataset has no labels at all; `splits` mirrors that
    with tags from SPLIT_TAGS.
    """

    node_count: int
    attributes: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    labels: tuple[int | None, ...] | None = None
    splits: tuple[str, ...] | None = None
    num_classes: int | None = None

    def __post_init__(self):
        if self.node_count < 0:
            raise DataError("node_count must be non-negative")
        if len(self.attributes) != self.node_count:
            raise DataError(
                f"expected {self.node_count} attributes, got {len(self.attributes)}"
            )
        if self.labels is not None and len(self.labels) != self.node_count:
            raise DataError("labels length must equal node_count")
        if self.splits is not None:
            if len(self.splits) != self.node_count:
                raise DataError("splits length must equal node_count")
            bad = set(self.splits) - set(SPLIT_TAGS)
            if bad:
                raise DataError(f"unknown split tags: {sorted(bad)}")
        if self.labels is not None and any(l is not None for l in self.labels):
            if self.num_classes is None or self.num_classes <= 0:
                raise DataError("num_classes must be positive when labels are present")
            for v, l in enumerate(self.labels):
                if l is not None and not 0 <= l < self.num_classes:
                    raise DataError(f"node {v}: label {l} outside [0, {self.num_classes})")

    def validate_edges(self, allow_self_loops: bool = False) -> None:
        """Check endpoint range, self-loops, and undirected duplicates."""
        seen: set[tuple[int, int]] = set()
        for src, dst in self.edges:
            if not (0 <= src < self.node_count and 0 <= dst < self.node_count):
                raise DataError(f"dangling edge endpoint in ({src}, {dst})")
            if src == dst and not allow_self_loops:
                raise DataError(f"self-loop at node {src} not permitted")
            key = (min(src, dst), max(src, dst))
            if key in seen:
                raise DataError(f"duplicate undirected edge ({src}, {dst})")
            seen.add(key)

    def split_mask(self, tag: str) -> np.ndarray:
        """Boolean mask of the nodes carrying split tag `tag`."""
        if self.splits is None:
            raise DataError("graph has no split assignment")
        return np.array([s == tag for s in self.splits], dtype=bool)

    def label_array(self, missing: int = -1) -> np.ndarray:
        """Labels as an int array with `missing` standing in for None."""
        if self.labels is None:
            return np.full(self.node_count, missing, dtype=np.int64)
        return np.array(
            [missing if l is None else l for l in self.labels], dtype=np.int64
        )


@dataclass(frozen=True)
class CorruptionSpec:
    """Parameters for the replacement (RIR) and deletion (RID) generators.

    `r` is the fraction of nodes corrupted; for RID, `deletion_fraction`
    of each selected node's whitespace tokens are removed; for RIR each
    selected node's attribute is swapped for a pooled candidate.
    """

    kind: str
    r: float
    deletion_fraction: float = 0.0
    pool: Mapping[int, tuple[str, ...]] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("RIR", "RID"):
            raise DataError(f"unknown corruption kind {self.kind!r}")
        if not 0.0 <= self.r <= 1.0:
            raise DataError("r must lie in [0, 1]")
        if not 0.0 <= self.deletion_fraction <= 1.0:
            raise DataError("deletion_fraction must lie in [0, 1]")
        if self.kind == "RIR":
            if self.pool is None:
                raise DataError("RIR requires a replacement pool")
            for node, candidates in self.pool.items():
                if len(candidates) == 0:
                    raise DataError(f"empty candidate list for node {node}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def corrupt(graph: HeteroGraph, spec: CorruptionSpec) -> HeteroGraph:
    """Apply `spec` to `graph`, returning a new graph with rewritten attributes.

    Exactly round(r * node_count) distinct nodes are selected via a
    seeded Fisher-Yates shuffle. Each selected node is then corrupted
    with its own (seed, node)-keyed stream, so the result does not
    depend on iteration order. Edges, labels, and splits pass through
    untouched.
    """
    n = graph.node_count
    k = _round_half_up(spec.r * n)
    order = permutation(n, spec.seed, _SELECTION_STREAM)
    selected = set(int(v) for v in order[:k])

    attributes = list(graph.attributes)
    for v in sorted(selected):
        if spec.kind == "RID":
            attributes[v] = _delete_tokens(
                attributes[v], spec.deletion_fraction, spec.seed, v
            )
        else:
            if spec.pool is None or v not in spec.pool:
                raise DataError(f"RIR selected node {v} but the pool has no entry for it")
            candidates = spec.pool[v]
            gen = stream(spec.seed, _NODE_STREAM_BASE + v)
            attributes[v] = candidates[int(gen.integers(0, len(candidates)))]
    return replace(graph, attributes=tuple(attributes))


def _delete_tokens(text: str, fraction: float, seed: int, node: int) -> str:
    # tokens are maximal whitespace-free runs; rejoining uses single spaces
    tokens = text.split()
    if not tokens:
        return text
    m = _round_half_up(fraction * len(tokens))
    if m == 0:
        return text
    gen = stream(seed, _NODE_STREAM_BASE + node)
    drop = set(int(i) for i in gen.choice(len(tokens), size=m, replace=False))
    return " ".join(t for i, t in enumerate(tokens) if i not in drop)


def load_dataset(
    nodes_path: str | Path,
    edges_path: str | Path,
    allow_self_loops: bool = False,
) -> HeteroGraph:
    """Load a graph from a nodes JSONL file and an edges CSV file.

    Node ids may be arbitrary integers; they are densely re-indexed to
    0..n-1 preserving file order. Edge endpoints refer to the original
    ids. Errors report the offending line number.
    """
    records = _read_node_records(nodes_path)
    id_map = {rec["id"]: idx for idx, rec in enumerate(records)}

    attributes = tuple(rec["attribute"] for rec in records)
    raw_labels = [rec["label"] for rec in records]
    has_labels = any(l is not None for l in raw_labels)
    labels = tuple(raw_labels) if has_labels else None
    num_classes = (max(l for l in raw_labels if l is not None) + 1) if has_labels else None
    raw_splits = [rec["split"] for rec in records]
    splits = (
        tuple("none" if s is None else s for s in raw_splits)
        if any(s is not None for s in raw_splits)
        else None
    )

    edges = _read_edges(edges_path, id_map)
    graph = HeteroGraph(
        node_count=len(records),
        attributes=attributes,
        edges=edges,
        labels=labels,
        splits=splits,
        num_classes=num_classes,
    )
    graph.validate_edges(allow_self_loops=allow_self_loops)
    return graph


def _read_node_records(nodes_path: str | Path) -> list[dict]:
    path = Path(nodes_path)
    if not path.exists():
        raise DataError(f"nodes file not found: {path}")
    records = []
    seen_ids: set[int] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or "id" not in obj or "attribute" not in obj:
                raise DataError(f"{path}:{lineno}: node object needs 'id' and 'attribute'")
            node_id = obj["id"]
            if not isinstance(node_id, int):
                raise DataError(f"{path}:{lineno}: node id must be an integer")
            if node_id in seen_ids:
                raise DataError(f"{path}:{lineno}: duplicate node id {node_id}")
            seen_ids.add(node_id)
            attribute = obj["attribute"]
            if not isinstance(attribute, str):
                raise DataError(f"{path}:{lineno}: attribute must be a string")
            label = obj.get("label")
            if label is not None and not isinstance(label, int):
                raise DataError(f"{path}:{lineno}: label must be an integer or null")
            split = obj.get("split")
            if split is not None and split not in SPLIT_TAGS:
                raise DataError(f"{path}:{lineno}: split must be one of {SPLIT_TAGS} or null")
            records.append(
                {"id": node_id, "attribute": attribute, "label": label, "split": split}
            )
    if not records:
        raise DataError(f"{path}: no node records")
    return records


def _read_edges(
    edges_path: str | Path, id_map: Mapping[int, int]
) -> tuple[tuple[int, int], ...]:
    path = Path(edges_path)
    if not path.exists():
        raise DataError(f"edges file not found: {path}")
    edges: list[tuple[int, int]] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty edges file") from None
        if [h.strip() for h in header] != ["src", "dst"]:
            raise DataError(f"{path}:1: expected header 'src,dst'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected two columns")
            try:
                src, dst = int(row[0]), int(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: endpoints must be integers") from None
            if src not in id_map or dst not in id_map:
                missing = src if src not in id_map else dst
                raise DataError(f"{path}:{lineno}: dangling edge endpoint {missing}")
            edges.append((id_map[src], id_map[dst]))
    return tuple(edges)


def node_id_map(nodes_path: str | Path) -> dict[int, int]:
    """Original-id -> dense-index map for a nodes file (file order)."""
    return {rec["id"]: idx for idx, rec in enumerate(_read_node_records(nodes_path))}


def load_nodes(nodes_path: str | Path) -> HeteroGraph:
    """Load a nodes file alone (empty edge set), e.g. for corruption."""
    records = _read_node_records(nodes_path)
    raw_labels = [rec["label"] for rec in records]
    has_labels = any(l is not None for l in raw_labels)
    raw_splits = [rec["split"] for rec in records]
    return HeteroGraph(
        node_count=len(records),
        attributes=tuple(rec["attribute"] for rec in records),
        edges=(),
        labels=tuple(raw_labels) if has_labels else None,
        splits=(
            tuple("none" if s is None else s for s in raw_splits)
            if any(s is not None for s in raw_splits)
            else None
        ),
        num_classes=(
            max(l for l in raw_labels if l is not None) + 1 if has_labels else None
        ),
    )


def load_pool(
    pool_path: str | Path, id_map: Mapping[int, int] | None = None
) -> dict[int, tuple[str, ...]]:
    """Load an RIR replacement pool; ids are translated through `id_map`."""
    path = Path(pool_path)
    if not path.exists():
        raise DataError(f"pool file not found: {path}")
    pool: dict[int, tuple[str, ...]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if "id" not in obj or "candidates" not in obj:
                raise DataError(f"{path}:{lineno}: pool object needs 'id' and 'candidates'")
            node_id = obj["id"]
            candidates = obj["candidates"]
            if (
                not isinstance(candidates, list)
                or not candidates
                or not all(isinstance(c, str) for c in candidates)
            ):
                raise DataError(f"{path}:{lineno}: candidates must be a non-empty string list")
            if id_map is not None:
                if node_id not in id_map:
                    raise DataError(f"{path}:{lineno}: pool id {node_id} not in nodes file")
                node_id = id_map[node_id]
            pool[node_id] = tuple(candidates)
    return pool


def save_nodes(graph: HeteroGraph, path: str | Path) -> None:
    """Write the nodes JSONL file for `graph` (dense ids)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for v in range(graph.node_count):
            obj = {
                "id": v,
                "attribute": graph.attributes[v],
                "label": None if graph.labels is None else graph.labels[v],
                "split": None
                if graph.splits is None or graph.splits[v] == "none"
                else graph.splits[v],
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def save_edges(edges: Iterable[tuple[int, int]], path: str | Path) -> None:
    """Write an edges CSV file with the standard 'src,dst' header."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst"])
        for src, dst in edges:
            writer.writerow([src, dst])


def stratified_splits(
    graph: HeteroGraph, train_frac: float, val_frac: float, seed: int
) -> HeteroGraph:
    """Attach seeded stratified train/val/test tags to labeled nodes.

    Used when the dataset files carry no split column. Unlabeled nodes
    get the tag 'none'; fractions apply per class with the remainder
    assigned to test.
    """
    if graph.labels is None:
        raise DataError("cannot build stratified splits without labels")
    if train_frac <= 0 or val_frac < 0 or train_frac + val_frac >= 1.0:
        raise DataError("need train_frac > 0, val_frac >= 0, train+val < 1")
    tags = ["none"] * graph.node_count
    labels = graph.label_array()
    for cls in range(graph.num_classes or 0):
        members = np.flatnonzero(labels == cls)
        members = members[permutation(len(members), seed, _SPLIT_STREAM + (cls << 8))]
        n_train = max(1, _round_half_up(train_frac * len(members)))
        n_val = _round_half_up(val_frac * len(members))
        for i, v in enumerate(members):
            if i < n_train:
                tags[v] = "train"
            elif i < n_train + n_val:
                tags[v] = "val"
            else:
                tags[v] = "test"
    return replace(graph, splits=tuple(tags))
