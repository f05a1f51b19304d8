"""Graph topology fused with per-node type assignments.

Neighbor lists are stored as a sorted CSR so every reduction walks
neighbors in ascending id order; results are bit-identical run to run
regardless of how callers parallelize around this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ghgrl.errors import DataError


@dataclass(frozen=True)
class TypedAdjacency:
    """Undirected neighbor structure plus format/content type data."""

    node_count: int
    indptr: np.ndarray    # (n+1,) int64
    indices: np.ndarray   # (E,) int64, sorted within each node segment
    degrees: np.ndarray   # (n,) float64
    fmt_index: np.ndarray   # (n,) int64
    fmt_conf: np.ndarray    # (n,) float64 in [0, 1]
    cont_index: np.ndarray  # (n,) int64
    cont_conf: np.ndarray   # (n,) float64 in [0, 1]
    rows_by_fmt: tuple[np.ndarray, ...]
    rows_by_cont: tuple[np.ndarray, ...]

    @classmethod
    def build(
        cls,
        node_count: int,
        edges: Sequence[tuple[int, int]],
        fmt_index: Sequence[int],
        fmt_conf: Sequence[float],
        cont_index: Sequence[int],
        cont_conf: Sequence[float],
        num_format_types: int,
        num_content_types: int,
    ) -> "TypedAdjacency":
        n = int(node_count)
        if n < 1:
            raise DataError("adjacency needs at least one node")
        for name, arr in (
            ("fmt_index", fmt_index),
            ("fmt_conf", fmt_conf),
            ("cont_index", cont_index),
            ("cont_conf", cont_conf),
        ):
            if len(arr) != n:
                raise DataError(f"{name} length {len(arr)} != node count {n}")
        fi = np.asarray(fmt_index, dtype=np.int64)
        ci = np.asarray(cont_index, dtype=np.int64)
        fc = np.asarray(fmt_conf, dtype=np.float64)
        cc = np.asarray(cont_conf, dtype=np.float64)
        if fi.min(initial=0) < 0 or fi.max(initial=0) >= num_format_types:
            raise DataError("format index out of range")
        if ci.min(initial=0) < 0 or ci.max(initial=0) >= num_content_types:
            raise DataError("content index out of range")
        for name, conf in (("fmt_conf", fc), ("cont_conf", cc)):
            if np.any(conf < 0.0) or np.any(conf > 1.0):
                raise DataError(f"{name} outside [0, 1]")

        # symmetrize, dedupe, drop self-loops: N(v) excludes v because
        # Eq.-style residual terms already carry the node's own features
        pairs: set[tuple[int, int]] = set()
        for s, d in edges:
            s, d = int(s), int(d)
            if not (0 <= s < n and 0 <= d < n):
                raise DataError(f"edge ({s}, {d}) out of range for {n} nodes")
            if s == d:
                continue
            pairs.add((s, d))
            pairs.add((d, s))
        if pairs:
            flat = np.array(sorted(pairs), dtype=np.int64)
            srcs, dsts = flat[:, 0], flat[:, 1]
        else:
            srcs = np.empty(0, dtype=np.int64)
            dsts = np.empty(0, dtype=np.int64)
        counts = np.bincount(srcs, minlength=n).astype(np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return cls(
            node_count=n,
            indptr=indptr,
            indices=dsts,
            degrees=counts.astype(np.float64),
            fmt_index=fi,
            fmt_conf=fc,
            cont_index=ci,
            cont_conf=cc,
            rows_by_fmt=tuple(
                np.flatnonzero(fi == t) for t in range(num_format_types)
            ),
            rows_by_cont=tuple(
                np.flatnonzero(ci == t) for t in range(num_content_types)
            ),
        )

    @classmethod
    def from_graph(
        cls, graph, annotations, num_format_types: int, num_content_types: int
    ) -> "TypedAdjacency":
        if len(annotations) != graph.node_count:
            raise DataError(
                f"{len(annotations)} annotations for {graph.node_count} nodes"
            )
        return cls.build(
            node_count=graph.node_count,
            edges=graph.edges,
            fmt_index=[a.format_index for a in annotations],
            fmt_conf=[a.format_confidence for a in annotations],
            cont_index=[a.content_index for a in annotations],
            cont_conf=[a.content_confidence for a in annotations],
            num_format_types=num_format_types,
            num_content_types=num_content_types,
        )

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def _neighbor_sum(self, X: np.ndarray) -> np.ndarray:
        """out[v] = sum of X[u] over u in N(v); zero for isolated nodes."""
        out = np.zeros_like(X)
        nz = self.degrees > 0
        if not nz.any():
            return out
        gathered = X[self.indices]
        # empty segments occupy no room in `gathered`, so starts of the
        # nonempty segments partition it exactly
        starts = self.indptr[:-1][nz]
        out[nz] = np.add.reduceat(gathered, starts, axis=0)
        return out

    def mean_neighbors(self, X: np.ndarray) -> np.ndarray:
        """Row v = mean over N(v) of X[u]; zero row when N(v) is empty."""
        out = self._neighbor_sum(X)
        nz = self.degrees > 0
        out[nz] /= self.degrees[nz, None]
        return out

    def mean_neighbors_adjoint(self, G: np.ndarray) -> np.ndarray:
        """Transpose map of mean_neighbors under the standard inner product.

        mean_neighbors is D^-1 A with A symmetric, so the adjoint is
        A D^-1: scale each row by its own inverse degree, then
        neighbor-sum.
        """
        scaled = np.zeros_like(G)
        nz = self.degrees > 0
        scaled[nz] = G[nz] / self.degrees[nz, None]
        return self._neighbor_sum(scaled)
