"""Shared builders for synthetic graphs, datasets, and annotations."""

from __future__ import annotations

import numpy as np

from ghgrl.graph import HeteroGraph, save_edges, save_nodes
from ghgrl.llm.pipeline import NodeAnnotation

CLASS_WORDS = (
    ("thriller", "chase", "heist", "explosion", "detective", "sabotage"),
    ("romance", "wedding", "heartbreak", "lovers", "courtship", "devotion"),
    ("slapstick", "parody", "punchline", "sitcom", "prank", "deadpan"),
    ("starship", "android", "wormhole", "colony", "terraform", "cyborg"),
)

_LONG_PREFIX = "A widely discussed feature release, best described by critics as"


def planted_graph(
    n: int = 300,
    num_classes: int = 3,
    seed: int = 0,
    p_in: float = 0.05,
    p_out: float = 0.004,
    with_splits: bool = True,
) -> HeteroGraph:
    """Class-keyword attributes plus a same-class-biased random topology.

    Attribute length alternates between short phrases and longer
    sentences so surface-form buckets vary independently of the class.
    """
    if num_classes > len(CLASS_WORDS):
        raise ValueError("not enough keyword banks")
    gen = np.random.default_rng(seed)
    labels = [i % num_classes for i in range(n)]
    attributes = []
    for i in range(n):
        words = CLASS_WORDS[labels[i]]
        k = 5 + int(gen.integers(0, 4))
        toks = [words[int(gen.integers(0, len(words)))] for _ in range(k)]
        body = " ".join(toks)
        attributes.append(f"{_LONG_PREFIX} {body}" if i % 2 else body)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            p = p_in if labels[i] == labels[j] else p_out
            if gen.random() < p:
                edges.append((i, j))
    splits = None
    if with_splits:
        tags = ["train"] * n
        for cls in range(num_classes):
            members = [v for v in range(n) if labels[v] == cls]
            n_val = max(1, len(members) // 5)
            n_test = max(1, len(members) // 5)
            for v in members[:n_val]:
                tags[v] = "val"
            for v in members[n_val : n_val + n_test]:
                tags[v] = "test"
        splits = tuple(tags)
    return HeteroGraph(
        node_count=n,
        attributes=tuple(attributes),
        edges=tuple(edges),
        labels=tuple(labels),
        splits=splits,
        num_classes=num_classes,
    )


def write_dataset(graph: HeteroGraph, directory) -> tuple:
    nodes = directory / "nodes.jsonl"
    edges = directory / "edges.csv"
    save_nodes(graph, nodes)
    save_edges(graph.edges, edges)
    return nodes, edges


def make_annotations(
    n: int,
    m_fmt: int,
    m_cont: int,
    seed: int = 0,
    conf_range: tuple[float, float] = (0.6, 1.0),
    cont_index=None,
) -> tuple[NodeAnnotation, ...]:
    gen = np.random.default_rng(seed)
    lo, hi = conf_range
    out = []
    for i in range(n):
        cont = int(gen.integers(0, m_cont)) if cont_index is None else int(cont_index[i])
        out.append(
            NodeAnnotation(
                format_index=int(gen.integers(0, m_fmt)),
                format_confidence=float(lo + (hi - lo) * gen.random()),
                content_index=cont,
                content_confidence=float(lo + (hi - lo) * gen.random()),
                description=f"synthetic node {i}",
                reasoning=f"assigned for tests ({i})",
            )
        )
    return tuple(out)


def uniform_annotations(n: int) -> tuple[NodeAnnotation, ...]:
    """One format and one content type, every confidence exactly 1."""
    return tuple(
        NodeAnnotation(
            format_index=0,
            format_confidence=1.0,
            content_index=0,
            content_confidence=1.0,
            description=f"node {i}",
            reasoning="uniform",
        )
        for i in range(n)
    )


def path_graph(k: int, **kwargs) -> HeteroGraph:
    return HeteroGraph(
        node_count=k,
        attributes=tuple(f"node {i}" for i in range(k)),
        edges=tuple((i, i + 1) for i in range(k - 1)),
        **kwargs,
    )


def ring_with_chords(n: int, chords: int, seed: int = 0) -> tuple[tuple[int, int], ...]:
    """Connected topology: an n-cycle plus `chords` extra random edges."""
    gen = np.random.default_rng(seed)
    edges = {(i, (i + 1) % n) for i in range(n)}
    edges = {(min(a, b), max(a, b)) for a, b in edges}
    while len(edges) < n + chords:
        a, b = int(gen.integers(0, n)), int(gen.integers(0, n))
        if a != b:
            edges.add((min(a, b), max(a, b)))
    return tuple(sorted(edges))
