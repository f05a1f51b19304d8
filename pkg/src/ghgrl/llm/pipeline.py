"""Type-schema generation, per-node annotation, and feature construction.

The three pipeline stages are pure given a backend: sample attributes
and ask the model for a type schema, annotate every node against that
schema (with caching and bounded concurrency), then embed each
annotation's description and reasoning into a fixed-width feature row.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ghgrl.errors import BackendError, DataError
from ghgrl.graph import HeteroGraph
from ghgrl.llm.backends import LLMRequest
from ghgrl.llm.cache import AnnotationCache, cache_key
from ghgrl.llm.templates import PromptTemplates
from ghgrl.rng import permutation

_SAMPLE_STREAM = 0xC2

_SYSTEM_MESSAGE = (
    "You analyze node attributes from graph datasets. "
    "Always answer with a single strict JSON object."
)

FEATURE_MAGIC = b"GHGF"
FEATURE_VERSION = 1

FALLBACK_CONFIDENCE = 0.5


@dataclass(frozen=True)
class TypeSchema:
    """The generated format-type and content-type name lists."""

    format_types: tuple[str, ...]
    content_types: tuple[str, ...]

    def __post_init__(self):
        for side, names in (("format", self.format_types), ("content", self.content_types)):
            if len(names) < 1:
                raise DataError(f"{side}_types must not be empty")
            if any(not isinstance(n, str) or not n.strip() for n in names):
                raise DataError(f"{side}_types entries must be non-empty strings")
            if len(set(names)) != len(names):
                raise DataError(f"duplicate names in {side}_types")

    def canonical_bytes(self) -> bytes:
        payload = {
            "format_types": list(self.format_types),
            "content_types": list(self.content_types),
        }
        return json.dumps(payload, sort_keys=True).encode("utf-8")

    def match_format(self, name: str) -> int | None:
        return _match_name(self.format_types, name)

    def match_content(self, name: str) -> int | None:
        return _match_name(self.content_types, name)

    def save(self, path: str | Path) -> None:
        payload = {
            "format_types": list(self.format_types),
            "content_types": list(self.content_types),
        }
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "TypeSchema":
        path = Path(path)
        if not path.exists():
            raise DataError(f"schema file not found: {path}")
        payload = json.loads(path.read_text(encoding="utf-8"))
        return cls(
            format_types=tuple(payload["format_types"]),
            content_types=tuple(payload["content_types"]),
        )


def _match_name(names: Sequence[str], candidate: str) -> int | None:
    needle = candidate.strip().lower()
    for i, name in enumerate(names):
        if name.strip().lower() == needle:
            return i
    return None


@dataclass(frozen=True)
class AttributeSample:
    """Node ids (and their texts) fitting the generation character budget."""

    node_ids: tuple[int, ...]
    texts: tuple[str, ...]
    total_char_budget: int

    def __post_init__(self):
        if len(self.node_ids) != len(set(self.node_ids)):
            raise DataError("sampled node ids must be distinct")
        if len(self.node_ids) != len(self.texts):
            raise DataError("node_ids and texts must align")
        if sum(len(t) for t in self.texts) > self.total_char_budget:
            raise DataError("sample exceeds its character budget")


@dataclass(frozen=True)
class NodeAnnotation:
    """Model-estimated types, confidences, and free-text rationale for a node."""

    format_index: int
    format_confidence: float
    content_index: int
    content_confidence: float
    description: str
    reasoning: str

    def __post_init__(self):
        if self.format_index < 0 or self.content_index < 0:
            raise DataError("type indices must be non-negative")
        if not (0.0 <= self.format_confidence <= 1.0):
            raise DataError("format_confidence outside [0, 1]")
        if not (0.0 <= self.content_confidence <= 1.0):
            raise DataError("content_confidence outside [0, 1]")
        if not self.description or not self.reasoning:
            raise DataError("description and reasoning must be non-empty")

    def to_dict(self) -> dict:
        return {
            "format_index": self.format_index,
            "format_confidence": self.format_confidence,
            "content_index": self.content_index,
            "content_confidence": self.content_confidence,
            "description": self.description,
            "reasoning": self.reasoning,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NodeAnnotation":
        return cls(
            format_index=int(payload["format_index"]),
            format_confidence=float(payload["format_confidence"]),
            content_index=int(payload["content_index"]),
            content_confidence=float(payload["content_confidence"]),
            description=str(payload["description"]),
            reasoning=str(payload["reasoning"]),
        )


def fallback_annotation(attribute: str) -> NodeAnnotation:
    """The documented stand-in used for empty attributes and failed calls."""
    description = "[empty attribute]" if attribute.strip() == "" else "[annotation failed]"
    return NodeAnnotation(
        format_index=0,
        format_confidence=FALLBACK_CONFIDENCE,
        content_index=0,
        content_confidence=FALLBACK_CONFIDENCE,
        description=description,
        reasoning="[fallback]",
    )


def sample_attributes(graph: HeteroGraph, char_budget: int, seed: int) -> AttributeSample:
    """Seeded shuffle of node ids, then the longest prefix within budget.

    The walk stops at the first attribute that would overflow the
    budget; an empty prefix (budget below the first attribute) is an
    error.
    """
    if graph.node_count == 0:
        raise DataError("cannot sample from an empty graph")
    if char_budget <= 0:
        raise DataError("char_budget must be positive")
    order = permutation(graph.node_count, seed, _SAMPLE_STREAM)
    ids: list[int] = []
    texts: list[str] = []
    total = 0
    for v in order:
        text = graph.attributes[int(v)]
        if total + len(text) > char_budget:
            break
        ids.append(int(v))
        texts.append(text)
        total += len(text)
    if not ids:
        raise DataError(
            f"char_budget {char_budget} too small to fit any single attribute"
        )
    return AttributeSample(
        node_ids=tuple(ids), texts=tuple(texts), total_char_budget=char_budget
    )


def _messages(prompt: str) -> list[dict]:
    return [
        {"role": "system", "content": _SYSTEM_MESSAGE},
        {"role": "user", "content": prompt},
    ]


def _extract_json(text: str) -> dict:
    """Parse a JSON object from a response, tolerating surrounding prose."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError:
        start, end = text.find("{"), text.rfind("}")
        if start < 0 or end <= start:
            raise ValueError("no JSON object in response") from None
        try:
            payload = json.loads(text[start : end + 1])
        except json.JSONDecodeError:
            raise ValueError("no parseable JSON object in response") from None
    if not isinstance(payload, dict):
        raise ValueError("response JSON is not an object")
    return payload


def _clean_names(values, requested: int, side: str) -> tuple[str, ...]:
    if not isinstance(values, list):
        raise ValueError(f"{side}_types is not a list")
    names: list[str] = []
    for v in values:
        if not isinstance(v, str) or not v.strip():
            raise ValueError(f"{side}_types contains a non-string or empty name")
        if v not in names:
            names.append(v)
    if len(names) < requested:
        raise ValueError(
            f"only {len(names)} distinct {side} names for {requested} requested"
        )
    return tuple(names[:requested])


def generate_type_schema(
    sample: AttributeSample,
    m_fmt: int,
    m_cont: int,
    templates: PromptTemplates,
    backend,
    max_retries: int = 3,
    out_path: str | Path | None = None,
) -> TypeSchema:
    """Ask the backend for m_fmt format and m_cont content type names.

    Overlong name lists are truncated to the requested sizes; short or
    malformed responses are retried up to `max_retries` times before the
    run fails with an excerpt of the offending response.
    """
    if m_fmt < 1 or m_cont < 1:
        raise DataError("m_fmt and m_cont must be at least 1")
    prompt = templates.render_generation(sample.texts, m_fmt, m_cont)
    request = LLMRequest(
        kind="generate_types",
        messages=_messages(prompt),
        m_fmt=m_fmt,
        m_cont=m_cont,
        sample_texts=sample.texts,
    )
    last_error = "no attempts made"
    for _ in range(max_retries):
        raw = backend.complete(request)
        try:
            payload = _extract_json(raw)
            schema = TypeSchema(
                format_types=_clean_names(payload.get("format_types"), m_fmt, "format"),
                content_types=_clean_names(payload.get("content_types"), m_cont, "content"),
            )
        except (ValueError, KeyError, DataError) as exc:
            last_error = f"{exc}; response excerpt: {raw[:160]!r}"
            continue
        if out_path is not None:
            schema.save(out_path)
        return schema
    raise BackendError(f"type generation failed after {max_retries} attempts: {last_error}")


class _UnknownTypeName(ValueError):
    pass


def _annotation_from_payload(payload: dict, schema: TypeSchema) -> NodeAnnotation:
    for field in (
        "description",
        "format_type",
        "format_confidence",
        "content_type",
        "content_confidence",
        "reasoning",
    ):
        if field not in payload:
            raise ValueError(f"response missing field {field!r}")
    description = payload["description"]
    reasoning = payload["reasoning"]
    if not isinstance(description, str) or not description.strip():
        raise ValueError("description must be a non-empty string")
    if not isinstance(reasoning, str) or not reasoning.strip():
        raise ValueError("reasoning must be a non-empty string")
    fmt_idx = schema.match_format(str(payload["format_type"]))
    if fmt_idx is None:
        raise _UnknownTypeName(f"unknown format type {payload['format_type']!r}")
    cont_idx = schema.match_content(str(payload["content_type"]))
    if cont_idx is None:
        raise _UnknownTypeName(f"unknown content type {payload['content_type']!r}")
    try:
        fmt_conf = float(payload["format_confidence"])
        cont_conf = float(payload["content_confidence"])
    except (TypeError, ValueError):
        raise ValueError("confidences must be numbers") from None
    return NodeAnnotation(
        format_index=fmt_idx,
        format_confidence=min(1.0, max(0.0, fmt_conf)),
        content_index=cont_idx,
        content_confidence=min(1.0, max(0.0, cont_conf)),
        description=description,
        reasoning=reasoning,
    )


def annotate_node(
    attribute: str,
    schema: TypeSchema,
    templates: PromptTemplates,
    backend,
    max_retries: int = 3,
    fallback: bool = True,
) -> NodeAnnotation:
    """Estimate a node's types against `schema` from its attribute text.

    Empty attributes short-circuit to the fallback annotation without a
    backend call. An unknown type name earns one repair retry that
    restates the allowed names; other malformed responses are retried up
    to `max_retries` times. Exhausted retries resolve to the fallback
    annotation when `fallback` is set, and raise otherwise.
    """
    if attribute.strip() == "":
        return fallback_annotation(attribute)
    repair_used = False
    last_error = "no attempts made"
    attempts = 0
    while attempts < max_retries:
        attempts += 1
        prompt = templates.render_processing(
            attribute, schema.format_types, schema.content_types
        )
        if repair_used:
            prompt += (
                "\nThe format_type value must be copied verbatim from: "
                + ", ".join(schema.format_types)
                + ". The content_type value must be copied verbatim from: "
                + ", ".join(schema.content_types)
                + "."
            )
        request = LLMRequest(
            kind="annotate",
            messages=_messages(prompt),
            attribute=attribute,
            format_types=schema.format_types,
            content_types=schema.content_types,
        )
        try:
            raw = backend.complete(request)
        except BackendError as exc:
            # transport retries already happened inside the backend
            last_error = str(exc)
            break
        try:
            return _annotation_from_payload(_extract_json(raw), schema)
        except _UnknownTypeName as exc:
            last_error = str(exc)
            if repair_used:
                break
            repair_used = True
        except ValueError as exc:
            last_error = f"{exc}; response excerpt: {raw[:160]!r}"
    if fallback:
        return fallback_annotation(attribute)
    raise BackendError(f"annotation failed: {last_error}")


def annotate_all(
    graph: HeteroGraph,
    schema: TypeSchema,
    templates: PromptTemplates,
    backend,
    cache_dir: str | Path | None = None,
    max_in_flight: int = 4,
    max_retries: int = 3,
    fallback: bool = True,
) -> tuple[NodeAnnotation, ...]:
    """Annotate every node, cache-first, with bounded concurrency.

    Results are returned in node-id order regardless of completion
    order, and equal calling annotate_node per node. Cached entries skip
    the backend, so an interrupted run resumes where it stopped.
    """
    cache = AnnotationCache(cache_dir) if cache_dir is not None else None
    schema_bytes = schema.canonical_bytes()

    def one(v: int) -> NodeAnnotation:
        attribute = graph.attributes[v]
        key = None
        if cache is not None:
            key = cache_key(templates.version, schema_bytes, attribute)
            hit = cache.get(key)
            if hit is not None:
                return NodeAnnotation.from_dict(hit)
        annotation = annotate_node(
            attribute, schema, templates, backend,
            max_retries=max_retries, fallback=fallback,
        )
        if cache is not None and key is not None:
            cache.put(key, annotation.to_dict())
        return annotation

    n = graph.node_count
    results: list[NodeAnnotation | None] = [None] * n
    errors: list[tuple[int, Exception]] = []
    if max_in_flight <= 1:
        for v in range(n):
            try:
                results[v] = one(v)
            except BackendError as exc:
                errors.append((v, exc))
                break
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            futures = {v: pool.submit(one, v) for v in range(n)}
            for v, fut in futures.items():
                try:
                    results[v] = fut.result()
                except BackendError as exc:
                    errors.append((v, exc))
    if errors:
        v, exc = min(errors, key=lambda e: e[0])
        raise BackendError(f"node {v}: {exc}") from exc
    return tuple(results)  # type: ignore[arg-type]


def embed_annotation(annotation: NodeAnnotation, embedder) -> np.ndarray:
    """Embed description + reasoning into one feature vector."""
    text = f"{annotation.description}\n{annotation.reasoning}"
    vec = np.asarray(embedder.embed([text])[0], dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] < 1:
        raise BackendError("embedder returned a non-vector")
    if not np.all(np.isfinite(vec)):
        raise BackendError("embedder returned non-finite values")
    return vec


@dataclass(frozen=True)
class FeatureMatrix:
    """Node feature rows (float32, one row per node)."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(np.asarray(self.rows, dtype=np.float32))
        if rows.ndim != 2 or rows.shape[1] < 1:
            raise DataError("feature matrix must be 2-D with positive dim")
        if not np.all(np.isfinite(rows)):
            raise DataError("feature matrix contains non-finite values")
        object.__setattr__(self, "rows", rows)

    @property
    def node_count(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def save(self, path: str | Path) -> None:
        header = struct.pack(
            "<4sIQI", FEATURE_MAGIC, FEATURE_VERSION, self.node_count, self.dim
        )
        with Path(path).open("wb") as fh:
            fh.write(header)
            fh.write(self.rows.astype("<f4").tobytes(order="C"))

    @classmethod
    def load(cls, path: str | Path) -> "FeatureMatrix":
        path = Path(path)
        if not path.exists():
            raise DataError(f"feature file not found: {path}")
        blob = path.read_bytes()
        header_size = struct.calcsize("<4sIQI")
        if len(blob) < header_size:
            raise DataError(f"{path}: truncated feature file")
        magic, version, n, dim = struct.unpack("<4sIQI", blob[:header_size])
        if magic != FEATURE_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        if version != FEATURE_VERSION:
            raise DataError(f"{path}: unsupported feature file version {version}")
        expected = header_size + n * dim * 4
        if len(blob) != expected:
            raise DataError(f"{path}: expected {expected} bytes, found {len(blob)}")
        rows = np.frombuffer(blob, dtype="<f4", offset=header_size).reshape(n, dim)
        return cls(rows=rows.copy())


def build_feature_matrix(
    annotations: Sequence[NodeAnnotation], embedder
) -> FeatureMatrix:
    """Embed all annotations (one batched call) into a FeatureMatrix."""
    if not annotations:
        raise DataError("no annotations to embed")
    texts = [f"{a.description}\n{a.reasoning}" for a in annotations]
    matrix = np.asarray(embedder.embed(texts), dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(annotations):
        raise BackendError("embedder returned a malformed batch")
    return FeatureMatrix(rows=matrix)


def save_annotations(
    annotations: Sequence[NodeAnnotation], path: str | Path
) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for v, annotation in enumerate(annotations):
            record = {"node_id": v, **annotation.to_dict()}
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_annotations(path: str | Path) -> tuple[NodeAnnotation, ...]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"annotations file not found: {path}")
    records: dict[int, NodeAnnotation] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
                node_id = int(payload["node_id"])
                records[node_id] = NodeAnnotation.from_dict(payload)
            except (json.JSONDecodeError, KeyError, ValueError, DataError) as exc:
                raise DataError(f"{path}:{lineno}: bad annotation record ({exc})") from exc
    if set(records) != set(range(len(records))):
        raise DataError(f"{path}: node ids are not dense 0..{len(records) - 1}")
    return tuple(records[v] for v in range(len(records)))
