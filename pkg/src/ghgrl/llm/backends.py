"""LLM and embedding backends: remote wire clients and offline mocks.

Both backend families share one request shape. The remote clients only
look at the rendered chat messages; the mock backends use the structured
fields carried alongside, which keeps prompt rendering, response
parsing, and retry handling on a single code path regardless of
backend.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import requests

from ghgrl.errors import BackendError

RETRYABLE_STATUS = (429, 500, 502, 503, 504)

_FORMAT_BUCKET_NAMES = ("numeric code", "short phrase", "sentence", "long description")


@dataclass
class LLMRequest:
    """One backend call: rendered messages plus structured mock inputs."""

    kind: str  # "generate_types" | "annotate"
    messages: list[dict] = field(default_factory=list)
    attribute: str | None = None
    format_types: tuple[str, ...] | None = None
    content_types: tuple[str, ...] | None = None
    m_fmt: int | None = None
    m_cont: int | None = None
    sample_texts: tuple[str, ...] | None = None


def _hash64(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


class MockLLMBackend:
    """Deterministic stand-in for the remote model, for offline runs and CI.

    Format types are picked by surface heuristics (all-digit attributes
    land in one bucket, the rest by length), content types and both
    confidence scores derive from a stable 64-bit hash of the attribute
    text. Responses are JSON strings exactly as a remote model would
    return them, so the parsing path is exercised.
    """

    def __init__(self):
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, request: LLMRequest) -> str:
        with self._lock:
            self.calls += 1
        if request.kind == "generate_types":
            return self._generate_types(request)
        if request.kind == "annotate":
            return self._annotate(request)
        raise BackendError(f"mock backend got unknown request kind {request.kind!r}")

    def _generate_types(self, request: LLMRequest) -> str:
        m_fmt, m_cont = request.m_fmt or 1, request.m_cont or 1
        format_types = list(_FORMAT_BUCKET_NAMES[:m_fmt])
        k = 0
        while len(format_types) < m_fmt:
            format_types.append(f"format type {k}")
            k += 1

        counts: Counter[str] = Counter()
        for text in request.sample_texts or ():
            for token in text.lower().split():
                if len(token) > 2 and token.isalpha():
                    counts[token] += 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        content_types = [f"topic '{tok}'" for tok, _ in ranked[:m_cont]]
        k = 0
        while len(content_types) < m_cont:
            content_types.append(f"content type {k}")
            k += 1
        return json.dumps(
            {"format_types": format_types, "content_types": content_types}
        )

    def _annotate(self, request: LLMRequest) -> str:
        attr = request.attribute or ""
        fmt_names = request.format_types or ("format type 0",)
        cont_names = request.content_types or ("content type 0",)
        stripped = attr.strip()
        if stripped and stripped.isdigit():
            bucket = 0
        elif len(attr) < 40:
            bucket = 1
        elif len(attr) < 160:
            bucket = 2
        else:
            bucket = 3
        fmt_idx = bucket % len(fmt_names)
        h = _hash64(attr)
        cont_idx = h % len(cont_names)
        fmt_conf = round(0.6 + 0.4 * (((h >> 8) & 0xFFFF) / 65535.0), 4)
        cont_conf = round(0.6 + 0.4 * (((h >> 24) & 0xFFFF) / 65535.0), 4)
        n_tokens = len(attr.split())
        return json.dumps(
            {
                "description": f"Attribute with {n_tokens} tokens: {attr[:400]}",
                "format_type": fmt_names[fmt_idx],
                "format_confidence": fmt_conf,
                "content_type": cont_names[cont_idx],
                "content_confidence": cont_conf,
                "reasoning": (
                    f"Surface form matched '{fmt_names[fmt_idx]}'; content hashed "
                    f"to bucket {cont_idx} of {len(cont_names)}."
                ),
            }
        )


class RemoteLLMBackend:
    """OpenAI-compatible chat-completions client with retry and backoff.

    Endpoint and bearer token default to the GHGRL_LLM_ENDPOINT and
    GHGRL_LLM_API_KEY environment variables. Temperature is pinned to 0
    for reproducibility.
    """

    def __init__(
        self,
        model: str = "llama3",
        endpoint: str | None = None,
        api_key: str | None = None,
        timeout: float = 120.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        session=None,
    ):
        self.model = model
        self.endpoint = (endpoint or os.environ.get("GHGRL_LLM_ENDPOINT", "")).rstrip("/")
        if not self.endpoint:
            raise BackendError("no LLM endpoint: set GHGRL_LLM_ENDPOINT or pass endpoint=")
        self.api_key = api_key or os.environ.get("GHGRL_LLM_API_KEY")
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.session = session if session is not None else requests.Session()
        self.calls = 0

    def complete(self, request: LLMRequest) -> str:
        body = {
            "model": self.model,
            "temperature": 0,
            "messages": request.messages,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.endpoint}/v1/chat/completions"
        last_error = "no attempts made"
        for attempt in range(self.max_retries):
            self.calls += 1
            try:
                resp = self.session.post(
                    url, json=body, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code != 200:
                raise BackendError(f"LLM endpoint returned HTTP {resp.status_code}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise BackendError(f"malformed chat-completions response: {exc}") from exc
        raise BackendError(f"LLM request failed after {self.max_retries} attempts: {last_error}")


class MockEmbedder:
    """Hashing-trick text embedder: deterministic, offline, fixed dim.

    Each whitespace token is hashed into one of `dim` signed buckets and
    the bucket sums are L2-normalized, so texts sharing tokens land near
    each other and any token change moves the vector.
    """

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.calls = 0

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        self.calls += 1
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            for token in text.lower().split():
                h = _hash64(token)
                sign = 1.0 if (h >> 62) & 1 == 0 else -1.0
                out[i, h % self.dim] += sign
            norm = float(np.linalg.norm(out[i]))
            if norm == 0.0:
                out[i, 0] = 1.0
            else:
                out[i] /= norm
        return out


class RemoteEmbedder:
    """Client for the embedding service at GHGRL_EMBED_ENDPOINT."""

    def __init__(
        self,
        endpoint: str | None = None,
        timeout: float = 120.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        session=None,
    ):
        self.endpoint = (endpoint or os.environ.get("GHGRL_EMBED_ENDPOINT", "")).rstrip("/")
        if not self.endpoint:
            raise BackendError(
                "no embedding endpoint: set GHGRL_EMBED_ENDPOINT or pass endpoint="
            )
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.session = session if session is not None else requests.Session()
        self.calls = 0
        self._dim: int | None = None

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        url = f"{self.endpoint}/embed"
        last_error = "no attempts made"
        for attempt in range(self.max_retries):
            self.calls += 1
            try:
                resp = self.session.post(
                    url, json={"texts": list(texts)}, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code != 200:
                raise BackendError(f"embed endpoint returned HTTP {resp.status_code}")
            payload = resp.json()
            vectors = payload.get("embeddings") if isinstance(payload, dict) else None
            if vectors is None or len(vectors) != len(texts):
                raise BackendError("malformed embedding response")
            arr = np.asarray(vectors, dtype=np.float64)
            if arr.ndim != 2:
                raise BackendError("embedding response is not a matrix")
            if self._dim is None:
                self._dim = arr.shape[1]
            elif arr.shape[1] != self._dim:
                raise BackendError(
                    f"embedding dim changed from {self._dim} to {arr.shape[1]}"
                )
            return arr
        raise BackendError(
            f"embedding request failed after {self.max_retries} attempts: {last_error}"
        )
