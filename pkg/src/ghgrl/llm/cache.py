"""Content-addressed annotation cache: one JSON file per key.

Keys are the hex SHA-256 of template version, canonical schema bytes,
and attribute bytes concatenated, so a cache entry is valid exactly as
long as all three inputs are unchanged. Writes go through a temp file
and an atomic rename, which serializes concurrent writers per key.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path


def cache_key(version: str, schema_bytes: bytes, attribute: str) -> str:
    digest = hashlib.sha256()
    digest.update(version.encode("utf-8"))
    digest.update(schema_bytes)
    digest.update(attribute.encode("utf-8"))
    return digest.hexdigest()


class AnnotationCache:
    def __init__(self, cache_dir: str | Path):
        self.root = Path(cache_dir)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None  # treat unreadable entries as misses

    def put(self, key: str, payload: dict) -> None:
        path = self._path(key)
        tmp = path.with_suffix(f".tmp.{os.getpid()}.{id(payload)}")
        tmp.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)
