"""Run manifests: the reproducibility record written next to outputs."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

from ghgrl import __version__
from ghgrl.errors import DataError


@dataclass(frozen=True)
class RunManifest:
    command: str
    flags: dict
    input_digests: dict
    schema_digest: str | None
    seeds: dict
    tool_version: str
    created_utc: str

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        path = Path(path)
        if not path.exists():
            raise DataError(f"manifest not found: {path}")
        return cls(**json.loads(path.read_text(encoding="utf-8")))


def file_digest(path: str | Path) -> str:
    path = Path(path)
    if not path.exists():
        raise DataError(f"cannot digest missing file: {path}")
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_path_for(output_path: str | Path) -> Path:
    return Path(f"{output_path}.manifest.json")


def write_run_manifest(
    primary_output: str | Path,
    command: str,
    flags: Mapping,
    inputs: Mapping[str, str | Path],
    seeds: Mapping[str, int],
    schema_path: str | Path | None = None,
) -> Path:
    """Record the run next to `primary_output` and return the path."""
    manifest = RunManifest(
        command=command,
        flags={k: (str(v) if isinstance(v, Path) else v) for k, v in flags.items()},
        input_digests={name: file_digest(p) for name, p in inputs.items()},
        schema_digest=None if schema_path is None else file_digest(schema_path),
        seeds=dict(seeds),
        tool_version=__version__,
        created_utc=datetime.now(timezone.utc).isoformat(),
    )
    out = manifest_path_for(primary_output)
    manifest.save(out)
    return out
