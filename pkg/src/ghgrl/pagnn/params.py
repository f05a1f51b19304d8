"""Parameter tensors: initialization, traversal order, and checkpoints.

Typed tensors are stacked with the type axis first, so the slice for
type t is W[t]. Traversal (and therefore checkpoint layout) follows
declaration order: input projection, format tensors per layer, content
tensors per layer, regular matrices per layer, classifier.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ghgrl.errors import DataError
from ghgrl.pagnn.config import PagnnConfig
from ghgrl.rng import glorot_uniform

CHECKPOINT_MAGIC = b"GHGP"
CHECKPOINT_VERSION = 1

_STREAM_PROJECTION = 0x1000
_STREAM_CLASSIFIER = 0x1001
_STREAM_FMT = 0x1100
_STREAM_CONT = 0x1200
_STREAM_TILDE = 0x1300
_STREAM_RGN = 0x1400


@dataclass
class PagnnParams:
    input_projection: np.ndarray | None
    w_fmt: list[np.ndarray]    # l_fmt entries, each (m_fmt, d, d)
    b_fmt: list[np.ndarray]    # l_fmt entries, each (m_fmt, d)
    w_cont: list[np.ndarray]   # l_cont entries, each (m_cont, d, d)
    b_cont: list[np.ndarray]   # l_cont entries, each (m_cont, d)
    w_tilde: list[np.ndarray]  # l_cont entries, each (m_cont, d, d)
    w_rgn: list[np.ndarray]    # num_layers entries, each (d, d)
    classifier_w: np.ndarray   # (d, num_classes)
    classifier_b: np.ndarray   # (num_classes,)

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        """All tensors in declaration order; layer indices are 1-based."""
        out: list[tuple[str, np.ndarray]] = []
        if self.input_projection is not None:
            out.append(("input_projection", self.input_projection))
        for i, (w, b) in enumerate(zip(self.w_fmt, self.b_fmt), start=1):
            out.append((f"w_fmt[{i}]", w))
            out.append((f"b_fmt[{i}]", b))
        for i, (w, b, wt) in enumerate(
            zip(self.w_cont, self.b_cont, self.w_tilde), start=1
        ):
            out.append((f"w_cont[{i}]", w))
            out.append((f"b_cont[{i}]", b))
            out.append((f"w_tilde[{i}]", wt))
        for i, w in enumerate(self.w_rgn, start=1):
            out.append((f"w_rgn[{i}]", w))
        out.append(("classifier_w", self.classifier_w))
        out.append(("classifier_b", self.classifier_b))
        return out

    def zeros_like(self) -> "PagnnParams":
        z = lambda a: np.zeros_like(a)  # noqa: E731
        return PagnnParams(
            input_projection=None if self.input_projection is None else z(self.input_projection),
            w_fmt=[z(a) for a in self.w_fmt],
            b_fmt=[z(a) for a in self.b_fmt],
            w_cont=[z(a) for a in self.w_cont],
            b_cont=[z(a) for a in self.b_cont],
            w_tilde=[z(a) for a in self.w_tilde],
            w_rgn=[z(a) for a in self.w_rgn],
            classifier_w=z(self.classifier_w),
            classifier_b=z(self.classifier_b),
        )

    def copy(self) -> "PagnnParams":
        c = lambda a: a.copy()  # noqa: E731
        return PagnnParams(
            input_projection=None if self.input_projection is None else c(self.input_projection),
            w_fmt=[c(a) for a in self.w_fmt],
            b_fmt=[c(a) for a in self.b_fmt],
            w_cont=[c(a) for a in self.w_cont],
            b_cont=[c(a) for a in self.b_cont],
            w_tilde=[c(a) for a in self.w_tilde],
            w_rgn=[c(a) for a in self.w_rgn],
            classifier_w=c(self.classifier_w),
            classifier_b=c(self.classifier_b),
        )

    def validate_finite(self) -> None:
        for name, tensor in self.named_tensors():
            if not np.all(np.isfinite(tensor)):
                raise DataError(f"non-finite values in parameter {name}")


def init_params(config: PagnnConfig) -> PagnnParams:
    """Glorot-uniform matrices, zero biases, one stream per tensor."""
    d = config.d
    seed = config.seed
    m_fmt, m_cont = config.num_format_types, config.num_content_types
    projection = None
    if config.use_input_projection:
        projection = glorot_uniform((config.d_in, d), seed, _STREAM_PROJECTION)
    params = PagnnParams(
        input_projection=projection,
        w_fmt=[
            glorot_uniform((m_fmt, d, d), seed, _STREAM_FMT + layer)
            for layer in range(1, config.l_fmt + 1)
        ],
        b_fmt=[np.zeros((m_fmt, d)) for _ in range(config.l_fmt)],
        w_cont=[
            glorot_uniform((m_cont, d, d), seed, _STREAM_CONT + layer)
            for layer in range(1, config.l_cont + 1)
        ],
        b_cont=[np.zeros((m_cont, d)) for _ in range(config.l_cont)],
        w_tilde=[
            glorot_uniform((m_cont, d, d), seed, _STREAM_TILDE + layer)
            for layer in range(1, config.l_cont + 1)
        ],
        w_rgn=[
            glorot_uniform((d, d), seed, _STREAM_RGN + layer)
            for layer in range(1, config.num_layers + 1)
        ],
        classifier_w=glorot_uniform((d, config.num_classes), seed, _STREAM_CLASSIFIER),
        classifier_b=np.zeros(config.num_classes),
    )
    return params


def _expected_shapes(config: PagnnConfig) -> list[tuple[str, tuple[int, ...]]]:
    d = config.d
    m_fmt, m_cont = config.num_format_types, config.num_content_types
    shapes: list[tuple[str, tuple[int, ...]]] = []
    if config.use_input_projection:
        shapes.append(("input_projection", (config.d_in, d)))
    for i in range(1, config.l_fmt + 1):
        shapes.append((f"w_fmt[{i}]", (m_fmt, d, d)))
        shapes.append((f"b_fmt[{i}]", (m_fmt, d)))
    for i in range(1, config.l_cont + 1):
        shapes.append((f"w_cont[{i}]", (m_cont, d, d)))
        shapes.append((f"b_cont[{i}]", (m_cont, d)))
        shapes.append((f"w_tilde[{i}]", (m_cont, d, d)))
    for i in range(1, config.num_layers + 1):
        shapes.append((f"w_rgn[{i}]", (d, d)))
    shapes.append(("classifier_w", (d, config.num_classes)))
    shapes.append(("classifier_b", (config.num_classes,)))
    return shapes


def save_checkpoint(
    path: str | Path, config: PagnnConfig, params: PagnnParams
) -> None:
    params.validate_finite()
    config_blob = json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(config_blob)))
        fh.write(config_blob)
        for _, tensor in params.named_tensors():
            fh.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[PagnnConfig, PagnnParams]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    blob = path.read_bytes()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: bad checkpoint magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    (config_len,) = struct.unpack_from("<Q", blob, 8)
    config_end = 16 + config_len
    try:
        config = PagnnConfig.from_dict(json.loads(blob[16:config_end].decode("utf-8")))
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: bad checkpoint config ({exc})") from exc
    tensors: dict[str, np.ndarray] = {}
    offset = config_end
    for name, shape in _expected_shapes(config):
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(blob):
            raise DataError(f"{path}: truncated at tensor {name}")
        tensors[name] = (
            np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
            .reshape(shape)
            .copy()
        )
        offset = end
    if offset != len(blob):
        raise DataError(f"{path}: {len(blob) - offset} trailing bytes")
    params = PagnnParams(
        input_projection=tensors.get("input_projection"),
        w_fmt=[tensors[f"w_fmt[{i}]"] for i in range(1, config.l_fmt + 1)],
        b_fmt=[tensors[f"b_fmt[{i}]"] for i in range(1, config.l_fmt + 1)],
        w_cont=[tensors[f"w_cont[{i}]"] for i in range(1, config.l_cont + 1)],
        b_cont=[tensors[f"b_cont[{i}]"] for i in range(1, config.l_cont + 1)],
        w_tilde=[tensors[f"w_tilde[{i}]"] for i in range(1, config.l_cont + 1)],
        w_rgn=[tensors[f"w_rgn[{i}]"] for i in range(1, config.num_layers + 1)],
        classifier_w=tensors["classifier_w"],
        classifier_b=tensors["classifier_b"],
    )
    params.validate_finite()
    return config, params
