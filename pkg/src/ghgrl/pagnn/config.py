"""Network hyperparameters and the layer-removal schedule bounds."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ghgrl.errors import DataError

ACTIVATIONS = ("relu", "leaky_relu")
LEAKY_SLOPE = 0.01


@dataclass(frozen=True)
class PagnnConfig:
    """Shapes, schedule, and scaling knobs for one network instance.

    Layers 1..l_fmt keep the format-alignment block, layers 1..l_cont
    keep the content block, and every layer runs the regular block.
    l_fmt = l_cont = 0 turns off all type-conditioned stages, which is
    the ablation used by the diagnostics.
    """

    num_layers: int
    l_fmt: int
    l_cont: int
    d_in: int
    d_fmt: int
    d_cont: int
    d_rgn: int
    num_format_types: int
    num_content_types: int
    num_classes: int
    alpha: float = 0.5
    activation: str = "relu"
    use_input_projection: bool = False
    confidence_floor: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_layers < 1:
            raise DataError("num_layers must be at least 1")
        if not (0 <= self.l_fmt <= self.l_cont <= self.num_layers):
            raise DataError("need 0 <= l_fmt <= l_cont <= num_layers")
        for name in ("d_in", "d_fmt", "d_cont", "d_rgn"):
            if getattr(self, name) < 1:
                raise DataError(f"{name} must be positive")
        # uniform hidden width; the format residual needs matching shapes
        if not (self.d_fmt == self.d_cont == self.d_rgn):
            raise DataError("d_fmt, d_cont, d_rgn must be equal")
        if not self.use_input_projection and self.d_in != self.d_fmt:
            raise DataError("without input projection, d_in must equal d_fmt")
        if self.num_format_types < 1 or self.num_content_types < 1:
            raise DataError("type counts must be at least 1")
        if self.num_classes < 2:
            raise DataError("num_classes must be at least 2")
        if self.alpha < 0:
            raise DataError("alpha must be non-negative")
        if not (0.0 <= self.confidence_floor <= 1.0):
            raise DataError("confidence_floor must lie in [0, 1]")
        if self.activation not in ACTIVATIONS:
            raise DataError(f"activation must be one of {ACTIVATIONS}")

    @property
    def d(self) -> int:
        """Uniform hidden width."""
        return self.d_fmt

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "PagnnConfig":
        return cls(**payload)
