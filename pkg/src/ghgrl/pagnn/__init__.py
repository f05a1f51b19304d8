from ghgrl.pagnn.adjacency import TypedAdjacency
from ghgrl.pagnn.config import ACTIVATIONS, PagnnConfig
from ghgrl.pagnn.network import (
    content_forward,
    format_alignment_forward,
    pagnn_backward,
    pagnn_forward,
    regular_forward,
)
from ghgrl.pagnn.params import (
    PagnnParams,
    init_params,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "ACTIVATIONS",
    "PagnnConfig",
    "PagnnParams",
    "TypedAdjacency",
    "content_forward",
    "format_alignment_forward",
    "init_params",
    "load_checkpoint",
    "pagnn_backward",
    "pagnn_forward",
    "regular_forward",
    "save_checkpoint",
]
