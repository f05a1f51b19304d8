"""The three block equations, the layer schedule, and exact gradients.

All arithmetic is float64. Backward passes are hand-written
reverse-mode transposes of the forward maps, including the
confidence-gated residual of the format block, the confidence scaling
of the content transform, the alpha-weighted self term, and the
mean-aggregation fan-out. Gradients for type slices that no node uses
stay exactly zero.
"""

from __future__ import annotations

import numpy as np

from ghgrl.errors import DataError
from ghgrl.pagnn.adjacency import TypedAdjacency
from ghgrl.pagnn.config import LEAKY_SLOPE, PagnnConfig
from ghgrl.pagnn.params import PagnnParams


def _activate(pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(pre, 0.0)
    return np.where(pre > 0.0, pre, LEAKY_SLOPE * pre)


def _activation_grad(pre: np.ndarray, kind: str) -> np.ndarray:
    # subgradient 0 at the kink for relu
    if kind == "relu":
        return (pre > 0.0).astype(pre.dtype)
    return np.where(pre > 0.0, 1.0, LEAKY_SLOPE)


def _check_block_input(H: np.ndarray, adj: TypedAdjacency, width: int, where: str) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape != (adj.node_count, width):
        raise DataError(
            f"{where}: expected shape ({adj.node_count}, {width}), got {H.shape}"
        )
    if not np.all(np.isfinite(H)):
        raise DataError(f"{where}: non-finite input")
    return H


def _format_forward(H, adj, w, b, floor, activation):
    c = np.maximum(adj.fmt_conf, floor)[:, None]
    T = np.zeros_like(H)
    for t, rows in enumerate(adj.rows_by_fmt):
        if rows.size:
            T[rows] = H[rows] @ w[t] + b[t]
    pre = c * T + (1.0 - c) * H
    return _activate(pre, activation), (H, pre, c)


def _format_backward(dOut, cache, adj, w, dw, db, activation):
    H, pre, c = cache
    dPre = dOut * _activation_grad(pre, activation)
    dT = c * dPre
    dH = (1.0 - c) * dPre
    for t, rows in enumerate(adj.rows_by_fmt):
        if rows.size:
            dw[t] += H[rows].T @ dT[rows]
            db[t] += dT[rows].sum(axis=0)
            dH[rows] += dT[rows] @ w[t].T
    return dH


def _content_forward(H, adj, w, b, wt, alpha, floor, activation):
    c = np.maximum(adj.cont_conf, floor)[:, None]
    S = np.zeros_like(H)
    for t, rows in enumerate(adj.rows_by_cont):
        if rows.size:
            S[rows] = H[rows] @ w[t] + b[t]
    pre = c * S
    Hc = _activate(pre, activation)
    M = adj.mean_neighbors(Hc)
    out = alpha * Hc
    for t, rows in enumerate(adj.rows_by_cont):
        if rows.size:
            out[rows] += M[rows] @ wt[t]
    return out, (H, pre, M, c)


def _content_backward(dOut, cache, adj, w, wt, dw, db, dwt, alpha, activation):
    H, pre, M, c = cache
    dM = np.zeros_like(dOut)
    for t, rows in enumerate(adj.rows_by_cont):
        if rows.size:
            dwt[t] += M[rows].T @ dOut[rows]
            dM[rows] = dOut[rows] @ wt[t].T
    dHc = alpha * dOut + adj.mean_neighbors_adjoint(dM)
    dS = c * (dHc * _activation_grad(pre, activation))
    dH = np.zeros_like(H)
    for t, rows in enumerate(adj.rows_by_cont):
        if rows.size:
            dw[t] += H[rows].T @ dS[rows]
            db[t] += dS[rows].sum(axis=0)
            dH[rows] = dS[rows] @ w[t].T
    return dH


def _regular_forward(H, adj, w, activation):
    Z = H + adj.mean_neighbors(H)
    pre = Z @ w
    return _activate(pre, activation), (Z, pre)


def _regular_backward(dOut, cache, adj, w, dw, activation):
    Z, pre = cache
    dPre = dOut * _activation_grad(pre, activation)
    dw += Z.T @ dPre
    dZ = dPre @ w.T
    return dZ + adj.mean_neighbors_adjoint(dZ)


def format_alignment_forward(
    H: np.ndarray,
    adj: TypedAdjacency,
    w_fmt: np.ndarray,
    b_fmt: np.ndarray,
    confidence_floor: float = 0.0,
    activation: str = "relu",
) -> np.ndarray:
    """Confidence-gated typed affine transform blended with the input."""
    H = _check_block_input(H, adj, w_fmt.shape[1], "format block")
    out, _ = _format_forward(H, adj, w_fmt, b_fmt, confidence_floor, activation)
    return out


def content_forward(
    H_fmt: np.ndarray,
    adj: TypedAdjacency,
    w_cont: np.ndarray,
    b_cont: np.ndarray,
    w_tilde: np.ndarray,
    alpha: float,
    confidence_floor: float = 0.0,
    activation: str = "relu",
) -> np.ndarray:
    """Source-typed transform, then target-typed mean aggregation."""
    H_fmt = _check_block_input(H_fmt, adj, w_cont.shape[1], "content block")
    out, _ = _content_forward(
        H_fmt, adj, w_cont, b_cont, w_tilde, alpha, confidence_floor, activation
    )
    return out


def regular_forward(
    H_tilde: np.ndarray,
    adj: TypedAdjacency,
    w_rgn: np.ndarray,
    activation: str = "relu",
) -> np.ndarray:
    """Shared-parameter stage: transform of self plus neighbor mean."""
    H_tilde = _check_block_input(H_tilde, adj, w_rgn.shape[0], "regular block")
    out, _ = _regular_forward(H_tilde, adj, w_rgn, activation)
    return out


def _check_network_input(H0, adj, config, params):
    expected = config.d_in if config.use_input_projection else config.d
    H0 = np.asarray(H0, dtype=np.float64)
    if H0.ndim != 2 or H0.shape != (adj.node_count, expected):
        raise DataError(
            f"input features: expected shape ({adj.node_count}, {expected}), "
            f"got {H0.shape}"
        )
    if not np.all(np.isfinite(H0)):
        raise DataError("input features contain non-finite values")
    if len(adj.rows_by_fmt) != config.num_format_types:
        raise DataError("adjacency format type count does not match config")
    if len(adj.rows_by_cont) != config.num_content_types:
        raise DataError("adjacency content type count does not match config")
    if params.classifier_w.shape != (config.d, config.num_classes):
        raise DataError("classifier shape does not match config")
    return H0


def _check_finite(H: np.ndarray, layer: int, block: str) -> None:
    if not np.all(np.isfinite(H)):
        raise DataError(f"non-finite values after {block} block at layer {layer}")


def _forward_pass(H0, adj, config, params):
    """Run the schedule, caching what backward needs.

    Returns (logits, H0, final hidden, per-layer hidden list, caches,
    trace). hidden[0] is the post-projection input; hidden[l] is the
    state after layer l's regular block.
    """
    H0 = _check_network_input(H0, adj, config, params)
    act = config.activation
    floor = config.confidence_floor
    if config.use_input_projection:
        H = H0 @ params.input_projection
        _check_finite(H, 0, "projection")
    else:
        H = H0.copy()
    hidden = [H]
    caches: list[tuple[str, int, tuple]] = []
    trace: list[tuple[int, str]] = []
    for layer in range(1, config.num_layers + 1):
        i = layer - 1
        if layer <= config.l_fmt:
            H, cache = _format_forward(
                H, adj, params.w_fmt[i], params.b_fmt[i], floor, act
            )
            _check_finite(H, layer, "format")
            caches.append(("format", layer, cache))
            trace.append((layer, "format"))
        if layer <= config.l_cont:
            H, cache = _content_forward(
                H, adj, params.w_cont[i], params.b_cont[i], params.w_tilde[i],
                config.alpha, floor, act,
            )
            _check_finite(H, layer, "content")
            caches.append(("content", layer, cache))
            trace.append((layer, "content"))
        H, cache = _regular_forward(H, adj, params.w_rgn[i], act)
        _check_finite(H, layer, "regular")
        caches.append(("regular", layer, cache))
        trace.append((layer, "regular"))
        hidden.append(H)
    logits = H @ params.classifier_w + params.classifier_b
    return logits, H0, H, hidden, caches, trace


def pagnn_forward(
    H0: np.ndarray,
    adj: TypedAdjacency,
    config: PagnnConfig,
    params: PagnnParams,
    trace: list | None = None,
    return_hidden: bool = False,
):
    """Logits for every node; optionally the per-layer hidden states.

    `trace`, when given a list, collects (layer, block) invocations in
    execution order.
    """
    logits, _, _, hidden, _, tr = _forward_pass(H0, adj, config, params)
    if trace is not None:
        trace.extend(tr)
    if return_hidden:
        return logits, hidden
    return logits


def pagnn_backward(
    H0: np.ndarray,
    adj: TypedAdjacency,
    config: PagnnConfig,
    params: PagnnParams,
    upstream: np.ndarray,
) -> tuple[PagnnParams, np.ndarray]:
    """Exact gradients of sum(upstream * logits) for every parameter.

    Returns (gradients shaped like params, gradient w.r.t. H0).
    """
    logits, H0c, H_final, _, caches, _ = _forward_pass(H0, adj, config, params)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != logits.shape:
        raise DataError(
            f"upstream gradient: expected shape {logits.shape}, got {upstream.shape}"
        )
    grads = params.zeros_like()
    grads.classifier_w += H_final.T @ upstream
    grads.classifier_b += upstream.sum(axis=0)
    dH = upstream @ params.classifier_w.T
    act = config.activation
    for kind, layer, cache in reversed(caches):
        i = layer - 1
        if kind == "regular":
            dH = _regular_backward(dH, cache, adj, params.w_rgn[i], grads.w_rgn[i], act)
        elif kind == "content":
            dH = _content_backward(
                dH, cache, adj, params.w_cont[i], params.w_tilde[i],
                grads.w_cont[i], grads.b_cont[i], grads.w_tilde[i],
                config.alpha, act,
            )
        else:
            dH = _format_backward(
                dH, cache, adj, params.w_fmt[i], grads.w_fmt[i], grads.b_fmt[i], act
            )
    if config.use_input_projection:
        grads.input_projection += H0c.T @ dH
        dH = dH @ params.input_projection.T
    return grads, dH
