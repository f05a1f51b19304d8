import numpy as np
import pytest

from ghgrl.errors import DataError
from ghgrl.pagnn.adjacency import TypedAdjacency
from ghgrl.pagnn.config import PagnnConfig
from ghgrl.pagnn.network import (
    content_forward,
    format_alignment_forward,
    pagnn_forward,
    regular_forward,
)
from ghgrl.pagnn.params import init_params


def _adj(n, edges, fmt=None, cont=None, fmt_conf=None, cont_conf=None,
         m_fmt=1, m_cont=1):
    return TypedAdjacency.build(
        node_count=n,
        edges=edges,
        fmt_index=fmt if fmt is not None else [0] * n,
        fmt_conf=fmt_conf if fmt_conf is not None else [1.0] * n,
        cont_index=cont if cont is not None else [0] * n,
        cont_conf=cont_conf if cont_conf is not None else [1.0] * n,
        num_format_types=m_fmt,
        num_content_types=m_cont,
    )


# --- format block -----------------------------------------------------------

def test_format_block_scalar_hand_case():
    # relu(0.8*(2*1.5 + 0.5) + 0.2*2) = relu(2.8 + 0.4) = 3.2
    adj = _adj(1, [], fmt_conf=[0.8])
    out = format_alignment_forward(
        np.array([[2.0]]), adj, np.array([[[1.5]]]), np.array([[0.5]])
    )
    assert out == pytest.approx(np.array([[3.2]]))


def test_format_block_full_confidence_drops_residual():
    adj = _adj(2, [(0, 1)], fmt_conf=[1.0, 1.0])
    H = np.array([[1.0, -2.0], [0.5, 3.0]])
    w = np.random.default_rng(0).normal(size=(1, 2, 2))
    b = np.zeros((1, 2))
    out = format_alignment_forward(H, adj, w, b)
    assert np.array_equal(out, np.maximum(H @ w[0], 0.0))


def test_format_block_zero_confidence_keeps_input():
    adj = _adj(2, [], fmt_conf=[0.0, 0.0])
    H = np.array([[1.0, 2.0], [3.0, -4.0]])
    w = np.full((1, 2, 2), 99.0)
    out = format_alignment_forward(H, adj, w, np.zeros((1, 2)))
    assert np.array_equal(out, np.maximum(H, 0.0))


def test_format_block_confidence_floor_lifts_gate():
    adj = _adj(1, [], fmt_conf=[0.0])
    H = np.array([[2.0]])
    w = np.array([[[1.0]]])
    b = np.array([[4.0]])
    # floor 0.5: relu(0.5*(2+4) + 0.5*2) = 4.0
    out = format_alignment_forward(H, adj, w, b, confidence_floor=0.5)
    assert out == pytest.approx(np.array([[4.0]]))


def test_format_block_is_type_local():
    adj = _adj(2, [], fmt=[0, 1], m_fmt=2)
    H = np.array([[1.0, 1.0], [1.0, 1.0]])
    w = np.stack([np.eye(2), np.eye(2)])
    b = np.zeros((2, 2))
    base = format_alignment_forward(H, adj, w, b)
    w2 = w.copy()
    w2[1] *= 7.0
    bumped = format_alignment_forward(H, adj, w2, b)
    assert np.array_equal(base[0], bumped[0])  # node 0 untouched
    assert not np.array_equal(base[1], bumped[1])


def test_format_block_leaky_relu():
    adj = _adj(1, [])
    H = np.array([[-3.0]])
    out = format_alignment_forward(
        H, adj, np.array([[[1.0]]]), np.array([[0.0]]), activation="leaky_relu"
    )
    assert out == pytest.approx(np.array([[-0.03]]))


def test_format_block_shape_check():
    adj = _adj(2, [])
    with pytest.raises(DataError, match="expected shape"):
        format_alignment_forward(
            np.ones((3, 2)), adj, np.zeros((1, 2, 2)), np.zeros((1, 2))
        )


# --- content block ----------------------------------------------------------

def test_content_block_two_node_hand_case():
    # Hc = relu([[2],[4]]); M = [[4],[2]]; out = 0.5*Hc + M*3 = [[13],[8]]
    adj = _adj(2, [(0, 1)])
    out = content_forward(
        np.array([[1.0], [2.0]]),
        adj,
        np.array([[[2.0]]]),
        np.array([[0.0]]),
        np.array([[[3.0]]]),
        alpha=0.5,
    )
    assert out == pytest.approx(np.array([[13.0], [8.0]]))


def test_content_block_isolated_node_keeps_alpha_share():
    adj = _adj(1, [])
    out = content_forward(
        np.array([[4.0]]),
        adj,
        np.array([[[1.0]]]),
        np.array([[1.0]]),
        np.array([[[9.0]]]),
        alpha=0.25,
    )
    # no neighbors: out = alpha * relu(4 + 1)
    assert out == pytest.approx(np.array([[1.25]]))


def test_content_block_zero_confidence_zeroes_everything():
    adj = _adj(2, [(0, 1)], cont_conf=[0.0, 0.0])
    out = content_forward(
        np.array([[1.0], [2.0]]),
        adj,
        np.array([[[2.0]]]),
        np.array([[5.0]]),
        np.array([[[3.0]]]),
        alpha=0.5,
    )
    assert np.array_equal(out, np.zeros((2, 1)))


def test_content_block_aggregation_weight_uses_target_type():
    # node 0 type 0, node 1 type 1; wt[1] scales only what node 1 receives
    adj = _adj(2, [(0, 1)], cont=[0, 1], m_cont=2)
    H = np.array([[1.0], [1.0]])
    w = np.ones((2, 1, 1))
    b = np.zeros((2, 1))
    wt = np.array([[[1.0]], [[10.0]]])
    out = content_forward(H, adj, w, b, wt, alpha=0.0)
    # Hc = [[1],[1]]; node 0 gets M*wt[0] = 1, node 1 gets M*wt[1] = 10
    assert out == pytest.approx(np.array([[1.0], [10.0]]))


def test_content_block_source_typed_transform():
    # different w per source type changes what neighbors receive
    adj = _adj(2, [(0, 1)], cont=[0, 1], m_cont=2)
    H = np.array([[1.0], [1.0]])
    w = np.array([[[2.0]], [[5.0]]])
    b = np.zeros((2, 1))
    wt = np.ones((2, 1, 1))
    out = content_forward(H, adj, w, b, wt, alpha=0.0)
    # Hc = [relu(2*1), relu(5*1)] = [2, 5]; out[0] = mean(Hc[1]) = 5, out[1] = 2
    assert out == pytest.approx(np.array([[5.0], [2.0]]))


# --- regular block ----------------------------------------------------------

def test_regular_block_hand_case():
    adj = _adj(2, [(0, 1)])
    H = np.array([[1.0, 1.0], [3.0, 3.0]])
    out = regular_forward(H, adj, np.eye(2))
    assert np.array_equal(out, np.full((2, 2), 4.0))


def test_regular_block_isolated_node_is_plain_transform():
    adj = _adj(1, [])
    out = regular_forward(np.array([[2.0, -1.0]]), adj, np.eye(2))
    assert np.array_equal(out, np.array([[2.0, 0.0]]))


def test_regular_block_zero_weights_give_zeros():
    adj = _adj(3, [(0, 1), (1, 2)])
    out = regular_forward(np.ones((3, 2)), adj, np.zeros((2, 2)))
    assert np.array_equal(out, np.zeros((3, 2)))


# --- full network -----------------------------------------------------------

def _config(**over):
    kwargs = dict(
        num_layers=3,
        l_fmt=1,
        l_cont=2,
        d_in=4,
        d_fmt=4,
        d_cont=4,
        d_rgn=4,
        num_format_types=2,
        num_content_types=2,
        num_classes=3,
        seed=5,
    )
    kwargs.update(over)
    return PagnnConfig(**kwargs)


def _random_case(config, n=6, seed=1):
    rng = np.random.default_rng(seed)
    edges = [tuple(map(int, e)) for e in rng.integers(0, n, size=(n * 2, 2))]
    adj = TypedAdjacency.build(
        node_count=n,
        edges=edges,
        fmt_index=rng.integers(0, config.num_format_types, size=n),
        fmt_conf=rng.uniform(0.2, 1.0, size=n),
        cont_index=rng.integers(0, config.num_content_types, size=n),
        cont_conf=rng.uniform(0.2, 1.0, size=n),
        num_format_types=config.num_format_types,
        num_content_types=config.num_content_types,
    )
    H0 = rng.normal(size=(n, config.d_in))
    return adj, H0


def test_schedule_trace_orders_blocks():
    config = _config()
    adj, H0 = _random_case(config)
    trace = []
    pagnn_forward(H0, adj, config, init_params(config), trace=trace)
    assert trace == [
        (1, "format"),
        (1, "content"),
        (1, "regular"),
        (2, "content"),
        (2, "regular"),
        (3, "regular"),
    ]


def test_schedule_without_typed_blocks():
    config = _config(l_fmt=0, l_cont=0, num_layers=2)
    adj, H0 = _random_case(config)
    trace = []
    pagnn_forward(H0, adj, config, init_params(config), trace=trace)
    assert trace == [(1, "regular"), (2, "regular")]


def test_hidden_states_have_layer_count_plus_one():
    config = _config()
    adj, H0 = _random_case(config)
    logits, hidden = pagnn_forward(
        H0, adj, config, init_params(config), return_hidden=True
    )
    assert len(hidden) == config.num_layers + 1
    assert np.array_equal(hidden[0], H0)  # no projection configured
    assert logits.shape == (6, config.num_classes)


def test_input_projection_changes_width():
    config = _config(d_in=9, use_input_projection=True)
    adj, H0 = _random_case(config)
    logits, hidden = pagnn_forward(
        H0, adj, config, init_params(config), return_hidden=True
    )
    assert hidden[0].shape == (6, config.d)
    assert logits.shape == (6, config.num_classes)


def test_forward_is_permutation_equivariant():
    config = _config()
    n = 7
    rng = np.random.default_rng(2)
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 4), (2, 6)]
    fmt = rng.integers(0, 2, size=n)
    cont = rng.integers(0, 2, size=n)
    fconf = rng.uniform(0.3, 1.0, size=n)
    cconf = rng.uniform(0.3, 1.0, size=n)
    H0 = rng.normal(size=(n, config.d_in))
    params = init_params(config)

    adj = TypedAdjacency.build(n, edges, fmt, fconf, cont, cconf, 2, 2)
    base = pagnn_forward(H0, adj, config, params)

    perm = rng.permutation(n)
    inv = np.argsort(perm)
    # node v in the original becomes position inv[v] in the relabeled graph
    p_edges = [(int(inv[s]), int(inv[d])) for s, d in edges]
    p_adj = TypedAdjacency.build(
        n, p_edges, fmt[perm], fconf[perm], cont[perm], cconf[perm], 2, 2
    )
    permuted = pagnn_forward(H0[perm], p_adj, config, params)
    assert np.allclose(permuted, base[perm], atol=1e-12)


def test_single_type_matches_untyped_computation_bitwise():
    # one type everywhere: the gather is an arange copy, so the typed
    # path must reproduce the straight matmul bit for bit
    config = _config(num_format_types=1, num_content_types=1, l_fmt=1, l_cont=1,
                     num_layers=1)
    adj, H0 = _random_case(config, n=8, seed=3)
    adj = TypedAdjacency.build(
        8, [(i, (i + 1) % 8) for i in range(8)],
        [0] * 8, adj.fmt_conf, [0] * 8, adj.cont_conf, 1, 1,
    )
    params = init_params(config)
    out = format_alignment_forward(
        H0, adj, params.w_fmt[0], params.b_fmt[0], 0.0, "relu"
    )
    c = np.maximum(adj.fmt_conf, 0.0)[:, None]
    manual = np.maximum(c * (H0 @ params.w_fmt[0][0] + params.b_fmt[0][0]) + (1 - c) * H0, 0.0)
    assert np.array_equal(out, manual)


def test_network_input_validation():
    config = _config()
    adj, H0 = _random_case(config)
    params = init_params(config)
    with pytest.raises(DataError, match="expected shape"):
        pagnn_forward(H0[:, :2], adj, config, params)
    bad = H0.copy()
    bad[0, 0] = np.nan
    with pytest.raises(DataError, match="non-finite"):
        pagnn_forward(bad, adj, config, params)


def test_type_count_mismatch_is_rejected():
    config = _config(num_format_types=3)
    adj, H0 = _random_case(_config())  # adjacency built with 2 format types
    with pytest.raises(DataError, match="format type count"):
        pagnn_forward(H0, adj, config, init_params(config))
