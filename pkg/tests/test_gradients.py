"""Finite-difference checks of the hand-written backward pass."""

import numpy as np
import pytest

from ghgrl.pagnn.adjacency import TypedAdjacency
from ghgrl.pagnn.config import PagnnConfig
from ghgrl.pagnn.network import pagnn_backward, pagnn_forward
from ghgrl.pagnn.params import init_params


def _config(**over):
    kwargs = dict(
        num_layers=2,
        l_fmt=1,
        l_cont=2,
        d_in=5,
        d_fmt=5,
        d_cont=5,
        d_rgn=5,
        num_format_types=2,
        num_content_types=3,
        num_classes=3,
        alpha=0.6,
        confidence_floor=0.15,
        seed=7,
    )
    kwargs.update(over)
    return PagnnConfig(**kwargs)


def _case(config, n=6, seed=0, fmt=None, cont=None):
    rng = np.random.default_rng(seed)
    edges = [(i, (i + 1) % n) for i in range(n)] + [(0, n // 2)]
    adj = TypedAdjacency.build(
        node_count=n,
        edges=edges,
        fmt_index=fmt if fmt is not None else rng.integers(0, config.num_format_types, size=n),
        fmt_conf=rng.uniform(0.3, 0.95, size=n),
        cont_index=cont if cont is not None else rng.integers(0, config.num_content_types, size=n),
        cont_conf=rng.uniform(0.3, 0.95, size=n),
        num_format_types=config.num_format_types,
        num_content_types=config.num_content_types,
    )
    H0 = rng.normal(size=(n, config.d_in))
    upstream = rng.normal(size=(n, config.num_classes))
    return adj, H0, upstream


def _objective(H0, adj, config, params, upstream):
    return float(np.sum(upstream * pagnn_forward(H0, adj, config, params)))


def _randomize(params, seed):
    # fresh-init biases are zero; with zero rows out of a relu that parks
    # pre-activations exactly on the kink, where FD and the subgradient
    # legitimately disagree. Random biases keep kinks at measure zero.
    rng = np.random.default_rng(seed)
    for _, tensor in params.named_tensors():
        tensor[...] = rng.uniform(-0.6, 0.6, size=tensor.shape)
    return params


def _max_rel_err(config, adj, H0, upstream, h=1e-6, entries=20, seed=3):
    params = _randomize(init_params(config), seed + 101)
    grads, dH0 = pagnn_backward(H0, adj, config, params, upstream)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for (_, tensor), (_, grad) in zip(params.named_tensors(), grads.named_tensors()):
        flat = tensor.reshape(-1)
        gflat = grad.reshape(-1)
        picks = rng.choice(flat.size, size=min(entries, flat.size), replace=False)
        for j in picks:
            saved = flat[j]
            flat[j] = saved + h
            fp = _objective(H0, adj, config, params, upstream)
            flat[j] = saved - h
            fm = _objective(H0, adj, config, params, upstream)
            flat[j] = saved
            fd = (fp - fm) / (2.0 * h)
            worst = max(worst, abs(gflat[j] - fd) / max(1.0, abs(gflat[j]), abs(fd)))
    # input gradient, same protocol
    flat = H0.reshape(-1)
    gflat = dH0.reshape(-1)
    for j in rng.choice(flat.size, size=min(entries, flat.size), replace=False):
        saved = flat[j]
        flat[j] = saved + h
        fp = _objective(H0, adj, config, params, upstream)
        flat[j] = saved - h
        fm = _objective(H0, adj, config, params, upstream)
        flat[j] = saved
        fd = (fp - fm) / (2.0 * h)
        worst = max(worst, abs(gflat[j] - fd) / max(1.0, abs(gflat[j]), abs(fd)))
    return worst


def test_gradients_full_schedule():
    config = _config()
    adj, H0, upstream = _case(config)
    assert _max_rel_err(config, adj, H0, upstream) < 5e-6


def test_gradients_regular_only():
    config = _config(l_fmt=0, l_cont=0, num_layers=3)
    adj, H0, upstream = _case(config, seed=1)
    assert _max_rel_err(config, adj, H0, upstream) < 5e-6


def test_gradients_content_only():
    config = _config(l_fmt=0, l_cont=1, num_layers=2)
    adj, H0, upstream = _case(config, seed=2)
    assert _max_rel_err(config, adj, H0, upstream) < 5e-6


def test_gradients_leaky_relu():
    config = _config(activation="leaky_relu")
    adj, H0, upstream = _case(config, seed=4)
    assert _max_rel_err(config, adj, H0, upstream) < 5e-6


def test_gradients_with_input_projection():
    config = _config(d_in=8, use_input_projection=True)
    adj, H0, upstream = _case(config, seed=5)
    assert _max_rel_err(config, adj, H0, upstream) < 5e-6


def test_gradients_zero_confidence_floor():
    config = _config(confidence_floor=0.0)
    adj, H0, upstream = _case(config, seed=6)
    assert _max_rel_err(config, adj, H0, upstream) < 5e-6


def test_gradients_alpha_zero():
    config = _config(alpha=0.0)
    adj, H0, upstream = _case(config, seed=8)
    assert _max_rel_err(config, adj, H0, upstream) < 5e-6


def test_unused_type_slice_gets_zero_gradient():
    config = _config(num_format_types=3, num_content_types=2)
    # nobody carries format type 2 or content type 1
    adj, H0, upstream = _case(config, fmt=[0, 1, 0, 1, 0, 0], cont=[0] * 6)
    params = init_params(config)
    grads, _ = pagnn_backward(H0, adj, config, params, upstream)
    for i in range(config.l_fmt):
        assert np.all(grads.w_fmt[i][2] == 0.0)
        assert np.all(grads.b_fmt[i][2] == 0.0)
    for i in range(config.l_cont):
        assert np.all(grads.w_cont[i][1] == 0.0)
        assert np.all(grads.b_cont[i][1] == 0.0)
        assert np.all(grads.w_tilde[i][1] == 0.0)


def test_zero_upstream_gives_zero_gradients():
    config = _config()
    adj, H0, upstream = _case(config)
    params = init_params(config)
    grads, dH0 = pagnn_backward(H0, adj, config, params, np.zeros_like(upstream))
    for _, g in grads.named_tensors():
        assert np.all(g == 0.0)
    assert np.all(dH0 == 0.0)


def test_backward_validates_upstream_shape():
    config = _config()
    adj, H0, upstream = _case(config)
    with pytest.raises(Exception, match="upstream"):
        pagnn_backward(H0, adj, config, init_params(config), upstream[:, :1])


def test_gradients_deterministic():
    config = _config()
    adj, H0, upstream = _case(config)
    params = init_params(config)
    g1, d1 = pagnn_backward(H0, adj, config, params, upstream)
    g2, d2 = pagnn_backward(H0, adj, config, params, upstream)
    for (_, a), (_, b) in zip(g1.named_tensors(), g2.named_tensors()):
        assert np.array_equal(a, b)
    assert np.array_equal(d1, d2)
