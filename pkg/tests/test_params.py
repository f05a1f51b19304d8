import numpy as np
import pytest

from ghgrl.errors import DataError
from ghgrl.pagnn.config import PagnnConfig
from ghgrl.pagnn.params import (
    init_params,
    load_checkpoint,
    save_checkpoint,
)


def _config(**over):
    kwargs = dict(
        num_layers=2,
        l_fmt=1,
        l_cont=2,
        d_in=6,
        d_fmt=6,
        d_cont=6,
        d_rgn=6,
        num_format_types=2,
        num_content_types=3,
        num_classes=4,
        seed=11,
    )
    kwargs.update(over)
    return PagnnConfig(**kwargs)


def test_init_shapes_follow_config():
    config = _config()
    p = init_params(config)
    assert p.input_projection is None
    assert len(p.w_fmt) == 1 and p.w_fmt[0].shape == (2, 6, 6)
    assert len(p.w_cont) == 2 and p.w_cont[1].shape == (3, 6, 6)
    assert len(p.w_tilde) == 2
    assert len(p.w_rgn) == 2 and p.w_rgn[0].shape == (6, 6)
    assert p.classifier_w.shape == (6, 4)
    assert p.classifier_b.shape == (4,)


def test_init_biases_are_zero_and_weights_are_not():
    p = init_params(_config())
    assert np.all(p.b_fmt[0] == 0.0)
    assert np.all(p.b_cont[0] == 0.0)
    assert np.all(p.classifier_b == 0.0)
    assert np.any(p.w_fmt[0] != 0.0)
    assert np.any(p.classifier_w != 0.0)


def test_init_is_deterministic_in_seed():
    a = init_params(_config(seed=3))
    b = init_params(_config(seed=3))
    c = init_params(_config(seed=4))
    for (_, x), (_, y) in zip(a.named_tensors(), b.named_tensors()):
        assert np.array_equal(x, y)
    assert not np.array_equal(a.w_rgn[0], c.w_rgn[0])


def test_init_glorot_bounds():
    p = init_params(_config())
    for name, tensor in p.named_tensors():
        if name.startswith("b_") or name == "classifier_b":
            continue
        fan_in, fan_out = tensor.shape[-2], tensor.shape[-1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.all(np.abs(tensor) <= limit + 1e-12), name


def test_layer_streams_differ():
    p = init_params(_config(l_cont=2))
    assert not np.array_equal(p.w_cont[0], p.w_cont[1])
    assert not np.array_equal(p.w_cont[0], p.w_tilde[0])


def test_named_tensor_order():
    config = _config(d_in=4, use_input_projection=True)
    names = [n for n, _ in init_params(config).named_tensors()]
    assert names == [
        "input_projection",
        "w_fmt[1]", "b_fmt[1]",
        "w_cont[1]", "b_cont[1]", "w_tilde[1]",
        "w_cont[2]", "b_cont[2]", "w_tilde[2]",
        "w_rgn[1]", "w_rgn[2]",
        "classifier_w", "classifier_b",
    ]


def test_zeros_like_and_copy_are_independent():
    p = init_params(_config())
    z = p.zeros_like()
    for _, tensor in z.named_tensors():
        assert np.all(tensor == 0.0)
    q = p.copy()
    q.w_rgn[0][0, 0] += 1.0
    assert p.w_rgn[0][0, 0] != q.w_rgn[0][0, 0]


def test_validate_finite_names_the_tensor():
    p = init_params(_config())
    p.w_cont[1][0, 0, 0] = np.inf
    with pytest.raises(DataError, match=r"w_cont\[2\]"):
        p.validate_finite()


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    config = _config(d_in=3, use_input_projection=True, alpha=0.7, seed=9)
    p = init_params(config)
    path = tmp_path / "model.bin"
    save_checkpoint(path, config, p)
    config2, p2 = load_checkpoint(path)
    assert config2 == config
    for (na, a), (nb, b) in zip(p.named_tensors(), p2.named_tensors()):
        assert na == nb
        assert np.array_equal(a, b), na


def test_checkpoint_write_is_deterministic(tmp_path):
    config = _config()
    p = init_params(config)
    save_checkpoint(tmp_path / "a.bin", config, p)
    save_checkpoint(tmp_path / "b.bin", config, p)
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_checkpoint_file_errors(tmp_path):
    config = _config()
    p = init_params(config)
    path = tmp_path / "model.bin"
    save_checkpoint(path, config, p)
    blob = path.read_bytes()

    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOPE" + blob[4:])
    with pytest.raises(DataError, match="magic"):
        load_checkpoint(bad)

    bad.write_bytes(blob[:-8])
    with pytest.raises(DataError, match="truncated"):
        load_checkpoint(bad)

    bad.write_bytes(blob + b"\x00" * 8)
    with pytest.raises(DataError, match="trailing"):
        load_checkpoint(bad)

    with pytest.raises(DataError, match="not found"):
        load_checkpoint(tmp_path / "missing.bin")


def test_checkpoint_rejects_nonfinite_saves(tmp_path):
    config = _config()
    p = init_params(config)
    p.classifier_w[0, 0] = np.nan
    with pytest.raises(DataError, match="non-finite"):
        save_checkpoint(tmp_path / "model.bin", config, p)
