import struct
from dataclasses import replace

import numpy as np
import pytest

from polsar_gan.checkpoint import (
    decode_tensors,
    encode_tensors,
    load_checkpoint,
    read_tensors,
    save_checkpoint,
    write_tensors,
)
from polsar_gan.errors import BadMagicError, CheckpointError, TruncatedFileError
from polsar_gan.gan import train


def test_tensor_container_round_trip(tmp_path, rng):
    tensors = {
        "a":      rng.normal(size=(2, 3)),
        "b.f32":  rng.normal(size=(4,)).astype(np.float32),
        "scalar": np.asarray(7.0),
        "empty":  np.zeros((0, 5, 2)),
    }
    write_tensors(tensors, tmp_path / "t.cvg")
    back = read_tensors(tmp_path / "t.cvg")
    assert list(back) == list(tensors)
    for name, arr in tensors.items():
        assert back[name].dtype == arr.dtype and back[name].shape == arr.shape
        assert back[name].tobytes() == arr.tobytes()


def test_container_layout():
    raw = encode_tensors({"w": np.array([1.0, 2.0], dtype=np.float32)})
    assert raw[:4] == b"CVG1"
    assert struct.unpack("<I", raw[4:8]) == (1,)
    assert struct.unpack("<H", raw[8:10]) == (1,) and raw[10:11] == b"w"
    assert raw[11:13] == bytes([0, 1])
    assert struct.unpack("<I", raw[13:17]) == (2,)
    assert raw[17:] == np.array([1.0, 2.0], dtype="<f4").tobytes()


def test_container_errors():
    raw = encode_tensors({"w": np.ones(3)})
    with pytest.raises(BadMagicError):
        decode_tensors(b"NOPE" + raw[4:])
    with pytest.raises(TruncatedFileError):
        decode_tensors(raw[:-1])
    bad_tag = bytearray(raw)
    bad_tag[11] = 7
    with pytest.raises(CheckpointError):
        decode_tensors(bytes(bad_tag))
    with pytest.raises(CheckpointError):
        decode_tensors(raw + b"\x00")


def test_model_round_trip(tmp_path, tiny_config, tiny_splits):
    model, _ = train(tiny_config, tiny_splits)
    save_checkpoint(model, tmp_path / "m.ckpt")
    back = load_checkpoint(tmp_path / "m.ckpt")

    assert back.config == model.config
    for a, b in ((model.discriminator, back.discriminator), (model.generator, back.generator)):
        for name, arr in a.named_parameters().items():
            np.testing.assert_array_equal(b.named_parameters()[name], arr)
        for name, arr in a.named_buffers().items():
            np.testing.assert_array_equal(b.named_buffers()[name], arr)
    assert back.adam_d.step == model.adam_d.step
    for name, arr in model.adam_g.v.items():
        np.testing.assert_array_equal(back.adam_g.v[name], arr)
    np.testing.assert_array_equal(back.predict(tiny_splits.test), model.predict(tiny_splits.test))


def test_same_seed_same_checkpoint_bytes(tmp_path, tiny_config, tiny_splits):
    for name in ("a", "b"):
        model, _ = train(replace(tiny_config, epochs=1), tiny_splits)
        save_checkpoint(model, tmp_path / f"{name}.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_supervised_checkpoint(tmp_path, tiny_config, tiny_splits):
    model, _ = train(replace(tiny_config, mode="supervised", epochs=1, dtype="float32"), tiny_splits)
    save_checkpoint(model, tmp_path / "s.ckpt")
    back = load_checkpoint(tmp_path / "s.ckpt")
    assert back.generator is None and back.config.mode == "supervised"
    assert back.config.dtype == "float32"
    assert not any(k.startswith("G.") for k in read_tensors(tmp_path / "s.ckpt"))


def test_missing_parameter(tmp_path, tiny_config, tiny_splits):
    model, _ = train(replace(tiny_config, epochs=1), tiny_splits)
    save_checkpoint(model, tmp_path / "m.ckpt")
    tensors = read_tensors(tmp_path / "m.ckpt")
    del tensors["D.head.W"]
    write_tensors(tensors, tmp_path / "broken.ckpt")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "broken.ckpt")


@pytest.mark.parametrize("key, value", [
    ("config.mode", np.asarray(7.0)),
    ("config.dtype", np.asarray(3.0)),
    ("config.epochs", np.zeros(2)),
    ("config.batch_size", np.asarray(2.5)),
    ("config.lr", np.asarray(np.nan)),
    ("config.kernel_size", np.asarray(3.0)),
    ("config.g_channels", np.array([4.0, 0.5])),
    ("norm.mean", np.zeros((2, 2))),
    ("norm.epsilon", np.zeros(3)),
    ("adam_d.step", np.zeros(4)),
])
def test_corrupted_entries_are_named(tmp_path, tiny_config, tiny_splits, key, value):
    model, _ = train(replace(tiny_config, epochs=1), tiny_splits)
    save_checkpoint(model, tmp_path / "m.ckpt")
    tensors = read_tensors(tmp_path / "m.ckpt")
    tensors[key] = value
    write_tensors(tensors, tmp_path / "bad.ckpt")
    with pytest.raises(CheckpointError, match=key.split(".")[0]):
        load_checkpoint(tmp_path / "bad.ckpt")


def test_adam_moment_shape_mismatch(tmp_path, tiny_config, tiny_splits):
    model, _ = train(replace(tiny_config, epochs=1), tiny_splits)
    save_checkpoint(model, tmp_path / "m.ckpt")
    tensors = read_tensors(tmp_path / "m.ckpt")
    tensors["adam_d.m.head.W"] = np.zeros(3)
    write_tensors(tensors, tmp_path / "bad.ckpt")
    with pytest.raises(CheckpointError, match="adam_d.m.head.W"):
        load_checkpoint(tmp_path / "bad.ckpt")
