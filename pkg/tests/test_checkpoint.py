"""Binary checkpoint writing, validation, and model restoration."""

import numpy as np
import pytest

from optbench.checkpoint import (MAGIC, load_checkpoint, restore_model,
                                 save_checkpoint)
from optbench.errors import DataError, TruncatedFileError
from optbench.models import build_model
from optbench.rng import SplitMix64


def test_save_load_roundtrip(tmp_path):
    model = build_model("vgg-lite-tiny", seed=3, num_classes=5)
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    name, tensors = load_checkpoint(path)
    assert name == "vgg-lite-tiny"
    assert list(tensors) == list(model.params)
    for key, array in tensors.items():
        assert np.array_equal(array, model.params[key].data)


def test_restore_reproduces_forward_bitwise(tmp_path):
    model = build_model("resnet-lite", seed=4, num_classes=6).eval()
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    restored = restore_model(path, seed=99).eval()
    x = SplitMix64(5).fill_uniform(2 * 28 * 28, 0.0, 1.0).reshape(2, 1, 28,
                                                                  28)
    assert np.array_equal(model.forward(x).data, restored.forward(x).data)


def test_restore_infers_geometry(tmp_path):
    model = build_model("vgg-lite", seed=1, num_classes=9)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    restored = restore_model(path)
    assert restored.config.num_classes == 9
    assert restored.config.in_channels == 1


def test_restore_alexnet_lrn_variant(tmp_path):
    model = build_model("alexnet", seed=0, num_classes=3, lrn=True)
    path = tmp_path / "a.ckpt"
    save_checkpoint(model, path)
    restored = restore_model(path)
    kinds = [s.kind for s in restored.config.layers]
    assert kinds.count("local-response-norm") == 2


def test_truncated_checkpoint(tmp_path):
    model = build_model("vgg-lite-tiny", seed=0, num_classes=3)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(TruncatedFileError):
        load_checkpoint(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "m.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(DataError):
        load_checkpoint(path)


def test_bad_version(tmp_path):
    model = build_model("vgg-lite-tiny", seed=0, num_classes=3)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    blob = bytearray(path.read_bytes())
    blob[4] = 9
    path.write_bytes(bytes(blob))
    with pytest.raises(DataError):
        load_checkpoint(path)


def test_trailing_bytes_rejected(tmp_path):
    model = build_model("vgg-lite-tiny", seed=0, num_classes=3)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(DataError):
        load_checkpoint(path)


def test_magic_is_stable(tmp_path):
    model = build_model("vgg-lite-tiny", seed=0, num_classes=3)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    assert path.read_bytes()[:4] == MAGIC == b"OBCK"


def test_mismatched_architecture_rejected(tmp_path):
    saved = build_model("vgg-lite-tiny", seed=0, num_classes=3)
    path = tmp_path / "m.ckpt"
    save_checkpoint(saved, path)
    _, tensors = load_checkpoint(path)
    from optbench.checkpoint import _load_into
    other = build_model("resnet-lite", seed=0, num_classes=3)
    with pytest.raises(DataError):
        _load_into(other, tensors, path)
