"""Flat binary model checkpoints.

Layout (all integers little-endian):

    magic   4 bytes  b"OBCK"
    version u32      currently 1
    name    u32 length + UTF-8 model name
    count   u32      number of tensor records
    then per tensor:
        name    u32 length + UTF-8
        dtype   u8   0 = float64 (the only tag)
        rank    u32
        dims    rank x u64
        payload raw little-endian float64, C order

Readers validate the magic, version, dtype tags, and that the payload is
exactly as long as the dims promise; a short file raises
TruncatedFileError rather than returning partial tensors.
"""

from __future__ import annotations

import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .errors import DataError, TruncatedFileError
from .models import Model, build_model

MAGIC = b"OBCK"
VERSION = 1
_DTYPE_F64 = 0


def save_checkpoint(model: Model, path: str | Path) -> None:
    """Write the model's name and parameter tensors to `path`."""
    path = Path(path)
    parts = [MAGIC, struct.pack("<I", VERSION)]
    name_bytes = model.config.name.encode("utf-8")
    parts.append(struct.pack("<I", len(name_bytes)))
    parts.append(name_bytes)
    parts.append(struct.pack("<I", len(model.params)))
    for name, tensor in model.params.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<BI", _DTYPE_F64, tensor.data.ndim))
        parts.append(struct.pack(f"<{tensor.data.ndim}Q", *tensor.data.shape))
        parts.append(np.ascontiguousarray(
            tensor.data, dtype="<f8").tobytes())
    path.write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFileError(
                f"{self.path}: expected {n} more bytes at offset {self.pos}, "
                f"file has {len(self.blob)}")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]


def load_checkpoint(path: str | Path) -> tuple[str, "OrderedDict[str, np.ndarray]"]:
    """Read a checkpoint; returns (model name, name -> array)."""
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    if reader.take(4) != MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    version = reader.u32()
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    model_name = reader.take(reader.u32()).decode("utf-8")
    count = reader.u32()
    tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        name = reader.take(reader.u32()).decode("utf-8")
        dtype = reader.u8()
        if dtype != _DTYPE_F64:
            raise DataError(f"{path}: unknown dtype tag {dtype} for {name!r}")
        rank = reader.u32()
        dims = struct.unpack(f"<{rank}Q", reader.take(8 * rank))
        n_bytes = 8 * int(np.prod(dims, dtype=np.int64)) if rank else 8
        data = np.frombuffer(reader.take(n_bytes), dtype="<f8")
        tensors[name] = data.reshape(dims).astype(np.float64)
    if reader.pos != len(reader.blob):
        raise DataError(
            f"{path}: {len(reader.blob) - reader.pos} trailing bytes after "
            "the last tensor")
    return model_name, tensors


def restore_model(path: str | Path, seed: int = 0) -> Model:
    """Rebuild a model from a checkpoint.

    The architecture comes from the stored model name; input channels and
    class count are inferred from the stored tensor shapes.  For alexnet
    the local-response-norm variant is recognised by its shifted layer
    indices.
    """
    model_name, tensors = load_checkpoint(path)
    conv_weights = [a for a in tensors.values() if a.ndim == 4]
    linear_weights = [a for a in tensors.values() if a.ndim == 2]
    if not linear_weights:
        raise DataError(f"{path}: checkpoint has no linear head")
    in_channels = conv_weights[0].shape[1] if conv_weights else 1
    num_classes = linear_weights[-1].shape[1]

    last_error: DataError | None = None
    for lrn in (False, True) if model_name == "alexnet" else (False,):
        model = build_model(model_name, seed, in_channels=in_channels,
                            num_classes=num_classes, lrn=lrn)
        try:
            _load_into(model, tensors, path)
            return model
        except DataError as err:
            last_error = err
    raise last_error


def _load_into(model: Model, tensors: "OrderedDict[str, np.ndarray]",
               path: Path) -> None:
    expected = set(model.params)
    stored = set(tensors)
    if expected != stored:
        missing = sorted(expected - stored)
        extra = sorted(stored - expected)
        raise DataError(
            f"{path}: parameter names do not match {model.config.name}: "
            f"missing {missing or 'none'}, unexpected {extra or 'none'}")
    for name, tensor in model.params.items():
        if tensors[name].shape != tensor.data.shape:
            raise DataError(
                f"{path}: tensor {name!r} has shape {tensors[name].shape}, "
                f"model expects {tensor.data.shape}")
        tensor.data = tensors[name].copy()
