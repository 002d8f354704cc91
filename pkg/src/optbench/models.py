"""The three benchmark CNNs as layer programs over the autodiff ops.

A model is a `ModelConfig` (an ordered list of `LayerSpec`s plus input
geometry) and a dict of parameter tensors.  Configs are validated up front
by symbolic shape propagation, so incompatible layer sequences fail at
build time, not in the middle of a forward pass.

Architectures:

* ``alexnet`` - the classic five-conv / three-fc AlexNet in its
  single-tower form.  Native input is 227x227: that is the only size the
  11x11 stride-4 first conv tiles exactly (the widely quoted 224 leaves a
  fractional window for every padding).  28x28 inputs are resized
  bilinearly.  Local response normalisation is available behind a flag and
  off by default, matching modern reimplementations.
* ``vgg-lite`` - five blocks of one 3x3 conv plus one 2x2 maxpool with
  channel widths [16, 32, 64, 128, 128] (VGG11's widths over four).
  Native input is 32x32, reached by zero-padding 28x28 inputs; five
  halvings end at 1x1.  The classifier head (256-wide hidden layer with
  dropout) is this package's choice and is not part of the source
  architecture family.
* ``resnet-lite`` - the first stage of a batch-norm-free ResNet18 adapted
  to 28x28 inputs: 7x7 stride-1 conv (stride 2 cannot tile a 28-pixel
  extent), 2x2 maxpool, two 64-channel identity-skip basic blocks, global
  average pooling, and a linear head.
* ``vgg-lite-tiny`` - a three-block, [8, 16, 32]-channel cut of vgg-lite
  with a 512-wide hidden layer, for desk-scale experiments and fast
  tests; the head stays wide enough that even the most damped optimizer
  settings converge on separable data within a few epochs.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .rng import SplitMix64, derive_seed
from .tensor import Tensor, ops


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a model program; only the fields its kind reads are set.

    Kinds: conv, maxpool, relu, linear, flatten, dropout,
    local-response-norm, residual-block, global-avg-pool.
    """

    kind: str
    channels: int | None = None     # conv, residual-block
    kernel: int | None = None       # conv, maxpool
    stride: int = 1                 # conv, maxpool
    pad: int = 0                    # conv
    units: int | None = None        # linear
    rate: float | None = None       # dropout
    size: int = 5                   # local-response-norm window


@dataclass(frozen=True)
class ModelConfig:
    name: str
    image_size: int                 # native square input extent
    input_prep: str                 # "resize" | "pad" | "none"
    in_channels: int
    num_classes: int
    layers: tuple[LayerSpec, ...] = field(default_factory=tuple)


def _conv_out(extent: int, kernel: int, stride: int, pad: int,
              where: str) -> int:
    span = extent + 2 * pad - kernel
    if span < 0 or span % stride != 0:
        raise ConfigError(
            f"{where}: kernel {kernel} stride {stride} pad {pad} does not "
            f"tile an extent of {extent}")
    return span // stride + 1


def shape_trace(config: ModelConfig) -> list[tuple[str, tuple]]:
    """Propagate shapes through the layer program.

    Returns [(kind, output shape)] where conv shapes are (C, H, W) and
    post-flatten shapes are (features,).  Raises ConfigError on any layer
    whose input cannot feed it.
    """
    shape: tuple = (config.in_channels, config.image_size, config.image_size)
    trace = []
    for i, spec in enumerate(config.layers):
        where = f"{config.name} layer {i} ({spec.kind})"
        if spec.kind == "conv":
            if len(shape) != 3:
                raise ConfigError(f"{where}: needs a C,H,W input, got {shape}")
            c, h, w = shape
            ho = _conv_out(h, spec.kernel, spec.stride, spec.pad, where)
            wo = _conv_out(w, spec.kernel, spec.stride, spec.pad, where)
            shape = (spec.channels, ho, wo)
        elif spec.kind == "maxpool":
            if len(shape) != 3:
                raise ConfigError(f"{where}: needs a C,H,W input, got {shape}")
            c, h, w = shape
            stride = spec.stride or spec.kernel
            ho = _conv_out(h, spec.kernel, stride, 0, where)
            wo = _conv_out(w, spec.kernel, stride, 0, where)
            shape = (c, ho, wo)
        elif spec.kind == "residual-block":
            if len(shape) != 3 or shape[0] != spec.channels:
                raise ConfigError(
                    f"{where}: identity skip needs {spec.channels} input "
                    f"channels, got {shape}")
        elif spec.kind in ("relu", "dropout"):
            pass
        elif spec.kind == "local-response-norm":
            if len(shape) != 3:
                raise ConfigError(f"{where}: needs a C,H,W input, got {shape}")
        elif spec.kind == "global-avg-pool":
            if len(shape) != 3:
                raise ConfigError(f"{where}: needs a C,H,W input, got {shape}")
            shape = (shape[0],)
        elif spec.kind == "flatten":
            if len(shape) != 3:
                raise ConfigError(f"{where}: needs a C,H,W input, got {shape}")
            shape = (shape[0] * shape[1] * shape[2],)
        elif spec.kind == "linear":
            if len(shape) != 1:
                raise ConfigError(
                    f"{where}: needs a flat input, got {shape}")
            shape = (spec.units,)
        else:
            raise ConfigError(f"{where}: unknown layer kind {spec.kind!r}")
        trace.append((spec.kind, shape))
    if shape != (config.num_classes,):
        raise ConfigError(
            f"{config.name}: program ends at shape {shape}, expected "
            f"({config.num_classes},)")
    return trace


def _param_shapes(config: ModelConfig) -> "OrderedDict[str, tuple]":
    """Parameter names and shapes, in layer order.

    Linear weights are stored (in_features, out_features) so the forward
    pass is a plain x @ W.
    """
    shapes: "OrderedDict[str, tuple]" = OrderedDict()
    shape: tuple = (config.in_channels, config.image_size, config.image_size)
    for i, spec in enumerate(config.layers):
        prefix = f"layers.{i}"
        if spec.kind == "conv":
            c_in = shape[0]
            shapes[f"{prefix}.weight"] = (spec.channels, c_in, spec.kernel,
                                          spec.kernel)
            shapes[f"{prefix}.bias"] = (spec.channels,)
            h = _conv_out(shape[1], spec.kernel, spec.stride, spec.pad, "")
            w = _conv_out(shape[2], spec.kernel, spec.stride, spec.pad, "")
            shape = (spec.channels, h, w)
        elif spec.kind == "maxpool":
            stride = spec.stride or spec.kernel
            h = _conv_out(shape[1], spec.kernel, stride, 0, "")
            w = _conv_out(shape[2], spec.kernel, stride, 0, "")
            shape = (shape[0], h, w)
        elif spec.kind == "residual-block":
            c = spec.channels
            for sub in ("conv1", "conv2"):
                shapes[f"{prefix}.{sub}.weight"] = (c, c, 3, 3)
                shapes[f"{prefix}.{sub}.bias"] = (c,)
        elif spec.kind == "global-avg-pool":
            shape = (shape[0],)
        elif spec.kind == "flatten":
            shape = (shape[0] * shape[1] * shape[2],)
        elif spec.kind == "linear":
            shapes[f"{prefix}.weight"] = (shape[0], spec.units)
            shapes[f"{prefix}.bias"] = (spec.units,)
            shape = (spec.units,)
    return shapes


def _fan_in(shape: tuple) -> int:
    if len(shape) == 4:                 # conv OIHW
        return shape[1] * shape[2] * shape[3]
    return shape[0]                     # linear (in, out)


def bilinear_resize(batch: np.ndarray, out_size: int) -> np.ndarray:
    """Bilinear resize of an NCHW batch to out_size x out_size.

    Sample points follow the half-pixel-center convention, with edge
    clamping, so a constant image stays exactly constant.
    """
    n, c, h, w = batch.shape

    def axis_coords(in_extent: int) -> tuple[np.ndarray, np.ndarray,
                                             np.ndarray]:
        src = (np.arange(out_size) + 0.5) * (in_extent / out_size) - 0.5
        lo = np.clip(np.floor(src), 0, in_extent - 1).astype(np.int64)
        hi = np.minimum(lo + 1, in_extent - 1)
        frac = np.clip(src - lo, 0.0, 1.0)
        return lo, hi, frac

    r_lo, r_hi, r_f = axis_coords(h)
    c_lo, c_hi, c_f = axis_coords(w)
    top = (batch[:, :, r_lo][:, :, :, c_lo] * (1 - c_f) +
           batch[:, :, r_lo][:, :, :, c_hi] * c_f)
    bot = (batch[:, :, r_hi][:, :, :, c_lo] * (1 - c_f) +
           batch[:, :, r_hi][:, :, :, c_hi] * c_f)
    return top * (1 - r_f[:, None]) + bot * r_f[:, None]


def center_pad(batch: np.ndarray, out_size: int) -> np.ndarray:
    """Zero-pad an NCHW batch symmetrically up to out_size x out_size."""
    n, c, h, w = batch.shape
    if h > out_size or w > out_size:
        raise ShapeError(
            f"cannot pad {h}x{w} input down to {out_size}x{out_size}")
    top = (out_size - h) // 2
    left = (out_size - w) // 2
    return np.pad(batch, ((0, 0), (0, 0),
                          (top, out_size - h - top),
                          (left, out_size - w - left)))


class Model:
    """A built network: config, parameter tensors, and a forward program."""

    def __init__(self, config: ModelConfig, seed: int):
        shape_trace(config)             # validate before allocating anything
        self.config = config
        self.seed = int(seed)
        self.training = True
        init_rng = SplitMix64(derive_seed(seed, "init"))
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()
        for name, shape in _param_shapes(config).items():
            if name.endswith(".bias"):
                data = np.zeros(shape, dtype=np.float64)
            else:
                bound = np.sqrt(6.0 / _fan_in(shape))
                data = init_rng.fill_uniform(
                    int(np.prod(shape)), -bound, bound).reshape(shape)
            self.params[name] = Tensor(data, requires_grad=True, name=name)
        self._dropout_rng = SplitMix64(derive_seed(seed, "dropout"))

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def param_count(self) -> int:
        """Total number of trainable scalar parameters."""
        return sum(p.data.size for p in self.params.values())

    def train(self) -> "Model":
        self.training = True
        return self

    def eval(self) -> "Model":
        self.training = False
        return self

    def prepare_input(self, batch: np.ndarray) -> np.ndarray:
        """Validate an NCHW float batch and bring it to native geometry."""
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 4:
            raise ShapeError(
                f"{self.config.name} expects an NCHW batch, got shape "
                f"{batch.shape}")
        n, c, h, w = batch.shape
        if c != self.config.in_channels:
            raise ShapeError(
                f"{self.config.name} expects {self.config.in_channels} "
                f"input channels, got {c}")
        native = self.config.image_size
        if (h, w) == (native, native):
            return batch
        if self.config.input_prep == "resize":
            return bilinear_resize(batch, native)
        if self.config.input_prep == "pad":
            return center_pad(batch, native)
        raise ShapeError(
            f"{self.config.name} expects {native}x{native} inputs, got "
            f"{h}x{w}")

    def forward(self, batch: np.ndarray) -> Tensor:
        """Run the layer program; returns logits of shape (N, num_classes)."""
        t = Tensor(self.prepare_input(batch))
        for i, spec in enumerate(self.config.layers):
            prefix = f"layers.{i}"
            if spec.kind == "conv":
                t = ops.conv2d(t, self.params[f"{prefix}.weight"],
                               self.params[f"{prefix}.bias"],
                               stride=spec.stride, pad=spec.pad)
            elif spec.kind == "maxpool":
                t = ops.maxpool2d(t, spec.kernel, spec.stride or spec.kernel)
            elif spec.kind == "relu":
                t = ops.relu(t)
            elif spec.kind == "linear":
                t = ops.matmul(t, self.params[f"{prefix}.weight"])
                t = ops.add_bias(t, self.params[f"{prefix}.bias"])
            elif spec.kind == "flatten":
                t = ops.flatten(t)
            elif spec.kind == "dropout":
                t = ops.dropout(t, spec.rate, self._dropout_rng,
                                self.training)
            elif spec.kind == "local-response-norm":
                t = ops.local_response_norm(t, size=spec.size)
            elif spec.kind == "global-avg-pool":
                t = ops.global_avg_pool(t)
            elif spec.kind == "residual-block":
                y = ops.relu(ops.conv2d(
                    t, self.params[f"{prefix}.conv1.weight"],
                    self.params[f"{prefix}.conv1.bias"], stride=1, pad=1))
                y = ops.conv2d(
                    y, self.params[f"{prefix}.conv2.weight"],
                    self.params[f"{prefix}.conv2.bias"], stride=1, pad=1)
                t = ops.relu(ops.add(y, t))
        return t

    __call__ = forward


def alexnet_config(in_channels: int = 1, num_classes: int = 47,
                   lrn: bool = False) -> ModelConfig:
    layers: list[LayerSpec] = []

    def block(channels, kernel, stride, pad, pool):
        layers.append(LayerSpec("conv", channels=channels, kernel=kernel,
                                stride=stride, pad=pad))
        layers.append(LayerSpec("relu"))
        if lrn:
            layers.append(LayerSpec("local-response-norm", size=5))
        if pool:
            layers.append(LayerSpec("maxpool", kernel=3, stride=2))

    block(96, 11, 4, 0, pool=True)      # 227 -> 55 -> 27
    block(256, 5, 1, 2, pool=True)      # 27 -> 27 -> 13
    layers.append(LayerSpec("conv", channels=384, kernel=3, pad=1))
    layers.append(LayerSpec("relu"))
    layers.append(LayerSpec("conv", channels=384, kernel=3, pad=1))
    layers.append(LayerSpec("relu"))
    layers.append(LayerSpec("conv", channels=256, kernel=3, pad=1))
    layers.append(LayerSpec("relu"))
    layers.append(LayerSpec("maxpool", kernel=3, stride=2))   # 13 -> 6
    layers.append(LayerSpec("flatten"))                       # 9216
    layers.append(LayerSpec("dropout", rate=0.5))
    layers.append(LayerSpec("linear", units=4096))
    layers.append(LayerSpec("relu"))
    layers.append(LayerSpec("dropout", rate=0.5))
    layers.append(LayerSpec("linear", units=4096))
    layers.append(LayerSpec("relu"))
    layers.append(LayerSpec("linear", units=num_classes))
    return ModelConfig("alexnet", 227, "resize", in_channels, num_classes,
                       tuple(layers))


def _vgg_config(name: str, channels: Sequence[int], hidden: int,
                in_channels: int, num_classes: int,
                dropout_rate: float | None) -> ModelConfig:
    layers: list[LayerSpec] = []
    for c in channels:
        layers.append(LayerSpec("conv", channels=c, kernel=3, pad=1))
        layers.append(LayerSpec("relu"))
        layers.append(LayerSpec("maxpool", kernel=2, stride=2))
    layers.append(LayerSpec("flatten"))
    layers.append(LayerSpec("linear", units=hidden))
    layers.append(LayerSpec("relu"))
    if dropout_rate:
        layers.append(LayerSpec("dropout", rate=dropout_rate))
    layers.append(LayerSpec("linear", units=num_classes))
    return ModelConfig(name, 32, "pad", in_channels, num_classes,
                       tuple(layers))


def vgg_lite_config(in_channels: int = 1,
                    num_classes: int = 47) -> ModelConfig:
    return _vgg_config("vgg-lite", (16, 32, 64, 128, 128), 256,
                       in_channels, num_classes, 0.5)


def vgg_lite_tiny_config(in_channels: int = 1,
                         num_classes: int = 47) -> ModelConfig:
    return _vgg_config("vgg-lite-tiny", (8, 16, 32), 512,
                       in_channels, num_classes, None)


def resnet_lite_config(in_channels: int = 1,
                       num_classes: int = 47) -> ModelConfig:
    layers = (
        LayerSpec("conv", channels=64, kernel=7, stride=1, pad=3),
        LayerSpec("relu"),
        LayerSpec("maxpool", kernel=2, stride=2),     # 28 -> 14
        LayerSpec("residual-block", channels=64),
        LayerSpec("residual-block", channels=64),
        LayerSpec("global-avg-pool"),
        LayerSpec("linear", units=num_classes),
    )
    return ModelConfig("resnet-lite", 28, "none", in_channels, num_classes,
                       layers)


MODEL_NAMES = ("alexnet", "vgg-lite", "resnet-lite", "vgg-lite-tiny")

_BUILDERS = {
    "alexnet": alexnet_config,
    "vgg-lite": vgg_lite_config,
    "resnet-lite": resnet_lite_config,
    "vgg-lite-tiny": vgg_lite_tiny_config,
}


def build_model(name: str, seed: int, *, in_channels: int = 1,
                num_classes: int = 47, lrn: bool = False) -> Model:
    """Build a named model with parameters drawn deterministically from seed.

    Weights are Kaiming-uniform (bound sqrt(6 / fan_in)); biases start at
    zero.  `lrn` enables AlexNet's local response normalisation and is
    ignored by the other architectures.
    """
    builder = _BUILDERS.get(name)
    if builder is None:
        raise ConfigError(
            f"unknown model {name!r}; choose one of {', '.join(MODEL_NAMES)}")
    if name == "alexnet":
        config = builder(in_channels, num_classes, lrn)
    else:
        config = builder(in_channels, num_classes)
    return Model(config, seed)
