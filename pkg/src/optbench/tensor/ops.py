"""Forward ops with hand-derived backward closures.

Every op validates its operand shapes, computes the forward result into a
fresh array, and registers a closure that maps the output gradient to one
gradient per input.  Convolution and pooling require their geometry to tile
exactly: (extent + 2*pad - kernel) must be a nonnegative multiple of the
stride, otherwise the op raises ConfigError rather than silently cropping.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, DataError, ShapeError
from ..rng import SplitMix64
from .core import Tensor, make_result


def _require_2d(t: Tensor, op: str) -> None:
    if t.data.ndim != 2:
        raise ShapeError(f"{op} expects a 2-d tensor, got shape {t.shape}")


def _require_4d(t: Tensor, op: str) -> None:
    if t.data.ndim != 4:
        raise ShapeError(
            f"{op} expects an NCHW tensor, got shape {t.shape}")


def _out_extent(extent: int, kernel: int, stride: int, pad: int,
                op: str) -> int:
    """Output size along one axis; the window grid must tile exactly."""
    span = extent + 2 * pad - kernel
    if span < 0 or span % stride != 0:
        raise ConfigError(
            f"{op}: kernel {kernel} stride {stride} pad {pad} does not "
            f"tile an extent of {extent}")
    return span // stride + 1


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-d matrix product a @ b."""
    _require_2d(a, "matmul")
    _require_2d(b, "matmul")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions differ: {a.shape} vs {b.shape}")
    out = a.data @ b.data

    def backward_fn(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    return make_result("matmul", (a, b), out, backward_fn)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a 1-d bias to every row of a 2-d tensor."""
    _require_2d(x, "add_bias")
    if b.data.ndim != 1 or b.shape[0] != x.shape[1]:
        raise ShapeError(
            f"add_bias: bias shape {b.shape} does not match rows of "
            f"{x.shape}")
    out = x.data + b.data

    def backward_fn(g):
        gb = g.sum(axis=0) if b.requires_grad else None
        return g, gb

    return make_result("add-bias", (x, b), out, backward_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes differ: {a.shape} vs {b.shape}")

    def backward_fn(g):
        return g, g

    return make_result("add", (a, b), a.data + b.data, backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of two same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes differ: {a.shape} vs {b.shape}")

    def backward_fn(g):
        ga = g * b.data if a.requires_grad else None
        gb = g * a.data if b.requires_grad else None
        return ga, gb

    return make_result("mul", (a, b), a.data * b.data, backward_fn)


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a Python scalar."""
    c = float(c)

    def backward_fn(g):
        return (g * c,)

    return make_result("scale", (x,), x.data * c, backward_fn)


def sum_all(x: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    shape = x.data.shape

    def backward_fn(g):
        return (np.full(shape, g, dtype=np.float64),)

    return make_result("sum", (x,), x.data.sum(), backward_fn)


def relu(x: Tensor) -> Tensor:
    """max(x, 0); the gradient is passed only where x was positive."""
    mask = x.data > 0

    def backward_fn(g):
        return (g * mask,)

    return make_result("relu", (x,), np.where(mask, x.data, 0.0), backward_fn)


def flatten(x: Tensor) -> Tensor:
    """Collapse all axes after the first into one."""
    if x.data.ndim < 2:
        raise ShapeError(f"flatten expects 2+ axes, got shape {x.shape}")
    in_shape = x.data.shape
    out = x.data.reshape(in_shape[0], -1).copy()

    def backward_fn(g):
        return (g.reshape(in_shape),)

    return make_result("flatten", (x,), out, backward_fn)


def _conv_cols(xd: np.ndarray, kh: int, kw: int, stride: int,
               pad: int) -> np.ndarray:
    """im2col: one row of unrolled receptive-field values per output pixel."""
    if pad:
        xd = np.pad(xd, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xd, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]            # N, C, Ho, Wo, kh, kw
    n, c, ho, wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    return np.ascontiguousarray(cols)


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, *,
           stride: int = 1, pad: int = 0) -> Tensor:
    """2-d cross-correlation of an NCHW batch with OIHW filters.

    Forward runs as im2col plus one GEMM.  The backward pass recomputes the
    column matrix instead of keeping it alive, trading a second unroll for
    not holding an N*Ho*Wo x C*kh*kw buffer per layer through the whole
    graph.
    """
    _require_4d(x, "conv2d")
    if w.data.ndim != 4:
        raise ShapeError(f"conv2d filters must be OIHW, got {w.shape}")
    n, c_in, h, wid = x.shape
    c_out, c_in_w, kh, kw = w.shape
    if c_in != c_in_w:
        raise ShapeError(
            f"conv2d: input has {c_in} channels but filters expect {c_in_w}")
    if b is not None and b.shape != (c_out,):
        raise ShapeError(
            f"conv2d: bias shape {b.shape} does not match {c_out} filters")
    h_out = _out_extent(h, kh, stride, pad, "conv2d")
    w_out = _out_extent(wid, kw, stride, pad, "conv2d")

    cols = _conv_cols(x.data, kh, kw, stride, pad)
    w_mat = w.data.reshape(c_out, -1)
    out = cols @ w_mat.T
    if b is not None:
        out += b.data
    out = out.reshape(n, h_out, w_out, c_out).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)

    inputs = (x, w) if b is None else (x, w, b)

    def backward_fn(g):
        g_mat = np.ascontiguousarray(
            g.transpose(0, 2, 3, 1).reshape(n * h_out * w_out, c_out))
        gw = gx = gb = None
        if w.requires_grad:
            cols_again = _conv_cols(x.data, kh, kw, stride, pad)
            gw = (g_mat.T @ cols_again).reshape(w.shape)
        if b is not None and b.requires_grad:
            gb = g_mat.sum(axis=0)
        if x.requires_grad:
            d_cols = g_mat @ w_mat
            d_win = d_cols.reshape(n, h_out, w_out, c_in, kh, kw)
            d_win = d_win.transpose(0, 3, 1, 2, 4, 5)
            gx_pad = np.zeros(
                (n, c_in, h + 2 * pad, wid + 2 * pad), dtype=np.float64)
            for i in range(kh):
                for j in range(kw):
                    gx_pad[:, :, i:i + stride * h_out:stride,
                           j:j + stride * w_out:stride] += d_win[..., i, j]
            gx = gx_pad if pad == 0 else gx_pad[:, :, pad:pad + h,
                                                pad:pad + wid]
        if b is None:
            return gx, gw
        return gx, gw, gb

    return make_result("conv2d", inputs, out, backward_fn)


def maxpool2d(x: Tensor, kernel: int, stride: int | None = None) -> Tensor:
    """Max over kernel x kernel windows; ties keep the first element in
    row-major window order, and only that element receives gradient."""
    _require_4d(x, "maxpool2d")
    stride = kernel if stride is None else stride
    n, c, h, wid = x.shape
    h_out = _out_extent(h, kernel, stride, 0, "maxpool2d")
    w_out = _out_extent(wid, kernel, stride, 0, "maxpool2d")

    win = sliding_window_view(x.data, (kernel, kernel), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    flat = win.reshape(n, c, h_out, w_out, kernel * kernel)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    out = np.ascontiguousarray(out)

    def backward_fn(g):
        rows = np.arange(h_out, dtype=np.int64)[:, None] * stride
        cols = np.arange(w_out, dtype=np.int64)[None, :] * stride
        src_r = rows[None, None] + arg // kernel
        src_c = cols[None, None] + arg % kernel
        gx = np.zeros_like(x.data)
        n_idx = np.arange(n)[:, None, None, None]
        c_idx = np.arange(c)[None, :, None, None]
        np.add.at(gx, (n_idx, c_idx, src_r, src_c), g)
        return (gx,)

    return make_result("maxpool2d", (x,), out, backward_fn)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the two spatial axes: NCHW -> NC."""
    _require_4d(x, "global_avg_pool")
    n, c, h, wid = x.shape
    area = h * wid

    def backward_fn(g):
        return (np.broadcast_to(
            g[:, :, None, None] / area, (n, c, h, wid)).copy(),)

    return make_result("global-avg-pool", (x,), x.data.mean(axis=(2, 3)),
                       backward_fn)


def dropout(x: Tensor, rate: float, rng: SplitMix64,
            training: bool) -> Tensor:
    """Inverted dropout: zero each element with probability `rate` and
    scale survivors by 1/(1-rate).  Identity when evaluating or rate=0.

    The mask is drawn from `rng`, so the caller controls determinism.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = rng.fill_uniform(x.data.size).reshape(x.data.shape) >= rate
    factor = 1.0 / (1.0 - rate)
    mask = keep * factor

    def backward_fn(g):
        return (g * mask,)

    return make_result("dropout", (x,), x.data * mask, backward_fn)


def _channel_box_sum(v: np.ndarray, half: int) -> np.ndarray:
    """Sum of v over a clipped window of +-half neighbours along axis 1."""
    c = v.shape[1]
    csum = np.cumsum(v, axis=1)
    csum = np.concatenate([np.zeros_like(csum[:, :1]), csum], axis=1)
    hi = np.minimum(np.arange(c) + half + 1, c)
    lo = np.maximum(np.arange(c) - half, 0)
    return csum[:, hi] - csum[:, lo]


def local_response_norm(x: Tensor, size: int = 5, alpha: float = 1e-4,
                        beta: float = 0.75, k: float = 2.0) -> Tensor:
    """Cross-channel local response normalisation:
    y_c = x_c * (k + alpha/size * sum_{|j-c|<=size//2} x_j^2) ** -beta.
    """
    _require_4d(x, "local_response_norm")
    if size < 1:
        raise ConfigError(f"local_response_norm size must be >= 1: {size}")
    half = size // 2
    denom_base = k + (alpha / size) * _channel_box_sum(x.data ** 2, half)
    out = x.data * denom_base ** (-beta)

    def backward_fn(g):
        inner = g * x.data * denom_base ** (-beta - 1.0)
        gx = g * denom_base ** (-beta)
        gx -= (2.0 * alpha * beta / size) * x.data * _channel_box_sum(
            inner, half)
        return (gx,)

    return make_result("local-response-norm", (x,), out, backward_fn)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy between row-softmax of `logits` and int labels.

    Computed through a shifted log-sum-exp, so large logits do not
    overflow.  Labels must be integers in [0, num_classes).
    """
    _require_2d(logits, "softmax_cross_entropy")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise ShapeError(
            f"labels shape {labels.shape} does not match logits "
            f"{logits.shape}")
    if labels.shape[0] == 0:
        raise DataError("softmax_cross_entropy requires at least one row")
    if not np.issubdtype(labels.dtype, np.integer):
        raise DataError(f"labels must be integers, got dtype {labels.dtype}")
    n, c = logits.shape
    bad = (labels < 0) | (labels >= c)
    if bad.any():
        i = int(np.argmax(bad))
        raise DataError(
            f"label {int(labels[i])} at index {i} outside [0, {c})")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    loss = -logp[np.arange(n), labels].mean()
    probs = np.exp(logp)

    def backward_fn(g):
        gl = probs.copy()
        gl[np.arange(n), labels] -= 1.0
        gl *= g / n
        return (gl,)

    return make_result("softmax-ce", (logits,),
                       np.asarray(loss, dtype=np.float64), backward_fn)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a plain 2-d array (no autodiff)."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
