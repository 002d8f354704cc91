"""Built-in self check: gradient checks plus optimizer oracles.

`optbench selftest` runs this.  The optimizer oracle is a deliberately
independent straight-line transcription of each update rule on Python
scalars, kept separate from the vectorized implementations in `optim`, so
a transcription slip in either copy shows up as a mismatch.
"""

from __future__ import annotations

import math
import sys
from typing import Callable

import numpy as np

from .models import build_model
from .optim import SGDMomentum, Adam, AdaBelief, Padam
from .rng import SplitMix64
from .metrics import micro_f1, accuracy
from .tensor import Tensor, grad_check, ops

_TOL = 1e-5
_ORACLE_TOL = 1e-12


def _scalar_sgd(grads, lr, momentum, theta):
    m = 0.0
    out = []
    for g in grads:
        m = momentum * m + g
        theta = theta - lr * m
        out.append(theta)
    return out


def _scalar_adam(grads, lr, b1, b2, eps, theta):
    m = v = 0.0
    out = []
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)
        out.append(theta)
    return out


def _scalar_adabelief(grads, lr, b1, b2, eps, theta):
    m = s = 0.0
    out = []
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        s = b2 * s + (1 - b2) * (g - m) ** 2 + eps
        m_hat = m / (1 - b1 ** t)
        s_hat = s / (1 - b2 ** t)
        theta = theta - lr * m_hat / (math.sqrt(s_hat) + eps)
        out.append(theta)
    return out


def _scalar_padam(grads, lr, b1, b2, eps, p, theta):
    m = v = v_max = 0.0
    out = []
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        v_max = max(v_max, v_hat)
        # p = 0.5 is AMSGrad, whose rule is written with a square root.
        denom = math.sqrt(v_max) if p == 0.5 else v_max ** p
        theta = theta - lr * m_hat / (denom + eps)
        out.append(theta)
    return out


def _drive(optimizer_cls, kwargs, grads, theta0=1.0):
    """Run a vectorized optimizer on a single scalar parameter."""
    param = Tensor(np.array(theta0), requires_grad=True)
    opt = optimizer_cls([param], **kwargs)
    trajectory = []
    for g in grads:
        param.grad = np.asarray(g, dtype=np.float64)
        opt.step()
        trajectory.append(float(param.data))
    return trajectory


def _op_checks() -> list[tuple[str, Callable[[], float]]]:
    rng = np.random.default_rng(7)

    def rt(*shape):
        return Tensor(rng.normal(size=shape), requires_grad=True)

    a, b = rt(3, 4), rt(4, 5)
    x2, bias = rt(5, 7), rt(7)
    u, v = rt(4, 6), rt(4, 6)
    img = rt(2, 3, 8, 8)
    strided = rt(2, 2, 9, 9)
    pool_in = rt(2, 3, 6, 6)
    lrn_in = rt(2, 7, 4, 4)
    conv_w = rt(4, 3, 3, 3)
    conv_b = rt(4)
    sconv_w = rt(3, 2, 3, 3)
    logits = rt(6, 5)
    labels = np.array([0, 4, 2, 2, 1, 3])
    drop_in = rt(3, 20)

    def dropout_loss():
        # A frozen mask keeps f deterministic across grad_check's calls.
        return ops.sum_all(ops.mul(
            ops.dropout(drop_in, 0.3, SplitMix64(11), training=True),
            drop_in))

    return [
        ("matmul", lambda: ops.sum_all(ops.matmul(a, b))),
        ("add-bias", lambda: ops.sum_all(ops.add_bias(x2, bias))),
        ("add/mul", lambda: ops.sum_all(ops.mul(ops.add(u, v), u))),
        ("relu", lambda: ops.sum_all(ops.relu(u))),
        ("flatten", lambda: ops.sum_all(ops.mul(
            ops.flatten(img), ops.flatten(img)))),
        ("conv2d", lambda: ops.sum_all(ops.mul(
            c := ops.conv2d(img, conv_w, conv_b, stride=1, pad=1), c))),
        ("conv2d-strided", lambda: ops.sum_all(ops.mul(
            c := ops.conv2d(strided, sconv_w, stride=2, pad=1), c))),
        ("maxpool2d", lambda: ops.sum_all(ops.mul(
            m := ops.maxpool2d(pool_in, 2, 2), m))),
        ("global-avg-pool", lambda: ops.sum_all(ops.mul(
            g := ops.global_avg_pool(pool_in), g))),
        ("local-response-norm", lambda: ops.sum_all(ops.mul(
            n := ops.local_response_norm(lrn_in), n))),
        ("dropout", dropout_loss),
        ("softmax-ce", lambda: ops.softmax_cross_entropy(logits, labels)),
    ]


def run_selftest(out=sys.stdout) -> bool:
    """Run all checks, print one PASS/FAIL line each, return overall."""
    results: list[tuple[str, bool, str]] = []

    def check(name: str, ok: bool, detail: str = ""):
        results.append((name, ok, detail))
        status = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        print(f"{status}  {name}{suffix}", file=out)

    for name, loss_fn in _op_checks():
        params = _live_tensors(loss_fn)
        err = grad_check(loss_fn, params)
        check(f"grad {name}", err < _TOL, f"max rel err {err:.2e}")

    for model_name in ("vgg-lite-tiny", "resnet-lite"):
        model = build_model(model_name, seed=5, num_classes=5).eval()
        # Native-size random input: zero padding would fill pool windows
        # with exact ties, putting finite differences on argmax kinks.
        native = model.config.image_size
        x = np.random.default_rng(3).uniform(
            0, 1, size=(2, 1, native, native))
        y = np.array([1, 3])
        err = grad_check(lambda: ops.softmax_cross_entropy(
            model.forward(x), y), model.parameters(), max_coords=4)
        check(f"grad model {model_name}", err < _TOL,
              f"max rel err {err:.2e}")

    grad_rng = SplitMix64(99)
    grads = [grad_rng.uniform(-2.0, 2.0) for _ in range(100)]
    pairs = [
        ("sgd", _drive(SGDMomentum, dict(lr=0.01, momentum=0.9), grads),
         _scalar_sgd(grads, 0.01, 0.9, 1.0)),
        ("adam", _drive(Adam, dict(lr=0.01), grads),
         _scalar_adam(grads, 0.01, 0.9, 0.999, 1e-8, 1.0)),
        ("adabelief", _drive(AdaBelief, dict(lr=0.01), grads),
         _scalar_adabelief(grads, 0.01, 0.9, 0.999, 1e-8, 1.0)),
        ("padam", _drive(Padam, dict(lr=0.01, p=0.125), grads),
         _scalar_padam(grads, 0.01, 0.9, 0.999, 1e-8, 0.125, 1.0)),
    ]
    for name, got, want in pairs:
        worst = max(abs(g - w) for g, w in zip(got, want))
        check(f"optimizer oracle {name}", worst <= _ORACLE_TOL,
              f"max abs err {worst:.2e}")

    amsgrad = _scalar_padam(grads[:50], 0.01, 0.9, 0.999, 1e-8, 0.5, 1.0)
    padam_half = _drive(Padam, dict(lr=0.01, p=0.5), grads[:50])
    check("padam(0.5) == amsgrad bitwise",
          all(g == w for g, w in zip(padam_half, amsgrad)))

    rng = SplitMix64(123)
    n = 10_000
    preds = (rng.fill_u64(n) % np.uint64(47)).astype(np.int64)
    targets = (rng.fill_u64(n) % np.uint64(47)).astype(np.int64)
    check("micro-F1 == accuracy",
          micro_f1(preds, targets, 47) == accuracy(preds, targets))

    return all(ok for _, ok, _ in results)


def _live_tensors(loss_fn) -> list[Tensor]:
    """The grad-requiring tensors captured by a loss closure."""
    seen: list[Tensor] = []
    for cell in loss_fn.__closure__ or ():
        value = cell.cell_contents
        if isinstance(value, Tensor) and value.requires_grad:
            seen.append(value)
    return seen
