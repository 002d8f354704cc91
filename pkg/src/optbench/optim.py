"""First-order optimizers over the autodiff tensors.

All four optimizers share the same contract: construct with a list of
parameter tensors, call `step()` once per batch after `backward`, call
`zero_grad()` to reset accumulated gradients.  `step()` reads `p.grad` and
updates `p.data` in place; parameters are tape leaves, so this never
touches a recorded graph.

Weight decay is decoupled from the gradient (applied directly to the
parameter before the gradient-based update, as in AdamW) and defaults to
off for every optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, StateError
from .tensor import Tensor


@dataclass
class HyperParams:
    """Hyperparameters shared across the optimizer family; each optimizer
    reads only the fields it uses."""

    lr: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.9
    padam_p: float = 0.125
    weight_decay: float = 0.0


def _check_beta(name: str, value: float) -> float:
    if not 0.0 <= value < 1.0:
        raise ConfigError(f"{name} must be in [0, 1), got {value}")
    return float(value)


class Optimizer:
    """Base class: owns the parameter list, step counter, and weight decay."""

    def __init__(self, params: Sequence[Tensor], lr: float,
                 weight_decay: float = 0.0):
        self.params = list(params)
        if not self.params:
            raise ConfigError("optimizer needs at least one parameter")
        if not lr > 0.0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        if weight_decay < 0.0:
            raise ConfigError(
                f"weight decay must be nonnegative, got {weight_decay}")
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.t = 0

    def zero_grad(self) -> None:
        """Reset every parameter's accumulated gradient to zeros."""
        for p in self.params:
            p.clear_grad()

    def step(self) -> None:
        """Apply one update from the gradients currently on the parameters."""
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                raise StateError(
                    f"parameter {p.name or i} has no gradient; run backward "
                    "before step")
            if g.shape != p.data.shape:
                raise StateError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"shape {p.data.shape}")
            if self.weight_decay:
                p.data -= self.lr * self.weight_decay * p.data
            self._update(i, p, g)

    def _update(self, i: int, p: Tensor, g: np.ndarray) -> None:
        raise NotImplementedError


class SGDMomentum(Optimizer):
    """Stochastic gradient descent with heavy-ball momentum.

    m <- momentum * m + g
    theta <- theta - lr * m

    Plain SGD is the momentum = 0 case.  No dampening, no Nesterov
    lookahead: the gradient enters the buffer at full weight.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 0.0005,
                 momentum: float = 0.9, weight_decay: float = 0.0):
        super().__init__(params, lr, weight_decay)
        if not 0.0 <= momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {momentum}")
        self.momentum = float(momentum)
        self.m = [np.zeros_like(p.data) for p in self.params]

    def _update(self, i: int, p: Tensor, g: np.ndarray) -> None:
        m = self.m[i]
        m *= self.momentum
        m += g
        p.data -= self.lr * m


class Adam(Optimizer):
    """Adam (Kingma & Ba, 2015) with bias-corrected moments.

    m <- beta1 * m + (1 - beta1) * g
    v <- beta2 * v + (1 - beta2) * g**2
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)

    where x_hat = x / (1 - beta**t) and t counts completed steps.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 0.0005,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        super().__init__(params, lr, weight_decay)
        self.beta1 = _check_beta("beta1", beta1)
        self.beta2 = _check_beta("beta2", beta2)
        if not eps > 0.0:
            raise ConfigError(f"eps must be positive, got {eps}")
        self.eps = float(eps)
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def _moments(self, i: int, g: np.ndarray) -> None:
        m, v = self.m[i], self.v[i]
        m *= self.beta1
        m += (1.0 - self.beta1) * g
        v *= self.beta2
        v += (1.0 - self.beta2) * g * g

    def _update(self, i: int, p: Tensor, g: np.ndarray) -> None:
        self._moments(i, g)
        m_hat = self.m[i] / (1.0 - self.beta1 ** self.t)
        v_hat = self.v[i] / (1.0 - self.beta2 ** self.t)
        p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class AdaBelief(Optimizer):
    """AdaBelief (Zhuang et al., 2020): Adam with the second moment taken
    over the deviation of the gradient from its running mean.

    m <- beta1 * m + (1 - beta1) * g
    s <- beta2 * s + (1 - beta2) * (g - m)**2 + eps
    theta <- theta - lr * m_hat / (sqrt(s_hat) + eps)

    The deviation uses the just-updated m, and eps is added into s on
    every step, both as in the reference implementation.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 0.0005,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        super().__init__(params, lr, weight_decay)
        self.beta1 = _check_beta("beta1", beta1)
        self.beta2 = _check_beta("beta2", beta2)
        if not eps > 0.0:
            raise ConfigError(f"eps must be positive, got {eps}")
        self.eps = float(eps)
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.s = [np.zeros_like(p.data) for p in self.params]

    def _update(self, i: int, p: Tensor, g: np.ndarray) -> None:
        m, s = self.m[i], self.s[i]
        m *= self.beta1
        m += (1.0 - self.beta1) * g
        diff = g - m
        s *= self.beta2
        s += (1.0 - self.beta2) * diff * diff + self.eps
        m_hat = m / (1.0 - self.beta1 ** self.t)
        s_hat = s / (1.0 - self.beta2 ** self.t)
        p.data -= self.lr * m_hat / (np.sqrt(s_hat) + self.eps)


class Padam(Optimizer):
    """Partially adaptive momentum estimation (Chen & Gu, 2018).

    Keeps Adam's moments plus AMSGrad's running maximum of the corrected
    second moment, but raises the denominator to a partial power p:

    v_max <- max(v_max, v_hat)
    theta <- theta - lr * m_hat / (v_max**p + eps)

    p is restricted to (0, 0.5]: p = 0.5 is exactly AMSGrad, and smaller p
    interpolates toward sign-agnostic SGD-like steps.  At p = 0.5 the
    denominator uses sqrt rather than pow, because pow(x, 0.5) differs
    from the correctly rounded sqrt(x) in the last bit for some inputs and
    the AMSGrad equivalence is meant to hold bit-for-bit.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 0.0005,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 p: float = 0.125, weight_decay: float = 0.0):
        super().__init__(params, lr, weight_decay)
        self.beta1 = _check_beta("beta1", beta1)
        self.beta2 = _check_beta("beta2", beta2)
        if not eps > 0.0:
            raise ConfigError(f"eps must be positive, got {eps}")
        if not 0.0 < p <= 0.5:
            raise ConfigError(f"padam power must be in (0, 0.5], got {p}")
        self.eps = float(eps)
        self.p = float(p)
        self.m = [np.zeros_like(t.data) for t in self.params]
        self.v = [np.zeros_like(t.data) for t in self.params]
        self.v_max = [np.zeros_like(t.data) for t in self.params]

    def _update(self, i: int, p: Tensor, g: np.ndarray) -> None:
        m, v, v_max = self.m[i], self.v[i], self.v_max[i]
        m *= self.beta1
        m += (1.0 - self.beta1) * g
        v *= self.beta2
        v += (1.0 - self.beta2) * g * g
        m_hat = m / (1.0 - self.beta1 ** self.t)
        v_hat = v / (1.0 - self.beta2 ** self.t)
        np.maximum(v_max, v_hat, out=v_max)
        if self.p == 0.5:
            denom = np.sqrt(v_max) + self.eps
        else:
            denom = np.power(v_max, self.p) + self.eps
        p.data -= self.lr * m_hat / denom


OPTIMIZER_NAMES = ("sgd", "adam", "adabelief", "padam")


def make_optimizer(name: str, params: Sequence[Tensor],
                   hp: HyperParams | None = None) -> Optimizer:
    """Build an optimizer by its lowercase name token."""
    hp = hp or HyperParams()
    if name == "sgd":
        return SGDMomentum(params, lr=hp.lr, momentum=hp.momentum,
                           weight_decay=hp.weight_decay)
    if name == "adam":
        return Adam(params, lr=hp.lr, beta1=hp.beta1, beta2=hp.beta2,
                    eps=hp.eps, weight_decay=hp.weight_decay)
    if name == "adabelief":
        return AdaBelief(params, lr=hp.lr, beta1=hp.beta1, beta2=hp.beta2,
                         eps=hp.eps, weight_decay=hp.weight_decay)
    if name == "padam":
        return Padam(params, lr=hp.lr, beta1=hp.beta1, beta2=hp.beta2,
                     eps=hp.eps, p=hp.padam_p, weight_decay=hp.weight_decay)
    raise ConfigError(
        f"unknown optimizer {name!r}; choose one of "
        f"{', '.join(OPTIMIZER_NAMES)}")


def clear_grads(params: Sequence[Tensor]) -> None:
    """Zero the gradients of every tensor in `params` (idempotent)."""
    for p in params:
        p.clear_grad()
