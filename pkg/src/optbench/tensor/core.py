"""Minimal reverse-mode autodiff over float64 numpy arrays.

Forward ops (see `ops`) allocate fresh output arrays and append a node to a
global tape; nothing is ever mutated in place after it enters the graph.
`backward` replays the nodes that the loss actually depends on, in strict
reverse order of creation, and accumulates gradients into the `.grad` array
of every leaf tensor with `requires_grad=True`.  Gradients add up across
backward calls until `clear` (or the optimizer's zero step) resets them:
calling backward twice on the same graph doubles every gradient exactly.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

from ..errors import StateError

# Monotone id source for tape nodes.  Creation order is execution order, so
# replaying nodes by descending id visits every consumer before its producer.
_NODE_COUNTER = itertools.count()

# When > 0 (inside `no_grad`), ops skip tape recording entirely.
_GRAD_DISABLED = 0


class no_grad:
    """Context manager that disables tape recording, for evaluation passes."""

    def __enter__(self):
        global _GRAD_DISABLED
        _GRAD_DISABLED = _GRAD_DISABLED + 1
        return self

    def __exit__(self, *exc):
        global _GRAD_DISABLED
        _GRAD_DISABLED = _GRAD_DISABLED - 1
        return False


def grad_enabled() -> bool:
    return _GRAD_DISABLED == 0


class TapeNode:
    """One recorded op: its inputs and a function mapping the output
    gradient to one gradient per input (None for inputs that need none)."""

    __slots__ = ("op", "inputs", "backward_fn", "seq", "output")

    def __init__(self, op: str, inputs: Sequence["Tensor"],
                 backward_fn: Callable[[np.ndarray], tuple]):
        self.op = op
        self.inputs = tuple(inputs)
        self.backward_fn = backward_fn
        self.seq = next(_NODE_COUNTER)
        self.output: "Tensor | None" = None


class Tensor:
    """A float64 array plus an optional gradient and tape link.

    Leaf tensors (parameters, inputs) have `node is None`; tensors produced
    by ops carry the node that created them.
    """

    __slots__ = ("data", "grad", "requires_grad", "node", "name")

    def __init__(self, data, requires_grad: bool = False,
                 name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.node: TapeNode | None = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def clear_grad(self) -> None:
        """Reset the accumulated gradient to zeros (idempotent)."""
        self.grad = np.zeros_like(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return (f"Tensor(shape={self.data.shape}, "
                f"requires_grad={self.requires_grad}{tag})")


def make_result(op: str, inputs: Sequence[Tensor], data: np.ndarray,
                backward_fn: Callable[[np.ndarray], tuple]) -> Tensor:
    """Wrap an op's output array, recording a tape node when any input
    needs gradients and recording is enabled."""
    out = Tensor(data)
    if grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        node = TapeNode(op, inputs, backward_fn)
        node.output = out
        out.node = node
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf's `.grad`.

    `loss` must be a scalar produced by a recorded forward pass.  Each call
    walks the graph once and adds into `.grad`, so repeated calls without
    clearing stack their contributions.
    """
    if loss.data.shape != ():
        raise StateError(
            f"backward requires a scalar loss, got shape {loss.data.shape}")
    if loss.node is None:
        raise StateError(
            "backward called on a tensor with no recorded forward pass")

    # Collect every node the loss depends on.
    nodes: dict[int, TapeNode] = {}
    stack = [loss.node]
    while stack:
        node = stack.pop()
        if node.seq in nodes:
            continue
        nodes[node.seq] = node
        for t in node.inputs:
            if t.node is not None:
                stack.append(t.node)

    # Pending output gradients, keyed by tensor identity.  Descending seq
    # order guarantees a node runs only after all of its consumers, so the
    # pending gradient is complete when the node is popped.
    pending: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
    for seq in sorted(nodes, reverse=True):
        node = nodes[seq]
        out_grad = pending.pop(id(node.output), None)
        if out_grad is None:
            continue
        input_grads = node.backward_fn(out_grad)
        for t, g in zip(node.inputs, input_grads):
            if g is None or not t.requires_grad:
                continue
            if t.node is None:
                t.accumulate_grad(g)
            else:
                key = id(t)
                if key in pending:
                    pending[key] = pending[key] + g
                else:
                    pending[key] = g
