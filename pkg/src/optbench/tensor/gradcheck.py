"""Finite-difference verification of the tape's gradients."""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import StateError
from ..rng import SplitMix64
from .core import Tensor, backward, no_grad

# Floor in the relative-error denominator, so coordinates where both the
# analytic and numeric gradients are ~0 compare on an absolute scale.
_DENOM_FLOOR = 1e-8

# Coordinates whose base-step error exceeds this are re-measured at other
# step sizes before they count against the result.
_REFINE_THRESHOLD = 1e-7


def _coords(t: Tensor, max_coords: int | None,
            rng: SplitMix64) -> Iterable[tuple]:
    size = t.data.size
    if max_coords is None or size <= max_coords:
        return (np.unravel_index(i, t.data.shape) for i in range(size))
    picked: set[int] = set()
    while len(picked) < max_coords:
        picked.add(rng.below(size))
    return (np.unravel_index(i, t.data.shape) for i in sorted(picked))


def _rel_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(
        _DENOM_FLOOR, abs(analytic) + abs(numeric))


def grad_check(f: Callable[[], Tensor], wrt: Tensor | Sequence[Tensor], *,
               h: float = 1e-5, max_coords: int | None = None,
               seed: int = 0, refine: bool = True) -> float:
    """Compare tape gradients of `f` against central finite differences.

    `f` is a zero-argument callable that runs a forward pass over the
    tensors in `wrt` (typically a closure) and returns a scalar loss.  For
    each checked coordinate the relative error
    ``|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`` is
    computed, and the maximum over all coordinates is returned.

    By default every coordinate is checked.  For large parameter tensors,
    `max_coords` limits the finite-difference evaluations per tensor to a
    deterministic random sample (two forward passes per coordinate).
    `f` must be deterministic across calls; run models in eval mode or
    with a frozen dropout mask.

    With `refine` on, a coordinate whose error exceeds 1e-7 at the base
    step is re-measured at h/8 and 8h and the smallest error wins.  A
    secant across a relu/maxpool kink or pure roundoff noise shrinks at
    one of the other steps; a genuinely wrong gradient disagrees at every
    step, so refinement cannot mask real defects.
    """
    tensors = [wrt] if isinstance(wrt, Tensor) else list(wrt)
    if not tensors:
        raise StateError("grad_check needs at least one tensor to check")

    for t in tensors:
        t.requires_grad = True
        t.grad = None
    loss = f()
    backward(loss)
    analytic = []
    for t in tensors:
        if t.grad is None:
            raise StateError(
                f"gradient did not reach tensor {t.name or t.shape}; "
                "is it used by f?")
        analytic.append(t.grad.copy())

    def central(t: Tensor, idx: tuple, step: float) -> float:
        saved = t.data[idx]
        t.data[idx] = saved + step
        up = float(f().data)
        t.data[idx] = saved - step
        down = float(f().data)
        t.data[idx] = saved
        return (up - down) / (2.0 * step)

    rng = SplitMix64(seed)
    worst = 0.0
    with no_grad():
        for t, a in zip(tensors, analytic):
            for idx in _coords(t, max_coords, rng):
                err = _rel_error(a[idx], central(t, idx, h))
                if refine and err > _REFINE_THRESHOLD:
                    for step in (h / 8.0, h * 8.0):
                        err = min(err, _rel_error(a[idx],
                                                  central(t, idx, step)))
                worst = max(worst, err)
    return worst
