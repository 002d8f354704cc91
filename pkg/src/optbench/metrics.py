"""Evaluation metrics: micro-F1, accuracy, confusion counts, epoch loss.

For single-label multiclass predictions, micro-averaged F1 and plain
accuracy are the same number: every wrong prediction is one false positive
(for the predicted class) and one false negative (for the true class), so
tp + (fp + fn) / 2 = tp + (N - tp) = N and micro-F1 reduces to tp / N.
`micro_f1` computes it both ways and insists on exact equality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .tensor import no_grad, ops


@dataclass
class ConfusionCounts:
    """Per-class true-positive / false-positive / false-negative tallies."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    total: int

    @classmethod
    def from_predictions(cls, preds: np.ndarray, targets: np.ndarray,
                         num_classes: int) -> "ConfusionCounts":
        preds = np.asarray(preds)
        targets = np.asarray(targets)
        correct = preds == targets
        tp = np.bincount(targets[correct], minlength=num_classes)
        fp = np.bincount(preds[~correct], minlength=num_classes)
        fn = np.bincount(targets[~correct], minlength=num_classes)
        return cls(tp.astype(np.int64), fp.astype(np.int64),
                   fn.astype(np.int64), int(len(targets)))


def _check_pair(preds, targets) -> tuple[np.ndarray, np.ndarray]:
    preds = np.asarray(preds)
    targets = np.asarray(targets)
    if preds.shape != targets.shape or preds.ndim != 1:
        raise DataError(
            f"predictions and targets must be equal-length 1-d arrays, got "
            f"{preds.shape} vs {targets.shape}")
    if len(preds) == 0:
        raise DataError("metrics require at least one sample")
    return preds, targets


def accuracy(preds, targets) -> float:
    """Fraction of positions where preds == targets."""
    preds, targets = _check_pair(preds, targets)
    return float(np.count_nonzero(preds == targets) / len(preds))


def micro_f1(preds, targets, num_classes: int | None = None) -> float:
    """Micro-averaged F1 over class indices.

    Computed from the confusion counts and cross-checked against accuracy,
    which it must equal exactly in this single-label setting.
    """
    preds, targets = _check_pair(preds, targets)
    if num_classes is None:
        num_classes = int(max(preds.max(), targets.max())) + 1
    counts = ConfusionCounts.from_predictions(preds, targets, num_classes)
    tp = int(counts.tp.sum())
    fp = int(counts.fp.sum())
    fn = int(counts.fn.sum())
    f1 = tp / (tp + 0.5 * (fp + fn))
    acc = accuracy(preds, targets)
    if f1 != acc:
        raise AssertionError(
            f"micro-F1 {f1!r} diverged from accuracy {acc!r}; "
            "inputs are not single-label class indices")
    return f1


def epoch_eval(model, dataset, batch_size: int = 64) -> tuple[float, float]:
    """Mean cross-entropy loss and micro-F1 of `model` over `dataset`.

    Runs in evaluation mode (dropout off, no tape).  The loss is the
    sample-weighted mean, so batch size cannot bias it; predictions take
    the argmax of the logits with ties going to the lowest class index.
    """
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    was_training = model.training
    model.eval()
    loss_sum = 0.0
    preds = np.empty(len(dataset), dtype=np.int64)
    try:
        with no_grad():
            for start in range(0, len(dataset), batch_size):
                images = dataset.images[start:start + batch_size]
                labels = dataset.labels[start:start + batch_size]
                logits = model.forward(images)
                loss = ops.softmax_cross_entropy(logits, labels)
                loss_sum += float(loss.data) * len(labels)
                preds[start:start + len(labels)] = logits.data.argmax(axis=1)
    finally:
        if was_training:
            model.train()
    mean_loss = loss_sum / len(dataset)
    return mean_loss, micro_f1(preds, dataset.labels, dataset.num_classes)
