"""scikit-learn estimator facade over the training stack.

`CNNClassifier` exposes the usual fit/predict/predict_proba/score surface
(and get_params/set_params via BaseEstimator) so the benchmark models plug
into sklearn pipelines and model-selection tools.  Internally it is the
same layers, optimizers, and batching the harness uses; it trains on the
full fit data without a validation split.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .data import BatchPlan, Dataset, batches
from .errors import DataError, StateError
from .metrics import micro_f1
from .models import build_model
from .optim import HyperParams, make_optimizer
from .tensor import backward, no_grad, ops
from .validation import ensure_image_batch, ensure_labels


class CNNClassifier(BaseEstimator, ClassifierMixin):
    """CNN image classifier with a scikit-learn interface.

    Parameters mirror `RunConfig`; `model` names one of the built-in
    architectures and `optimizer` one of the four update rules.  Labels
    may be arbitrary hashable integers/values; they are mapped to class
    indices internally and `classes_` preserves the sklearn convention.
    """

    def __init__(self, model: str = "vgg-lite-tiny", optimizer: str = "adam",
                 lr: float = 0.0005, momentum: float = 0.9,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 padam_p: float = 0.125, weight_decay: float = 0.0,
                 batch_size: int = 64, epochs: int = 10, seed: int = 0):
        self.model = model
        self.optimizer = optimizer
        self.lr = lr
        self.momentum = momentum
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.padam_p = padam_p
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y) -> "CNNClassifier":
        X = ensure_image_batch(X)
        y = ensure_labels(y, len(X))
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise DataError("need at least 2 classes to fit a classifier")
        pixel_max = X.max()
        scaled = X / pixel_max if pixel_max > 1.0 else X
        train = Dataset(np.clip(scaled, 0.0, 1.0), y_idx.astype(np.int64),
                        num_classes=len(self.classes_))

        self.model_ = build_model(self.model, self.seed,
                                  num_classes=len(self.classes_))
        hp = HyperParams(lr=self.lr, beta1=self.beta1, beta2=self.beta2,
                         eps=self.eps, momentum=self.momentum,
                         padam_p=self.padam_p,
                         weight_decay=self.weight_decay)
        optimizer = make_optimizer(self.optimizer, self.model_.parameters(),
                                   hp)
        self.model_.train()
        for epoch in range(1, self.epochs + 1):
            plan = BatchPlan(self.seed, self.batch_size, epoch, len(train))
            for images, labels in batches(train, plan):
                loss = ops.softmax_cross_entropy(
                    self.model_.forward(images), labels)
                backward(loss)
                optimizer.step()
                optimizer.zero_grad()
        self.model_.eval()
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def _logits(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise StateError("classifier is not fitted; call fit first")
        X = ensure_image_batch(X)
        chunks = []
        with no_grad():
            for start in range(0, len(X), self.batch_size):
                chunks.append(
                    self.model_.forward(X[start:start + self.batch_size])
                    .data)
        return np.concatenate(chunks, axis=0)

    def predict(self, X) -> np.ndarray:
        """Predicted class labels (argmax logits, lowest index on ties)."""
        logits = self._logits(X)
        return self.classes_[logits.argmax(axis=1)]

    def predict_proba(self, X) -> np.ndarray:
        """Class probabilities via row softmax over the logits."""
        return ops.softmax(self._logits(X))

    def score(self, X, y) -> float:
        """Micro-averaged F1 (equal to accuracy for single-label data)."""
        y = ensure_labels(y)
        preds = self.predict(X)
        index_of = {label: i for i, label in enumerate(self.classes_)}
        known = len(self.classes_)
        pred_idx = np.array([index_of[p] for p in preds], dtype=np.int64)
        true_idx = np.array([index_of.get(t, known) for t in y],
                            dtype=np.int64)
        return micro_f1(pred_idx, true_idx, known + 1)
