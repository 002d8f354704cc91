"""Training harness: configuration, the training loop, and run records.

A run writes a JSONL file: one header object (config snapshot, code
version, fairness hashes) followed by one object per epoch, appended and
flushed before the next epoch starts.  Numbers are serialized with
Python's shortest-round-trip float repr, so every f64 survives write ->
read bit-exactly.  A process killed mid-epoch leaves a readable record
with every completed epoch intact.

Seed fan-out: the run seed never feeds any consumer directly; named
sub-seeds (weight init, train/val split, per-epoch shuffle, dropout,
synthetic data) are derived from it by `rng.derive_seed`.  Optimizer
choice therefore cannot perturb initialization or data order, which is
what makes cross-optimizer comparisons fair; the header records hashes of
the initial parameters and the epoch-1 batch order so fairness can be
asserted after the fact.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .data import (BatchPlan, Dataset, batches, load_data_dir,
                   split_train_val, synthetic_blobs)
from .errors import ConfigError, DataError, NumericsError
from .metrics import epoch_eval
from .models import MODEL_NAMES, Model, build_model
from .optim import OPTIMIZER_NAMES, HyperParams, Optimizer, make_optimizer
from .rng import derive_seed
from .tensor import backward, ops


@dataclass
class RunConfig:
    """Everything that defines one training run."""

    model: str = "vgg-lite"
    optimizer: str = "adam"
    lr: float = 0.0005
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    padam_p: float = 0.125
    weight_decay: float = 0.0
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    data: str = "synthetic"            # directory of IDX files or "synthetic"
    out_dir: str = "runs"
    val_fraction: float = 1.0 / 6.0
    synthetic_classes: int = 10
    synthetic_train_per_class: int = 200
    synthetic_test_per_class: int = 50
    image_size: int = 28
    lrn: bool = False

    def validate(self) -> None:
        if self.model not in MODEL_NAMES:
            raise ConfigError(
                f"unknown model {self.model!r}; choose one of "
                f"{', '.join(MODEL_NAMES)}")
        if self.optimizer not in OPTIMIZER_NAMES:
            raise ConfigError(
                f"unknown optimizer {self.optimizer!r}; choose one of "
                f"{', '.join(OPTIMIZER_NAMES)}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1: {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0: {self.epochs}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must fit in u64: {self.seed}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError(
                f"val fraction must be in (0, 1): {self.val_fraction}")
        # Optimizer/model numeric ranges are validated by their builders.

    def hyper_params(self) -> HyperParams:
        return HyperParams(lr=self.lr, beta1=self.beta1, beta2=self.beta2,
                           eps=self.eps, momentum=self.momentum,
                           padam_p=self.padam_p,
                           weight_decay=self.weight_decay)


@dataclass
class RunRecord:
    """A parsed run file: one header dict plus one dict per epoch row."""

    header: dict
    rows: list[dict] = field(default_factory=list)

    def metric_rows(self) -> list[dict]:
        """Rows without wall-clock timing, for value-level comparisons."""
        return [{k: v for k, v in row.items() if k != "wall_seconds"}
                for row in self.rows]


ROW_METRICS = ("train_loss", "val_loss", "val_f1", "test_loss", "test_f1")


def _sha256_arrays(arrays: Sequence[np.ndarray]) -> str:
    digest = hashlib.sha256()
    for a in arrays:
        digest.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return digest.hexdigest()


def hash_params(model: Model) -> str:
    """SHA-256 over all parameter tensors, in declaration order."""
    return _sha256_arrays([p.data for p in model.parameters()])


def hash_order(order: np.ndarray) -> str:
    return hashlib.sha256(
        np.ascontiguousarray(order, dtype="<i8").tobytes()).hexdigest()


def load_run_datasets(
        cfg: RunConfig) -> tuple[Dataset, Dataset, Dataset | None]:
    """Resolve the config's data source into (train, val, test)."""
    if cfg.data == "synthetic":
        pool = synthetic_blobs(cfg.synthetic_train_per_class,
                               cfg.synthetic_classes, cfg.image_size,
                               derive_seed(cfg.seed, "synthetic-train"))
        test = synthetic_blobs(cfg.synthetic_test_per_class,
                               cfg.synthetic_classes, cfg.image_size,
                               derive_seed(cfg.seed, "synthetic-test"))
    else:
        pool, test = load_data_dir(cfg.data)
    train, val = split_train_val(pool, cfg.val_fraction, cfg.seed)
    if len(train) == 0 or len(val) == 0:
        raise DataError(
            f"split left train={len(train)}, val={len(val)} samples; "
            "provide more data or adjust the val fraction")
    return train, val, test


def default_run_path(cfg: RunConfig) -> Path:
    return Path(cfg.out_dir) / (
        f"{cfg.model}_{cfg.optimizer}_seed{cfg.seed}.jsonl")


def _json_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def run_training(cfg: RunConfig, run_path: str | Path | None = None,
                 return_state: bool = False):
    """Execute one full training run and stream its record to disk.

    Per epoch: shuffle via the epoch's derived seed, then for each batch
    forward -> cross-entropy -> backward -> optimizer step -> clear
    gradients; afterwards evaluate on the validation set (and test set when
    present) and append the epoch row.  A non-finite training loss aborts
    with a NumericsError naming the epoch and batch.

    Returns the RunRecord; with `return_state=True` returns
    (record, model, optimizer) so callers can inspect final state.
    """
    cfg.validate()
    train, val, test = load_run_datasets(cfg)
    num_classes = train.num_classes
    model = build_model(cfg.model, cfg.seed, num_classes=num_classes,
                        lrn=cfg.lrn)
    optimizer = make_optimizer(cfg.optimizer, model.parameters(),
                               cfg.hyper_params())

    epoch1_plan = BatchPlan(cfg.seed, cfg.batch_size, 1, len(train))
    header = {
        "kind": "header",
        "config": asdict(cfg),
        "code_version": __version__,
        "started": datetime.now(timezone.utc).isoformat(),
        "n_train": len(train),
        "n_val": len(val),
        "n_test": len(test) if test is not None else 0,
        "num_classes": num_classes,
        "param_count": model.param_count(),
        "init_params_sha256": hash_params(model),
        "epoch1_order_sha256": hash_order(epoch1_plan.order),
    }
    record = RunRecord(header=header)

    run_path = Path(run_path) if run_path else default_run_path(cfg)
    run_path.parent.mkdir(parents=True, exist_ok=True)
    with open(run_path, "w", encoding="utf-8") as sink:
        sink.write(_json_line(header) + "\n")
        sink.flush()
        for epoch in range(1, cfg.epochs + 1):
            t0 = time.monotonic()
            plan = BatchPlan(cfg.seed, cfg.batch_size, epoch, len(train))
            model.train()
            loss_sum = 0.0
            for b, (images, labels) in enumerate(batches(train, plan), 1):
                logits = model.forward(images)
                loss = ops.softmax_cross_entropy(logits, labels)
                loss_value = float(loss.data)
                if not np.isfinite(loss_value):
                    raise NumericsError(
                        f"training loss became {loss_value}",
                        epoch=epoch, batch=b)
                backward(loss)
                optimizer.step()
                optimizer.zero_grad()
                loss_sum += loss_value * len(labels)
            train_loss = loss_sum / len(train)
            val_loss, val_f1 = epoch_eval(model, val, cfg.batch_size)
            if test is not None and len(test):
                test_loss, test_f1 = epoch_eval(model, test, cfg.batch_size)
            else:
                test_loss = test_f1 = None
            row = {
                "kind": "epoch",
                "epoch": epoch,
                "train_loss": train_loss,
                "val_loss": val_loss,
                "val_f1": val_f1,
                "test_loss": test_loss,
                "test_f1": test_f1,
                "wall_seconds": time.monotonic() - t0,
            }
            record.rows.append(row)
            sink.write(_json_line(row) + "\n")
            sink.flush()

    if return_state:
        return record, model, optimizer
    return record


def read_record(path: str | Path) -> RunRecord:
    """Parse a run file.

    The final line may be a torn partial write from a killed run and is
    dropped silently if it does not parse; a malformed line anywhere else
    is an error naming the file and line number.  Validates the header,
    that epochs run 1..E in order, and that recorded metrics are finite.
    """
    path = Path(path)
    try:
        raw_lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as err:
        raise DataError(f"cannot read run file {path}: {err}") from err
    parsed: list[dict] = []
    for lineno, line in enumerate(raw_lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            if lineno == len(raw_lines):
                break                   # torn final line from a crashed run
            raise DataError(
                f"{path}:{lineno}: malformed run record line: {err}") from err
        if not isinstance(obj, dict):
            raise DataError(f"{path}:{lineno}: expected a JSON object")
        parsed.append(obj)
    if not parsed or parsed[0].get("kind") != "header":
        raise DataError(f"{path}: first line must be the run header")
    header, rows = parsed[0], parsed[1:]
    for i, row in enumerate(rows):
        lineno = i + 2
        if row.get("kind") != "epoch":
            raise DataError(f"{path}:{lineno}: expected an epoch row")
        if row.get("epoch") != i + 1:
            raise DataError(
                f"{path}:{lineno}: epoch {row.get('epoch')} out of order, "
                f"expected {i + 1}")
        for key in ROW_METRICS:
            value = row.get(key)
            if value is not None and not np.isfinite(value):
                raise DataError(
                    f"{path}:{lineno}: non-finite {key}: {value}")
    return RunRecord(header=header, rows=rows)


def best_score(record: RunRecord, metric_field: str = "test_f1",
               ) -> tuple[float, int]:
    """Best value of `metric_field` across epochs and the earliest epoch
    achieving it."""
    if not record.rows:
        raise DataError("record has no epoch rows")
    best_value: float | None = None
    best_epoch = 0
    for row in record.rows:
        value = row.get(metric_field)
        if value is None:
            continue
        if best_value is None or value > best_value:
            best_value = float(value)
            best_epoch = int(row["epoch"])
    if best_value is None:
        raise DataError(f"no values recorded for metric {metric_field!r}")
    return best_value, best_epoch
