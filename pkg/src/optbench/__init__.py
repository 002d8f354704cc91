"""optbench: a self-contained CPU benchmark of first-order optimizers.

Reverse-mode autodiff over float64 numpy arrays, four optimizers
(SGD+momentum, Adam, AdaBelief, Padam), three small CNNs, EMNIST/IDX and
synthetic data, micro-F1 metrics, and a training harness that records
per-epoch learning curves and renders best-score report tables.
"""

__version__ = "0.1.0"

from .tensor import Tensor, backward, grad_check, no_grad, ops  # noqa: E402
from .errors import (ConfigError, DataError, IdxFormatError,  # noqa: E402
                     NumericsError, OptbenchError, ShapeError, StateError,
                     TruncatedFileError)
from .rng import SplitMix64, derive_seed  # noqa: E402
from .optim import (Adam, AdaBelief, HyperParams, Optimizer,  # noqa: E402
                    Padam, SGDMomentum, clear_grads, make_optimizer)
from .models import (LayerSpec, Model, ModelConfig, MODEL_NAMES,  # noqa: E402
                     build_model, shape_trace)
from .checkpoint import (load_checkpoint, restore_model,  # noqa: E402
                         save_checkpoint)
from .data import (BatchPlan, Dataset, batches, load_data_dir,  # noqa: E402
                   read_idx, split_train_val, synthetic_blobs)
from .metrics import ConfusionCounts, accuracy, epoch_eval, micro_f1  # noqa: E402
from .harness import (RunConfig, RunRecord, best_score,  # noqa: E402
                      read_record, run_training)
from .report import report, write_curve_csv  # noqa: E402
from .estimator import CNNClassifier  # noqa: E402

__all__ = [
    "__version__",
    "Tensor", "backward", "grad_check", "no_grad", "ops",
    "OptbenchError", "ConfigError", "DataError", "IdxFormatError",
    "TruncatedFileError", "ShapeError", "StateError", "NumericsError",
    "SplitMix64", "derive_seed",
    "Optimizer", "SGDMomentum", "Adam", "AdaBelief", "Padam",
    "HyperParams", "make_optimizer", "clear_grads",
    "Model", "ModelConfig", "LayerSpec", "MODEL_NAMES", "build_model",
    "shape_trace",
    "save_checkpoint", "load_checkpoint", "restore_model",
    "Dataset", "BatchPlan", "read_idx", "load_data_dir", "split_train_val",
    "batches", "synthetic_blobs",
    "ConfusionCounts", "accuracy", "micro_f1", "epoch_eval",
    "RunConfig", "RunRecord", "run_training", "read_record", "best_score",
    "report", "write_curve_csv",
    "CNNClassifier",
]
