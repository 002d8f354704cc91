"""Shared fixtures and helpers: tiny deterministic datasets, IDX byte
builders, and a vectorized-optimizer driver used by several test modules."""

import gzip
import struct

import numpy as np
import pytest

from optbench.data import synthetic_blobs
from optbench.optim import HyperParams, make_optimizer
from optbench.tensor import Tensor


@pytest.fixture(scope="session")
def blobs_4x50():
    """4 classes x 50 samples, 28x28 — small enough for per-test training."""
    return synthetic_blobs(n_per_class=50, classes=4, image_size=28, seed=11)


@pytest.fixture(scope="session")
def blobs_3x12():
    """3 classes x 12 samples — for split/batch bookkeeping tests."""
    return synthetic_blobs(n_per_class=12, classes=3, image_size=28, seed=5)


def drive_scalar(name, theta0, grads, hp=None):
    """Feed an explicit scalar gradient stream to a vectorized optimizer and
    return the theta value after each step."""
    theta = Tensor(np.array([float(theta0)]), requires_grad=True)
    opt = make_optimizer(name, [theta], hp or HyperParams())
    out = []
    for g in grads:
        theta.grad = np.array([float(g)])
        opt.step()
        out.append(float(theta.data[0]))
    return out


def idx3_bytes(images):
    """Serialize a (N, H, W) uint8 array as an IDX3 image file."""
    n, h, w = images.shape
    return struct.pack(">IIII", 0x00000803, n, h, w) + images.astype(
        np.uint8).tobytes()


def idx1_bytes(labels):
    """Serialize a 1-d uint8 array as an IDX1 label file."""
    return struct.pack(">II", 0x00000801, len(labels)) + labels.astype(
        np.uint8).tobytes()


def write_idx_pair(directory, stem, images, labels, zipped=False):
    """Write a matching images/labels IDX file pair into `directory`."""
    suffix = ".gz" if zipped else ""
    wrap = gzip.compress if zipped else bytes
    (directory / f"{stem}-images-idx3-ubyte{suffix}").write_bytes(
        wrap(idx3_bytes(images)))
    (directory / f"{stem}-labels-idx1-ubyte{suffix}").write_bytes(
        wrap(idx1_bytes(labels)))
