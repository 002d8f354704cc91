"""scikit-learn facade: params, fitting, prediction, and input checks."""

import numpy as np
import pytest
from sklearn.base import clone

from optbench.errors import DataError, ShapeError, StateError
from optbench.estimator import CNNClassifier
from optbench.validation import ensure_image_batch, ensure_labels


@pytest.fixture(scope="module")
def fitted(blobs_3x12):
    clf = CNNClassifier(epochs=2, lr=0.002, batch_size=12, seed=0)
    return clf.fit(blobs_3x12.images, blobs_3x12.labels)


def test_get_params_exposes_constructor_args():
    params = CNNClassifier().get_params()
    assert params["model"] == "vgg-lite-tiny"
    assert params["optimizer"] == "adam"
    assert params["lr"] == 0.0005
    assert params["epochs"] == 10


def test_set_params_round_trip():
    clf = CNNClassifier().set_params(lr=0.01, optimizer="padam")
    assert clf.lr == 0.01
    assert clf.optimizer == "padam"


def test_clone_preserves_params():
    clf = CNNClassifier(lr=0.003, epochs=7, seed=42)
    copy = clone(clf)
    assert copy.get_params() == clf.get_params()
    assert not hasattr(copy, "model_")


def test_fit_returns_self_and_learns(fitted, blobs_3x12):
    assert isinstance(fitted, CNNClassifier)
    assert fitted.score(blobs_3x12.images, blobs_3x12.labels) >= 0.9
    assert fitted.n_features_in_ == 28 * 28


def test_predicts_known_classes(fitted, blobs_3x12):
    preds = fitted.predict(blobs_3x12.images)
    assert preds.shape == (36,)
    assert set(preds) <= set(fitted.classes_)


def test_predict_proba_is_a_distribution(fitted, blobs_3x12):
    proba = fitted.predict_proba(blobs_3x12.images)
    assert proba.shape == (36, 3)
    assert np.all(proba >= 0)
    assert np.allclose(proba.sum(axis=1), 1.0)
    preds = fitted.predict(blobs_3x12.images)
    assert np.array_equal(fitted.classes_[proba.argmax(axis=1)], preds)


def test_generalizes_to_fresh_draw(fitted):
    from optbench.data import synthetic_blobs
    held_out = synthetic_blobs(12, 3, seed=12)
    assert fitted.score(held_out.images, held_out.labels) >= 0.8


def test_unfitted_predict_is_an_error(blobs_3x12):
    with pytest.raises(StateError, match="not fitted"):
        CNNClassifier().predict(blobs_3x12.images)


def test_single_class_fit_rejected(blobs_3x12):
    clf = CNNClassifier(epochs=1)
    with pytest.raises(DataError):
        clf.fit(blobs_3x12.images, np.zeros(36, dtype=np.int64))


def test_flat_and_image_inputs_agree(fitted, blobs_3x12):
    nchw = blobs_3x12.images
    nhw = nchw[:, 0]
    flat = nchw.reshape(36, -1)
    base = fitted.predict(nchw)
    assert np.array_equal(fitted.predict(nhw), base)
    assert np.array_equal(fitted.predict(flat), base)


def test_arbitrary_label_values(blobs_3x12):
    relabeled = np.array([10, 20, 30])[blobs_3x12.labels]
    clf = CNNClassifier(epochs=2, lr=0.002, batch_size=12, seed=0)
    clf.fit(blobs_3x12.images, relabeled)
    assert list(clf.classes_) == [10, 20, 30]
    assert set(clf.predict(blobs_3x12.images)) <= {10, 20, 30}


def test_score_counts_unseen_labels_as_wrong(fitted, blobs_3x12):
    y = blobs_3x12.labels.copy()
    y[:6] = 99
    preds = fitted.predict(blobs_3x12.images)
    still_right = (preds[6:] == blobs_3x12.labels[6:]).sum()
    got = fitted.score(blobs_3x12.images, y)
    assert got == pytest.approx(still_right / 36, abs=1e-12)


def test_fit_rescales_pixel_ranges(blobs_3x12):
    bytes_like = np.round(blobs_3x12.images * 255.0)
    clf = CNNClassifier(epochs=2, lr=0.002, batch_size=12, seed=0)
    clf.fit(bytes_like, blobs_3x12.labels)
    assert clf.score(bytes_like, blobs_3x12.labels) >= 0.9


def test_refit_is_deterministic(blobs_3x12):
    runs = []
    for _ in range(2):
        clf = CNNClassifier(epochs=1, lr=0.002, batch_size=12, seed=7)
        clf.fit(blobs_3x12.images, blobs_3x12.labels)
        runs.append(clf.predict_proba(blobs_3x12.images))
    assert np.array_equal(runs[0], runs[1])


class TestInputValidation:
    def test_channel_mismatch(self):
        with pytest.raises(ShapeError, match="channel"):
            ensure_image_batch(np.zeros((2, 3, 8, 8)))

    def test_flat_rows_must_be_square(self):
        with pytest.raises(ShapeError, match="square"):
            ensure_image_batch(np.zeros((2, 10)))

    def test_too_many_axes(self):
        with pytest.raises(ShapeError):
            ensure_image_batch(np.zeros((2, 1, 8, 8, 1)))

    def test_empty_batch(self):
        with pytest.raises(DataError, match="empty"):
            ensure_image_batch(np.zeros((0, 8, 8)))

    def test_non_finite_pixels(self):
        bad = np.full((2, 8, 8), np.nan)
        with pytest.raises(DataError, match="non-finite"):
            ensure_image_batch(bad)

    def test_label_length_mismatch(self):
        with pytest.raises(DataError):
            ensure_labels([0, 1, 2], n=2)

    def test_labels_must_be_1d(self):
        with pytest.raises(ShapeError):
            ensure_labels(np.zeros((2, 2), dtype=np.int64))

    def test_float_labels_must_be_integral(self):
        assert list(ensure_labels([3.0, 1.0])) == [3, 1]
        with pytest.raises(DataError):
            ensure_labels([0.5, 1.0])
