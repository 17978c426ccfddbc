"""Surrogate image embedder: a small MNIST classifier whose penultimate
activations stand in for Inception pooling features."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .autodiff import Tape, backward
from .data import ImageDataset
from .errors import ContractError, EmbedderQualityError
from .models import (
    EMBEDDER_MAGIC,
    MlpSpec,
    Parameters,
    init_mlp,
    load_params,
    mlp_forward,
    save_params,
)
from .optim import OptimizerState, adam_step
from .rng import stream

log = logging.getLogger(__name__)

EMBEDDER_SPEC = MlpSpec((784, 256, 64, 10), "relu", "identity")
MIN_ACCURACY = 0.90
_CHUNK = 10_000


def _cross_entropy(logits, labels, n_classes):
    onehot = np.eye(n_classes)[labels]
    picked = (logits.tape.apply("log_softmax", logits) * onehot).sum(axis=1)
    return -picked.mean()


def fit_classifier(X, y, spec: MlpSpec, seed=0, epochs=3, batch_size=128, lr=1e-3) -> Parameters:
    """Mini-batch Adam on softmax cross-entropy.  Deterministic given ``seed``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    params = init_mlp(spec, stream(seed, "embedder:init"), "embedder")
    state = OptimizerState.for_params(params.arrays(), "adam", lr=lr, beta1=0.9, beta2=0.999)
    rng = stream(seed, "embedder:batches")
    for epoch in range(epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), batch_size):
            idx = order[start : start + batch_size]
            t = Tape()
            bound = params.bind(t)
            loss = _cross_entropy(mlp_forward(bound, spec, X[idx], t), y[idx], spec.output_width)
            grads = backward(loss)
            arrays, _ = adam_step(state, params.arrays(), [grads[v] for pair in bound for v in pair])
            params = Parameters.from_arrays(arrays, "embedder")
            last_loss = float(loss.value)
            t.release()
        log.info("embedder epoch %d done, last batch loss %.4f", epoch + 1, last_loss)
    return params


@dataclass
class Embedder:
    params: Parameters
    spec: MlpSpec = EMBEDDER_SPEC
    test_accuracy: Optional[float] = None

    @property
    def n_classes(self):
        return self.spec.output_width

    @property
    def feature_width(self):
        return self.spec.layer_widths[-2]

    def _run(self, images):
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 2 or images.shape[1] != self.spec.input_width:
            raise ContractError(f"expected images of shape (n, {self.spec.input_width}), got {images.shape}")
        logits, features = [], []
        for start in range(0, len(images), _CHUNK):
            t = Tape()
            out, hidden = mlp_forward(self.params, self.spec, images[start : start + _CHUNK], t, return_hidden=True)
            logits.append(out.value)
            features.append(hidden[-1].value)
            t.release()
        return np.concatenate(logits), np.concatenate(features)

    def features(self, images) -> np.ndarray:
        """Penultimate-layer activations, shape (n, feature_width)."""
        return self._run(images)[1]

    def predict_proba(self, images) -> np.ndarray:
        logits = self._run(images)[0]
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, images) -> np.ndarray:
        return self._run(images)[0].argmax(axis=1)

    def accuracy(self, dataset: ImageDataset) -> float:
        return float(np.mean(self.predict(dataset.images) == dataset.labels))


def train_embedder(train: ImageDataset, test: ImageDataset, seed=0, epochs=3, batch_size=128, lr=1e-3,
                   min_accuracy=MIN_ACCURACY) -> Embedder:  # fmt: skip
    """Fit the surrogate classifier and check it on ``test``.

    Raises :class:`EmbedderQualityError` when test accuracy is below
    ``min_accuracy``.
    """
    if len(np.unique(train.labels)) < 2:
        raise ContractError("training set needs labels from at least two classes")
    params = fit_classifier(train.images, train.labels, EMBEDDER_SPEC, seed, epochs, batch_size, lr)
    embedder = Embedder(params)
    embedder.test_accuracy = embedder.accuracy(test)
    log.info("embedder test accuracy %.4f", embedder.test_accuracy)
    if embedder.test_accuracy < min_accuracy:
        raise EmbedderQualityError(
            f"embedder test accuracy {embedder.test_accuracy:.4f} is below {min_accuracy}"
        )
    return embedder


def save_embedder(embedder: Embedder, path):
    save_params(embedder.params, path, magic=EMBEDDER_MAGIC)


def load_embedder(path) -> Embedder:
    params = load_params(path, magic=EMBEDDER_MAGIC, role="embedder")
    if params.widths() != EMBEDDER_SPEC.layer_widths:
        raise ContractError(f"embedder checkpoint has widths {params.widths()}")
    return Embedder(params)
