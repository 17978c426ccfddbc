"""scikit-learn style wrappers around the trainer and the embedder.

``GANSampler`` fits a generator to the rows of ``X``; ``MLPEmbedder`` is a
classifier whose ``transform`` returns penultimate-layer features.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import NoiseSpec, sample_noise
from .embedder import Embedder, fit_classifier
from .errors import ConfigError
from .experiment import LOSS_DEFAULTS, OptimizerConfig, TrainSchedule
from .losses import GpConfig
from .metrics import empirical_gaussian_stats, frechet_distance
from .models import MlpSpec, mlp_apply
from .rng import stream
from .trainer import fit_adversarial


def _seed(random_state):
    if random_state is None:
        raise ConfigError("random_state must be an integer; implicit entropy is not supported")
    return int(random_state)


class GANSampler(BaseEstimator):
    """Adversarially trained MLP generator for tabular data.

    Unset optimizer fields and ``n_critic`` fall back to the per-loss
    defaults.  ``score`` is the negated Frechet distance between ``X`` and an
    equally sized generated sample, so higher is better.
    """

    def __init__(self, noise_dim=10, noise_dist="standard_normal", loss="gan_nonsat", hidden=(32, 32),
                 activation="relu", output_activation="identity", total_steps=3000, batch_size=256,
                 n_critic=None, learning_rate=None, beta1=None, beta2=None, gp_lambda=10.0, clip_c=0.01,
                 random_state=0):  # fmt: skip
        self.noise_dim = noise_dim
        self.noise_dist = noise_dist
        self.loss = loss
        self.hidden = hidden
        self.activation = activation
        self.output_activation = output_activation
        self.total_steps = total_steps
        self.batch_size = batch_size
        self.n_critic = n_critic
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.gp_lambda = gp_lambda
        self.clip_c = clip_c
        self.random_state = random_state

    def _specs(self, width):
        d_out = "sigmoid" if self.loss == "gan_nonsat" else "identity"
        g = MlpSpec((self.noise_dim, *self.hidden, width), self.activation, self.output_activation)
        d = MlpSpec((width, *self.hidden[::-1], 1), self.activation, d_out)
        return g, d

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if self.loss not in LOSS_DEFAULTS:
            raise ConfigError(f"unknown loss {self.loss!r}")
        base, base_critic = LOSS_DEFAULTS[self.loss]
        opt = OptimizerConfig(
            base.kind,
            base.lr if self.learning_rate is None else self.learning_rate,
            base.beta1 if self.beta1 is None else self.beta1,
            base.beta2 if self.beta2 is None else self.beta2,
        )
        schedule = TrainSchedule(self.total_steps, self.batch_size, self.n_critic or base_critic,
                                 eval_every=max(self.total_steps, 1))  # fmt: skip
        self.n_features_in_ = X.shape[1]
        self.noise_spec_ = NoiseSpec(self.noise_dim, self.noise_dist)
        self.generator_spec_, self.discriminator_spec_ = self._specs(X.shape[1])

        def sample_real(n, rng):
            return X[rng.integers(0, len(X), size=n)]

        result = fit_adversarial(
            sample_real, X.shape[1], self.noise_spec_, self.loss, schedule, self.generator_spec_,
            self.discriminator_spec_, opt, _seed(self.random_state), GpConfig(self.gp_lambda), self.clip_c,
        )  # fmt: skip
        self.generator_params_ = result.g_params
        self.discriminator_params_ = result.d_params
        self.step_log_ = result.step_log
        self.failed_ = result.failed
        return self

    def sample(self, n_samples, random_state=None):
        check_is_fitted(self, "generator_params_")
        seed = _seed(self.random_state if random_state is None else random_state)
        z = sample_noise(self.noise_spec_, n_samples, stream(seed, "sample"))
        return mlp_apply(self.generator_params_, self.generator_spec_, z)

    def score(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        fake = self.sample(len(X))
        return -frechet_distance(empirical_gaussian_stats(X), empirical_gaussian_stats(fake))


class MLPEmbedder(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Softmax MLP classifier; ``transform`` gives the last hidden layer."""

    def __init__(self, hidden=(256, 64), epochs=3, batch_size=128, learning_rate=1e-3, random_state=0):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, codes = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ConfigError("need at least two classes")
        self.n_features_in_ = X.shape[1]
        spec = MlpSpec((X.shape[1], *self.hidden, len(self.classes_)), "relu", "identity")
        params = fit_classifier(X, codes, spec, _seed(self.random_state), self.epochs, self.batch_size,
                                self.learning_rate)  # fmt: skip
        self.embedder_ = Embedder(params, spec)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "embedder_")
        return self.embedder_.predict_proba(check_array(X, dtype=np.float64))

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def transform(self, X):
        check_is_fitted(self, "embedder_")
        return self.embedder_.features(check_array(X, dtype=np.float64))
