"""Scikit-learn estimator wrapper around the adapter models.

``ContextualLoraClassifier`` follows the fit/predict contract: hyperparameters
are constructor arguments stored verbatim, ``fit`` validates inputs and
learns ``classes_``, and predictions come from the Monte Carlo posterior
predictive. Audio features ride along as the last ``audio_dim`` columns of
X, so the estimator plugs into pipelines and cross-validation utilities that
only know about a single feature matrix.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .evaluation import predict_batch
from .model import Model, ModelConfig
from .numerics import SeededRng
from .training import TrainConfig, train


class ContextualLoraClassifier(ClassifierMixin, BaseEstimator):
    """Classifier over [text | audio] feature rows.

    Parameters mirror the library config: ``family`` picks the adapter
    variant, ``audio_dim`` says how many trailing columns of X are audio
    features (0 means none, in which case a zero audio column is synthesized
    and only audio-free families are allowed).
    """

    def __init__(
        self,
        family: str = "coco",
        audio_dim: int = 0,
        n_layers: int = 2,
        rank: int = 8,
        alpha: float = 32.0,
        context_dim: int = 16,
        epsilon: float = 0.05,
        delta: float = 1e-6,
        epochs: int = 2,
        batch_size: int = 32,
        learning_rate: float = 1e-3,
        weight_decay: float = 1e-3,
        prior_std: float = 0.2,
        kl_weight: float = 0.008,
        n_draws: int = 10,
        seed: int = 0,
    ):
        self.family = family
        self.audio_dim = audio_dim
        self.n_layers = n_layers
        self.rank = rank
        self.alpha = alpha
        self.context_dim = context_dim
        self.epsilon = epsilon
        self.delta = delta
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.prior_std = prior_std
        self.kl_weight = kl_weight
        self.n_draws = n_draws
        self.seed = seed

    def _split_features(self, X: np.ndarray):
        audio_dim = int(self.audio_dim)
        if audio_dim < 0:
            raise ValueError(f"audio_dim must be nonnegative, got {self.audio_dim}")
        if audio_dim >= X.shape[1]:
            raise ValueError(
                f"audio_dim {audio_dim} leaves no text columns in X with "
                f"{X.shape[1]} features"
            )
        if audio_dim == 0:
            if self.family in ("coco", "fusion"):
                raise ValueError(f"family '{self.family}' requires audio_dim >= 1")
            return X, np.zeros((X.shape[0], 1))
        return X[:, :-audio_dim], X[:, -audio_dim:]

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("classifier needs at least 2 classes in y")
        text, audio = self._split_features(X)
        config = ModelConfig(
            family=self.family,
            text_dim=text.shape[1],
            audio_dim=audio.shape[1],
            n_layers=self.n_layers,
            rank=self.rank,
            alpha=self.alpha,
            context_dim=self.context_dim,
            n_classes=int(self.classes_.size),
            epsilon=self.epsilon,
            delta=self.delta,
        )
        train_cfg = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            prior_std=self.prior_std,
            kl_weight=self.kl_weight,
        )
        self.model_ = Model(config, self.seed)
        self.history_ = train(
            self.model_, text, audio, encoded, train_cfg,
            SeededRng(self.seed).derive("train"),
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        text, audio = self._split_features(X)
        probs, _, _ = predict_batch(
            self.model_, text, audio, self.n_draws,
            SeededRng(self.seed).derive("predict"),
        )
        return probs

    def predict(self, X):
        probs = self.predict_proba(X)
        return self.classes_[probs.argmax(axis=1)]
