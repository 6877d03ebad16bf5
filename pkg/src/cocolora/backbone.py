"""Frozen backbone, trainable classifier head, and the fusion baseline.

The backbone is a stack of square linear layers with tanh activations whose
weights are drawn once from a seed and never trained. Adapters inject their
deltas before each activation. The classifier head starts at zero so every
family begins at the uniform predictive distribution.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError
from .numerics import SeededRng

FUSION_HIDDEN = (32, 16)


class FrozenBackbone:
    """Stack of frozen (dim, dim) linear maps, entries N(0, 1/dim)."""

    def __init__(self, dim: int, n_layers: int, rng: SeededRng):
        if dim < 1:
            raise ConfigError(f"backbone dim must be positive, got {dim}")
        if n_layers < 1:
            raise ConfigError(f"backbone needs at least one layer, got {n_layers}")
        self.dim = dim
        self.n_layers = n_layers
        self.weights = [
            Tensor(rng.derive("layer", i).normal((dim, dim)) / np.sqrt(dim))
            for i in range(n_layers)
        ]

    def tensors(self):
        return [(f"w{i}", w) for i, w in enumerate(self.weights)]


class Classifier:
    """Zero-initialized linear head, so initial logits are all zero."""

    def __init__(self, dim: int, n_classes: int):
        if n_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {n_classes}")
        self.w = Tensor(np.zeros((n_classes, dim)), requires_grad=True)
        self.b = Tensor(np.zeros(n_classes), requires_grad=True)

    def logits(self, x: Tensor) -> Tensor:
        return ag.linear(x, self.w, self.b)

    def tensors(self):
        return [("w", self.w), ("b", self.b)]


class FusionNetwork:
    """Early-fusion MLP over concatenated text and audio features.

    Two tanh hidden layers (32 then 16 units) and a zero-initialized linear
    output, trained end to end with no backbone and no adapters.
    """

    def __init__(self, text_dim: int, audio_dim: int, n_classes: int, rng: SeededRng):
        if n_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {n_classes}")
        in_dim = text_dim + audio_dim
        h1, h2 = FUSION_HIDDEN
        self.w1 = Tensor(rng.normal((h1, in_dim)) / np.sqrt(in_dim), requires_grad=True)
        self.b1 = Tensor(np.zeros(h1), requires_grad=True)
        self.w2 = Tensor(rng.normal((h2, h1)) / np.sqrt(h1), requires_grad=True)
        self.b2 = Tensor(np.zeros(h2), requires_grad=True)
        self.w3 = Tensor(np.zeros((n_classes, h2)), requires_grad=True)
        self.b3 = Tensor(np.zeros(n_classes), requires_grad=True)

    def logits(self, text: Tensor, audio: Tensor) -> Tensor:
        x = ag.concat([text, audio], axis=1)
        h = ag.tanh(ag.linear(x, self.w1, self.b1))
        h = ag.tanh(ag.linear(h, self.w2, self.b2))
        return ag.linear(h, self.w3, self.b3)

    def tensors(self):
        return [
            ("w1", self.w1), ("b1", self.b1),
            ("w2", self.w2), ("b2", self.b2),
            ("w3", self.w3), ("b3", self.b3),
        ]
