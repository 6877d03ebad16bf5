"""Model assembly: config, parameter registry, and the batched forward pass.

A ``Model`` owns the frozen backbone, one adapter layer per backbone layer,
the optional audio projector, and the classifier head (or, for the fusion
family, just the fusion MLP). The forward pass runs a whole batch through
the autograd tape at once and reports the per-layer posterior statistics so
callers can compute KL terms and uncertainty diagnostics.

All randomness is keyed: the constructor derives independent streams for the
backbone and each adapter from a single seed, and sampling noise comes from
an rng the caller passes per forward call. Rebuilding a model from the same
config and seed reproduces every parameter bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import autograd as ag
from .adapters import (
    ADAPTER_FAMILIES,
    FAMILIES,
    AdapterLayer,
    AudioProjector,
    blob_layer_delta,
    contextual_layer_delta,
    latent_dim,
    lora_delta,
)
from .autograd import Tensor
from .backbone import Classifier, FrozenBackbone, FusionNetwork
from .errors import ConfigError, ShapeError
from .numerics import SeededRng


@dataclass(frozen=True)
class ModelConfig:
    family: str = "coco"
    text_dim: int = 16
    audio_dim: int = 8
    n_layers: int = 2
    rank: int = 8
    alpha: float = 32.0
    context_dim: int = 16
    n_classes: int = 2
    epsilon: float = 0.05
    delta: float = 1e-6

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(
                f"unknown family '{self.family}', expected one of {FAMILIES}"
            )
        for name in ("text_dim", "audio_dim", "n_layers", "rank", "context_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be at least 2, got {self.n_classes}")
        if self.rank > self.text_dim:
            raise ConfigError(f"rank {self.rank} exceeds text_dim {self.text_dim}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.delta < 0:
            raise ConfigError(f"delta must be nonnegative, got {self.delta}")

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ForwardResult:
    logits: Tensor
    # One (mean, std) pair per stochastic layer. Shapes are (n, rank^2) for
    # the context-conditioned families and (1, rank*text_dim) for blob.
    posteriors: list = field(default_factory=list)


class Model:
    def __init__(self, config: ModelConfig, seed: int):
        self.config = config
        self.seed = int(seed)
        root = SeededRng(self.seed)
        self.fusion = None
        self.backbone = None
        self.classifier = None
        self.audio_projector = None
        self.layers = []
        if config.family == "fusion":
            self.fusion = FusionNetwork(
                config.text_dim, config.audio_dim, config.n_classes, root.derive("fusion")
            )
        else:
            self.backbone = FrozenBackbone(
                config.text_dim, config.n_layers, root.derive("backbone")
            )
            self.layers = [
                AdapterLayer(
                    config.family,
                    config.text_dim,
                    config.rank,
                    config.context_dim,
                    root.derive("adapter", i),
                )
                for i in range(config.n_layers)
            ]
            if config.family == "coco":
                self.audio_projector = AudioProjector.init(
                    config.audio_dim, config.context_dim, root.derive("audio")
                )
            self.classifier = Classifier(config.text_dim, config.n_classes)

    def named_tensors(self) -> dict:
        """Every parameter, frozen included, in a stable order."""
        named = {}
        if self.fusion is not None:
            for k, t in self.fusion.tensors():
                named[f"fusion.{k}"] = t
            return named
        for k, t in self.backbone.tensors():
            named[f"backbone.{k}"] = t
        if self.audio_projector is not None:
            for k, t in self.audio_projector.tensors():
                named[f"audio.{k}"] = t
        for i, layer in enumerate(self.layers):
            for k, t in layer.tensors():
                named[f"layers.{i}.{k}"] = t
        for k, t in self.classifier.tensors():
            named[f"classifier.{k}"] = t
        return named

    def trainable_tensors(self) -> list:
        return [(k, t) for k, t in self.named_tensors().items() if t.requires_grad]

    def trainable_parameter_count(self) -> int:
        return sum(t.data.size for _, t in self.trainable_tensors())

    def _check_inputs(self, text: np.ndarray, audio: np.ndarray):
        text = np.asarray(text, dtype=np.float64)
        audio = np.asarray(audio, dtype=np.float64)
        if text.ndim != 2 or text.shape[1] != self.config.text_dim:
            raise ShapeError(
                f"text features must be (n, {self.config.text_dim}), got {text.shape}"
            )
        if audio.ndim != 2 or audio.shape[1] != self.config.audio_dim:
            raise ShapeError(
                f"audio features must be (n, {self.config.audio_dim}), got {audio.shape}"
            )
        if text.shape[0] != audio.shape[0]:
            raise ShapeError(
                f"text rows {text.shape[0]} do not match audio rows {audio.shape[0]}"
            )
        return text, audio

    def forward(
        self,
        text: np.ndarray,
        audio: np.ndarray,
        mode: str = "mean",
        rng: SeededRng | None = None,
    ) -> ForwardResult:
        """Run a batch through the network.

        mode "mean" uses each posterior's mean latent; mode "sample" draws
        one reparameterized latent per example per layer from ``rng``.
        """
        if mode not in ("mean", "sample"):
            raise ConfigError(f"mode must be 'mean' or 'sample', got '{mode}'")
        text, audio = self._check_inputs(text, audio)
        cfg = self.config
        stochastic = cfg.family in ("blob", "clora", "coco")
        if mode == "sample" and stochastic and rng is None:
            raise ConfigError("mode 'sample' requires an rng for stochastic families")

        if self.fusion is not None:
            logits = self.fusion.logits(Tensor(text), Tensor(audio))
            return ForwardResult(logits=logits, posteriors=[])

        n = text.shape[0]
        x = Tensor(text)
        embedding = None
        if self.audio_projector is not None:
            embedding = self.audio_projector.project(Tensor(audio))

        posteriors = []
        for i, (w0, layer) in enumerate(zip(self.backbone.weights, self.layers)):
            if cfg.family == "lora":
                d = lora_delta(layer, x, cfg.scale)
            elif cfg.family == "blob":
                noise = None
                if mode == "sample":
                    noise = rng.derive("noise", i).normal((n, cfg.rank, cfg.text_dim))
                d, stats = blob_layer_delta(
                    layer, x, cfg.scale, cfg.epsilon, cfg.delta, noise
                )
                posteriors.append(stats)
            else:
                noise = None
                if mode == "sample":
                    noise = rng.derive("noise", i).normal((n, latent_dim(cfg.rank)))
                d, stats = contextual_layer_delta(
                    layer, x, embedding, cfg.scale, cfg.epsilon, cfg.delta, noise
                )
                posteriors.append(stats)
            x = ag.tanh(ag.add(ag.matmul(x, ag.transpose(w0)), d))
        logits = self.classifier.logits(x)
        return ForwardResult(logits=logits, posteriors=posteriors)

    def mean_logits(self, text: np.ndarray, audio: np.ndarray) -> np.ndarray:
        """Posterior-mean logits with no tape, as a plain array."""
        with ag.no_grad():
            return self.forward(text, audio, mode="mean").logits.data
