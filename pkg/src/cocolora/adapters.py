"""Low-rank adapter layers and their context-conditioned variants.

Four families share the frozen backbone:

- ``lora``: deterministic delta ``s * B A x``.
- ``blob``: a shared diagonal Gaussian posterior over the entries of A;
  samples ``A + omega * xi`` are drawn per example during training.
- ``clora``: a per-example rank-space latent E whose posterior is predicted
  from the text projection ``z = A x`` alone.
- ``coco``: like clora, but the inference head also sees a per-layer
  projection of a shared audio embedding.

All deltas are built on the autograd tape so a single backward pass trains
every adapter parameter. Frozen backbone weights never require gradients.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, ShapeError
from .numerics import SeededRng

ADAPTER_FAMILIES = ("lora", "blob", "clora", "coco")
FAMILIES = ADAPTER_FAMILIES + ("fusion",)

HEAD_INIT_STD = 0.02
AUDIO_HIDDEN = 32


def latent_dim(rank: int) -> int:
    """Dimension of the rank-space latent vec(E)."""
    return rank * rank


def inference_head_param_count(family: str, rank: int) -> int:
    """Weights plus biases of one layer's posterior head."""
    width = 2 * rank if family == "coco" else rank
    out = 2 * latent_dim(rank)
    return out * width + out


def validate_rank(rank: int, dim: int) -> None:
    if rank < 1:
        raise ConfigError(f"rank must be positive, got {rank}")
    if rank > dim:
        raise ConfigError(f"rank {rank} exceeds layer width {dim}")


class LoraFactors:
    """Down/up projection pair for one layer.

    ``a`` has shape (rank, dim) and is drawn from N(0, 1/dim); ``b`` has
    shape (dim, rank) and starts at zero so the adapted model matches the
    frozen backbone exactly at initialization.
    """

    def __init__(self, a: Tensor, b: Tensor):
        self.a = a
        self.b = b

    @classmethod
    def init(cls, dim: int, rank: int, rng: SeededRng) -> "LoraFactors":
        validate_rank(rank, dim)
        a = Tensor(rng.normal((rank, dim)) / np.sqrt(dim), requires_grad=True)
        b = Tensor(np.zeros((dim, rank)), requires_grad=True)
        return cls(a, b)

    def tensors(self):
        return [("a", self.a), ("b", self.b)]


class AudioProjector:
    """Two-layer MLP mapping raw audio features to a shared embedding.

    tanh hidden layer of width 32, linear output of width ``context_dim``.
    """

    def __init__(self, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor):
        self.w1 = w1
        self.b1 = b1
        self.w2 = w2
        self.b2 = b2

    @classmethod
    def init(cls, audio_dim: int, context_dim: int, rng: SeededRng) -> "AudioProjector":
        if audio_dim < 1 or context_dim < 1:
            raise ConfigError("audio_dim and context_dim must be positive")
        w1 = Tensor(rng.normal((AUDIO_HIDDEN, audio_dim)) * HEAD_INIT_STD, requires_grad=True)
        b1 = Tensor(np.zeros(AUDIO_HIDDEN), requires_grad=True)
        w2 = Tensor(rng.normal((context_dim, AUDIO_HIDDEN)) * HEAD_INIT_STD, requires_grad=True)
        b2 = Tensor(np.zeros(context_dim), requires_grad=True)
        return cls(w1, b1, w2, b2)

    def project(self, audio: Tensor) -> Tensor:
        """(n, audio_dim) -> (n, context_dim)."""
        hidden = ag.tanh(ag.linear(audio, self.w1, self.b1))
        return ag.linear(hidden, self.w2, self.b2)

    def tensors(self):
        return [("w1", self.w1), ("b1", self.b1), ("w2", self.w2), ("b2", self.b2)]


class InferenceHead:
    """Linear map from a conditioning vector to posterior (mean, raw std).

    Output is 2 * rank^2 wide: the first half is the latent mean, the second
    half parameterizes the std through a scaled softplus.
    """

    def __init__(self, w: Tensor, b: Tensor, rank: int):
        self.w = w
        self.b = b
        self.rank = rank

    @classmethod
    def init(cls, in_dim: int, rank: int, rng: SeededRng) -> "InferenceHead":
        out = 2 * latent_dim(rank)
        w = Tensor(rng.normal((out, in_dim)) * HEAD_INIT_STD, requires_grad=True)
        b = Tensor(np.zeros(out), requires_grad=True)
        return cls(w, b, rank)

    def posterior_stats(self, cond: Tensor, epsilon: float, delta: float):
        """Return (mean, std) tensors of shape (n, rank^2)."""
        stats = ag.linear(cond, self.w, self.b)
        d = latent_dim(self.rank)
        mean = ag.cols(stats, 0, d)
        raw = ag.cols(stats, d, 2 * d)
        std = ag.softplus(raw) * epsilon + delta
        return mean, std

    def tensors(self):
        return [("w", self.w), ("b", self.b)]


class LayerContextGate:
    """Per-layer affine map of the shared audio embedding."""

    def __init__(self, w: Tensor, b: Tensor):
        self.w = w
        self.b = b

    @classmethod
    def init(cls, context_dim: int, rank: int, rng: SeededRng) -> "LayerContextGate":
        w = Tensor(rng.normal((rank, context_dim)) * HEAD_INIT_STD, requires_grad=True)
        b = Tensor(np.zeros(rank), requires_grad=True)
        return cls(w, b)

    def apply(self, embedding: Tensor) -> Tensor:
        return ag.linear(embedding, self.w, self.b)

    def tensors(self):
        return [("w", self.w), ("b", self.b)]


class AdapterLayer:
    """One layer's adapter parameters for a given family."""

    def __init__(self, family: str, dim: int, rank: int, context_dim: int, rng: SeededRng):
        if family not in ADAPTER_FAMILIES:
            raise ConfigError(f"unknown adapter family '{family}'")
        validate_rank(rank, dim)
        self.family = family
        self.dim = dim
        self.rank = rank
        self.lora = LoraFactors.init(dim, rank, rng.derive("lora"))
        self.gate = None
        self.head = None
        self.rho = None
        if family == "coco":
            self.gate = LayerContextGate.init(context_dim, rank, rng.derive("gate"))
            self.head = InferenceHead.init(2 * rank, rank, rng.derive("head"))
        elif family == "clora":
            self.head = InferenceHead.init(rank, rank, rng.derive("head"))
        elif family == "blob":
            # omega = epsilon * softplus(rho) + delta, so zeros give the same
            # initial std scale as the context-conditioned heads.
            self.rho = Tensor(np.zeros((rank, dim)), requires_grad=True)

    def tensors(self):
        named = [(f"lora.{k}", t) for k, t in self.lora.tensors()]
        if self.gate is not None:
            named += [(f"gate.{k}", t) for k, t in self.gate.tensors()]
        if self.head is not None:
            named += [(f"head.{k}", t) for k, t in self.head.tensors()]
        if self.rho is not None:
            named.append(("rho", self.rho))
        return named


def lora_delta(layer: AdapterLayer, x: Tensor, scale: float) -> Tensor:
    """Deterministic low-rank update s * (A x) B^T, shape (n, dim)."""
    z = ag.matmul(x, ag.transpose(layer.lora.a))
    return ag.matmul(z, ag.transpose(layer.lora.b)) * scale


def blob_layer_delta(
    layer: AdapterLayer,
    x: Tensor,
    scale: float,
    epsilon: float,
    delta: float,
    noise: np.ndarray | None,
):
    """Input-independent stochastic adapter.

    Samples one A-matrix per example when ``noise`` (n, rank, dim) is given;
    otherwise uses the posterior mean A. Returns (delta, (mean, std)) where
    the posterior stats are flat (1, rank*dim) tensors shared by the batch.
    """
    omega = ag.softplus(layer.rho) * epsilon + delta
    if noise is None:
        a_sampled = layer.lora.a
        z = ag.matmul(x, ag.transpose(a_sampled))
    else:
        if noise.shape != (x.shape[0], layer.rank, layer.dim):
            raise ShapeError(
                f"noise shape {noise.shape} does not match "
                f"({x.shape[0]}, {layer.rank}, {layer.dim})"
            )
        a_sampled = ag.add(layer.lora.a, ag.mul(omega, Tensor(noise)))
        z = ag.bmv(a_sampled, x)
    delta_out = ag.matmul(z, ag.transpose(layer.lora.b)) * scale
    mean = ag.reshape(layer.lora.a, (1, layer.rank * layer.dim))
    std = ag.reshape(omega, (1, layer.rank * layer.dim))
    return delta_out, (mean, std)


def contextual_layer_delta(
    layer: AdapterLayer,
    x: Tensor,
    audio_embedding: Tensor | None,
    scale: float,
    epsilon: float,
    delta: float,
    noise: np.ndarray | None,
):
    """Rank-space stochastic adapter for the clora and coco families.

    The conditioning vector is z = A x for clora and [z ; G u + b] for coco.
    ``noise`` of shape (n, rank^2) selects the sampled path; None selects the
    posterior mean. Returns (delta, (mean, std)).
    """
    r = layer.rank
    z = ag.matmul(x, ag.transpose(layer.lora.a))
    if layer.family == "coco":
        if audio_embedding is None:
            raise ShapeError("coco layers require an audio embedding")
        cond = ag.concat([z, layer.gate.apply(audio_embedding)], axis=1)
    else:
        cond = z
    mean, std = layer.head.posterior_stats(cond, epsilon, delta)
    if noise is None:
        evec = mean
    else:
        if noise.shape != (x.shape[0], r * r):
            raise ShapeError(
                f"noise shape {noise.shape} does not match ({x.shape[0]}, {r * r})"
            )
        evec = ag.add(mean, ag.mul(std, Tensor(noise)))
    # vec is row-major: entry (j, k) of E sits at index j * r + k.
    e = ag.reshape(evec, (x.shape[0], r, r))
    ez = ag.bmv(e, z)
    delta_out = ag.matmul(ez, ag.transpose(layer.lora.b)) * scale
    return delta_out, (mean, std)
