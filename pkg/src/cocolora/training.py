"""Variational training: the objective, the optimizer, and gradient checks.

The loss for a batch is

    mean_i nll_i + kl_weight * mean_i kl_i

where nll_i is the categorical negative log-likelihood under one
reparameterized latent draw per example and kl_i is the example's posterior
KL to the isotropic prior, summed over layers. Deterministic families have
kl_i = 0 and the loss reduces to plain cross-entropy.

Noise streams are keyed by (epoch, step), so a training run is a pure
function of (model seed, data, config, train seed).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, asdict

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, NumericError
from .model import Model
from .numerics import SeededRng
from .variational import kl_batch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2
    batch_size: int = 32
    learning_rate: float = 1e-3
    weight_decay: float = 1e-3
    prior_std: float = 0.2
    kl_weight: float = 0.008

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be positive, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if self.prior_std <= 0:
            raise ConfigError(f"prior_std must be positive, got {self.prior_std}")
        if self.kl_weight < 0:
            raise ConfigError(f"kl_weight must be nonnegative, got {self.kl_weight}")

    def to_dict(self) -> dict:
        return asdict(self)


class AdamW:
    """Adam with decoupled weight decay.

    The decay step is p <- p - lr * wd * p, applied alongside the moment
    update rather than through the gradient.
    """

    def __init__(
        self,
        params,
        learning_rate: float = 1e-3,
        weight_decay: float = 0.0,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        params = list(params)
        if params and isinstance(params[0], tuple):
            params = [t for _, t in params]
        if not params:
            raise ConfigError("optimizer received no parameters")
        self.params = params
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= self.learning_rate * (update + self.weight_decay * p.data)


def elbo_loss(
    model: Model,
    text: np.ndarray,
    audio: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    rng: SeededRng,
):
    """Scalar training loss plus a float breakdown {loss, nll, kl}.

    Calling this twice with the same rng replays the identical latent noise,
    which is what makes finite-difference checks of the sampled objective
    well posed.
    """
    labels = np.asarray(labels)
    n = text.shape[0]
    if labels.shape != (n,):
        raise ConfigError(f"labels must be shape ({n},), got {labels.shape}")
    result = model.forward(text, audio, mode="sample", rng=rng)
    nll = ag.tsum(ag.cross_entropy_with_logits(result.logits, labels)) * (1.0 / n)
    if result.posteriors:
        kl_total = None
        for mean, std in result.posteriors:
            kl_layer = kl_batch(mean, std, config.prior_std)
            if kl_layer.shape[0] == 1 and n > 1:
                # Shared posterior (blob): replicate its KL across the batch.
                kl_layer = ag.add(kl_layer, Tensor(np.zeros(n)))
            kl_total = kl_layer if kl_total is None else ag.add(kl_total, kl_layer)
        kl_mean = ag.tsum(kl_total) * (1.0 / n)
        loss = ag.add(nll, kl_mean * config.kl_weight)
        breakdown = {"loss": loss.item(), "nll": nll.item(), "kl": kl_mean.item()}
    else:
        loss = nll
        breakdown = {"loss": loss.item(), "nll": nll.item(), "kl": 0.0}
    return loss, breakdown


def train(
    model: Model,
    text: np.ndarray,
    audio: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    rng: SeededRng,
    log=None,
) -> list:
    """Minibatch AdamW training. Returns per-epoch averages of the loss parts."""
    text = np.asarray(text, dtype=np.float64)
    audio = np.asarray(audio, dtype=np.float64)
    labels = np.asarray(labels)
    n = text.shape[0]
    if n == 0:
        raise ConfigError("cannot train on an empty dataset")
    opt = AdamW(
        model.trainable_tensors(),
        learning_rate=config.learning_rate,
        weight_decay=config.weight_decay,
    )
    history = []
    start = time.monotonic()
    for epoch in range(config.epochs):
        perm = rng.derive("shuffle", epoch).permutation(n)
        sums = {"loss": 0.0, "nll": 0.0, "kl": 0.0}
        for step, lo in enumerate(range(0, n, config.batch_size)):
            idx = perm[lo : lo + config.batch_size]
            opt.zero_grad()
            loss, parts = elbo_loss(
                model,
                text[idx],
                audio[idx],
                labels[idx],
                config,
                rng.derive("epoch", epoch, "step", step),
            )
            loss.backward()
            opt.step()
            for k in sums:
                sums[k] += parts[k] * idx.size
        record = {k: v / n for k, v in sums.items()}
        record["epoch"] = epoch
        record["seconds"] = time.monotonic() - start
        history.append(record)
        if log is not None:
            log(
                f"epoch {epoch + 1}/{config.epochs} "
                f"loss {record['loss']:.4f} nll {record['nll']:.4f} kl {record['kl']:.4f}"
            )
    return history


def _select_coordinates(tensors, target: int, rng: SeededRng):
    """Pick at least ``target`` coordinates covering every parameter group."""
    quota = max(1, math.ceil(target / len(tensors)))
    chosen = []
    pools = []
    for name, t in tensors:
        size = t.data.size
        order = rng.derive("coords", name).permutation(size)
        take = min(size, quota)
        chosen.extend((name, int(j)) for j in order[:take])
        pools.append((name, order, take, size))
    i = 0
    while len(chosen) < target:
        progressed = False
        for name, order, take, size in pools:
            if take + i < size:
                chosen.append((name, int(order[take + i])))
                progressed = True
                if len(chosen) >= target:
                    break
        if not progressed:
            break
        i += 1
    return chosen


def gradient_check(
    model: Model,
    text: np.ndarray,
    audio: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    rng: SeededRng,
    n_coordinates: int = 200,
    h: float = 1e-5,
) -> dict:
    """Compare backpropagated gradients with central finite differences.

    The same derived noise stream is replayed for every loss evaluation, so
    the sampled objective is a fixed deterministic function of the
    parameters. Relative error uses a 1e-3 denominator floor to keep
    finite-difference cancellation noise from dominating near-zero entries.

    Returns a report with the worst coordinate and per-group maxima.
    """
    tensors = model.trainable_tensors()
    noise_rng = rng.derive("noise")

    def loss_value() -> float:
        with ag.no_grad():
            loss, _ = elbo_loss(model, text, audio, labels, config, noise_rng)
        return loss.item()

    for _, t in tensors:
        t.grad = None
    loss, _ = elbo_loss(model, text, audio, labels, config, noise_rng)
    loss.backward()
    analytic = {name: (np.zeros_like(t.data) if t.grad is None else t.grad) for name, t in tensors}

    coords = _select_coordinates(tensors, n_coordinates, rng.derive("pick"))
    by_name = dict(tensors)
    report = {"n_coordinates": len(coords), "groups": {}, "worst": None}
    max_rel = -1.0
    for name, j in coords:
        t = by_name[name]
        flat = t.data.reshape(-1)
        orig = flat[j]
        flat[j] = orig + h
        f_plus = loss_value()
        flat[j] = orig - h
        f_minus = loss_value()
        flat[j] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"non-finite loss at {name}[{j}]", coordinate=j)
        numeric = (f_plus - f_minus) / (2.0 * h)
        a = float(analytic[name].reshape(-1)[j])
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-3)
        group = report["groups"].setdefault(name, {"n": 0, "max_rel_error": 0.0})
        group["n"] += 1
        group["max_rel_error"] = max(group["max_rel_error"], rel)
        if rel > max_rel:
            max_rel = rel
            report["worst"] = {
                "tensor": name,
                "index": j,
                "analytic": a,
                "numeric": numeric,
                "rel_error": rel,
            }
    report["max_rel_error"] = max_rel
    return report
