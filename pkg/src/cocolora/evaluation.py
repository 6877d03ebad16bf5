"""Posterior predictive inference and evaluation metrics.

Predictions average softmax outputs over M posterior draws. Discrimination
is measured by Mann-Whitney AUC (macro one-vs-rest beyond two classes),
calibration by expected calibration error and negative log-likelihood, and
audio sensitivity by the Spearman correlation between each example's true
label-noise level and its predictive entropy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .data import Dataset
from .errors import ConfigError, DataError, MetricError
from .model import Model
from .numerics import SeededRng

NLL_CLAMP = 1e-12


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def entropy(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy in nats along the last axis, with 0 log 0 = 0."""
    p = np.asarray(probs, dtype=np.float64)
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


@dataclass(frozen=True)
class PredictiveResult:
    probs: np.ndarray
    entropy: float
    mean_sigma_norm: float


def predict_batch(
    model: Model,
    text: np.ndarray,
    audio: np.ndarray,
    n_draws: int,
    rng: SeededRng,
):
    """Monte Carlo posterior predictive for a whole batch.

    Returns (probs (n, C), entropy (n,), sigma_norm (n,)). probs is the
    average of per-draw softmaxes; entropy is taken of that average.
    sigma_norm is the per-example posterior-std norm averaged over layers,
    computed on the mean path (zero for deterministic families).
    """
    if n_draws < 1:
        raise ConfigError(f"n_draws must be at least 1, got {n_draws}")
    with ag.no_grad():
        probs = None
        for m in range(n_draws):
            result = model.forward(text, audio, mode="sample", rng=rng.derive("draw", m))
            p = softmax(result.logits.data)
            probs = p if probs is None else probs + p
        probs /= n_draws
        mean_result = model.forward(text, audio, mode="mean")
    n = probs.shape[0]
    if mean_result.posteriors:
        norms = np.zeros(n)
        for _, std in mean_result.posteriors:
            layer_norm = np.linalg.norm(std.data, axis=1)
            norms += np.broadcast_to(layer_norm, (n,))
        sigma_norm = norms / len(mean_result.posteriors)
    else:
        sigma_norm = np.zeros(n)
    return probs, entropy(probs), sigma_norm


def predict(
    model: Model, x: np.ndarray, a: np.ndarray, n_draws: int, rng: SeededRng
) -> PredictiveResult:
    """Single-example convenience wrapper around predict_batch."""
    probs, ent, sig = predict_batch(
        model, np.asarray(x)[None, :], np.asarray(a)[None, :], n_draws, rng
    )
    return PredictiveResult(probs=probs[0], entropy=float(ent[0]), mean_sigma_norm=float(sig[0]))


def rankdata(values) -> np.ndarray:
    """1-based ranks with ties given their average rank."""
    v = np.asarray(values, dtype=np.float64)
    _, inverse, counts = np.unique(v, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    avg = ends - counts + (counts + 1) / 2.0
    return avg[inverse]


def auc(scores, labels) -> float:
    """P(score of random positive > score of random negative), ties at 0.5.

    Computed from the rank-sum form of the Mann-Whitney statistic.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricError(
            f"scores {scores.shape} and labels {labels.shape} must be matching vectors"
        )
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos + n_neg != labels.size:
        raise MetricError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs both a positive and a negative example")
    ranks = rankdata(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def macro_auc(probs: np.ndarray, labels) -> float:
    """One-vs-rest AUC averaged over classes that have both outcomes."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2:
        raise MetricError(f"probs must be (n, C), got {probs.shape}")
    n, c = probs.shape
    if c == 2:
        return auc(probs[:, 1], (labels == 1).astype(int))
    values = []
    for k in range(c):
        positive = (labels == k).astype(int)
        if 0 < positive.sum() < n:
            values.append(auc(probs[:, k], positive))
    if not values:
        raise MetricError("no class has both positive and negative examples")
    return float(np.mean(values))


def nll_metric(probs: np.ndarray, labels) -> float:
    """Mean negative log-likelihood of the true labels.

    Probabilities below 1e-12 are clamped and a warning is issued, so a
    single confident mistake cannot send the metric to infinity silently.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise MetricError(
            f"probs {probs.shape} and labels {labels.shape} are inconsistent"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise MetricError("labels out of range for the given probabilities")
    p_true = probs[np.arange(labels.size), labels]
    n_clamped = int(np.sum(p_true < NLL_CLAMP))
    if n_clamped:
        warnings.warn(
            f"{n_clamped} true-label probabilities clamped at {NLL_CLAMP}",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(np.mean(-np.log(np.maximum(p_true, NLL_CLAMP))))


def ece(probs: np.ndarray, labels, bins: int = 10) -> float:
    """Expected calibration error over equal-width confidence bins."""
    if bins < 1:
        raise MetricError(f"bins must be at least 1, got {bins}")
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    conf = probs.max(axis=1)
    pred = probs.argmax(axis=1)
    correct = (pred == labels).astype(np.float64)
    # Confidence 1.0 falls in the top bin.
    idx = np.minimum((conf * bins).astype(np.intp), bins - 1)
    total = 0.0
    n = labels.size
    for b in range(bins):
        mask = idx == b
        n_b = int(mask.sum())
        if n_b == 0:
            continue
        total += (n_b / n) * abs(correct[mask].mean() - conf[mask].mean())
    return float(total)


def pearson(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt(np.sum(xc * xc) * np.sum(yc * yc))
    if denom == 0.0:
        return None
    return float(np.sum(xc * yc) / denom)


def spearman(x, y):
    """Rank correlation; None when either input has no rank variation."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError(f"inputs must be matching vectors, got {x.shape}, {y.shape}")
    if x.size < 2:
        raise MetricError("need at least 2 points for a correlation")
    return pearson(rankdata(x), rankdata(y))


def heteroscedasticity_report(
    model: Model, dataset: Dataset, n_draws: int, rng: SeededRng
) -> dict:
    """Audio-sensitivity diagnostic on data with known label-noise levels.

    Buckets examples by their true noise level and reports per-bucket mean
    predictive entropy and posterior-std norm, plus the Spearman correlation
    between noise level and per-example entropy (None for a single bucket).
    """
    if dataset.noise_levels is None:
        raise DataError("dataset has no recorded noise levels")
    probs, ent, sigma_norm = predict_batch(
        model, dataset.text, dataset.audio, n_draws, rng
    )
    del probs
    levels = np.unique(dataset.noise_levels)
    buckets = []
    for level in levels:
        mask = dataset.noise_levels == level
        buckets.append(
            {
                "noise_level": float(level),
                "count": int(mask.sum()),
                "mean_entropy": float(ent[mask].mean()),
                "mean_sigma_norm": float(sigma_norm[mask].mean()),
            }
        )
    corr = spearman(dataset.noise_levels, ent) if levels.size > 1 else None
    return {"spearman": corr, "buckets": buckets}


def evaluate_model(model: Model, dataset: Dataset, n_draws: int, rng: SeededRng) -> dict:
    """Test-set metrics from one posterior predictive pass."""
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    probs, ent, _ = predict_batch(model, dataset.text, dataset.audio, n_draws, rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        nll = nll_metric(probs, dataset.labels)
    return {
        "auc": macro_auc(probs, dataset.labels),
        "nll": nll,
        "ece": ece(probs, dataset.labels),
        "accuracy": float(np.mean(probs.argmax(axis=1) == dataset.labels)),
        "mean_entropy": float(ent.mean()),
    }
