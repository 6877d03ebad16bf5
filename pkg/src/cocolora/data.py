"""Synthetic multimodal datasets, JSONL ingestion, and fold splitting.

The synthetic task plants a reliability signal in the audio channel: each
example's label is flipped with probability rho, and rho is linearly encoded
in the first audio coordinate (rescaled to [-1, 1]) with N(0, 0.1^2)
distractors elsewhere. Text features alone identify the clean class; audio
alone identifies how trustworthy the observed label is.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .numerics import SeededRng

DISTRACTOR_STD = 0.1
CLASS_SEPARATION = 3.0


@dataclass
class Dataset:
    """Column-major container: text (n, d_text), audio (n, d_a), labels (n,).

    ``noise_levels`` holds each example's label-flip probability when known
    (synthetic data); it is diagnostic metadata and never used by models.
    """

    text: np.ndarray
    audio: np.ndarray
    labels: np.ndarray
    noise_levels: np.ndarray | None = None

    def __post_init__(self):
        self.text = np.asarray(self.text, dtype=np.float64)
        self.audio = np.asarray(self.audio, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.text.ndim != 2 or self.audio.ndim != 2:
            raise DataError("text and audio must be 2-D arrays")
        n = self.text.shape[0]
        if self.audio.shape[0] != n or self.labels.shape != (n,):
            raise DataError(
                f"row counts disagree: text {n}, audio {self.audio.shape[0]}, "
                f"labels {self.labels.shape}"
            )
        if not np.all(np.isfinite(self.text)) or not np.all(np.isfinite(self.audio)):
            raise DataError("features must be finite")
        if n and self.labels.min() < 0:
            raise DataError("labels must be nonnegative integers")
        if self.noise_levels is not None:
            self.noise_levels = np.asarray(self.noise_levels, dtype=np.float64)
            if self.noise_levels.shape != (n,):
                raise DataError("noise_levels must have one entry per sample")

    def __len__(self) -> int:
        return self.text.shape[0]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        noise = None if self.noise_levels is None else self.noise_levels[idx]
        return Dataset(self.text[idx], self.audio[idx], self.labels[idx], noise)


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int = 2000
    text_dim: int = 16
    audio_dim: int = 16
    n_classes: int = 2
    noise_levels: tuple = (0.0, 0.1, 0.2, 0.3, 0.4)
    class_prior: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError(f"n_samples must be positive, got {self.n_samples}")
        if self.text_dim < 1 or self.audio_dim < 1:
            raise ConfigError("text_dim and audio_dim must be positive")
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be at least 2, got {self.n_classes}")
        levels = tuple(float(r) for r in self.noise_levels)
        if not levels:
            raise ConfigError("noise_levels must be non-empty")
        if any(r < 0.0 or r > 0.5 for r in levels):
            raise ConfigError(f"noise levels must lie in [0, 0.5], got {levels}")
        object.__setattr__(self, "noise_levels", levels)
        if self.class_prior is not None:
            prior = tuple(float(p) for p in self.class_prior)
            if len(prior) != self.n_classes:
                raise ConfigError(
                    f"class_prior has {len(prior)} entries for {self.n_classes} classes"
                )
            if any(p < 0.0 for p in prior) or abs(sum(prior) - 1.0) > 1e-9:
                raise ConfigError(f"class_prior must be nonnegative and sum to 1, got {prior}")
            object.__setattr__(self, "class_prior", prior)


def _class_means(text_dim: int, n_classes: int) -> np.ndarray:
    """Unit-variance clusters, class k centered at 3.0 * e_k.

    This separation puts the two-class Bayes AUC at Phi(3) > 0.99 on clean
    labels. Requires text_dim >= n_classes.
    """
    if text_dim < n_classes:
        raise ConfigError(
            f"text_dim {text_dim} must be at least n_classes {n_classes}"
        )
    means = np.zeros((n_classes, text_dim))
    for k in range(n_classes):
        means[k, k] = CLASS_SEPARATION
    return means


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Pure function of the spec (including its seed)."""
    rng = SeededRng(spec.seed).derive("synthetic")
    n, c = spec.n_samples, spec.n_classes
    means = _class_means(spec.text_dim, c)
    prior = (
        np.full(c, 1.0 / c) if spec.class_prior is None else np.asarray(spec.class_prior)
    )
    cum = np.cumsum(prior)
    cum[-1] = 1.0
    clean = np.searchsorted(cum, rng.derive("class").uniform(n), side="right")
    text = means[clean] + rng.derive("text").normal((n, spec.text_dim))

    levels = np.asarray(spec.noise_levels)
    rho = levels[rng.derive("rho").integers(0, len(levels), size=n)]
    flip = rng.derive("flip").uniform(n) < rho
    offsets = rng.derive("flip-target").integers(1, c, size=n)
    labels = np.where(flip, (clean + offsets) % c, clean)

    audio = rng.derive("audio").normal((n, spec.audio_dim)) * DISTRACTOR_STD
    # rho in [0, 0.5] maps linearly onto [-1, 1].
    audio[:, 0] = 4.0 * rho - 1.0
    return Dataset(text, audio, labels, rho)


def save_jsonl(dataset: Dataset, path, meta_path=None) -> None:
    """One {"x": [...], "a": [...], "y": int} object per line.

    Floats are written with repr precision so a reload is exact. When
    ``meta_path`` is given, per-sample noise levels go to a JSON sidecar.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(len(dataset)):
            record = {
                "x": [float(v) for v in dataset.text[i]],
                "a": [float(v) for v in dataset.audio[i]],
                "y": int(dataset.labels[i]),
            }
            fh.write(json.dumps(record) + "\n")
    if meta_path is not None and dataset.noise_levels is not None:
        with open(meta_path, "w", encoding="utf-8") as fh:
            json.dump({"noise_levels": [float(r) for r in dataset.noise_levels]}, fh)
            fh.write("\n")


def load_jsonl(path, meta_path=None) -> Dataset:
    """Parse a JSONL dataset, enforcing consistent dimensions across records.

    Malformed lines are reported with their 1-based line number. An empty
    file yields an empty dataset with zero-width features.
    """
    xs, auds, ys = [], [], []
    text_dim = audio_dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict) or "x" not in record or "y" not in record:
                raise DataError(f"{path}:{lineno}: record must have fields 'x' and 'y'")
            try:
                x = np.asarray(record["x"], dtype=np.float64)
                a = np.asarray(record.get("a", []), dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: feature arrays must be numeric") from exc
            if x.ndim != 1 or a.ndim != 1:
                raise DataError(f"{path}:{lineno}: features must be flat arrays")
            if not isinstance(record["y"], int) or isinstance(record["y"], bool):
                raise DataError(f"{path}:{lineno}: label must be an integer")
            if record["y"] < 0:
                raise DataError(f"{path}:{lineno}: label {record['y']} is negative")
            if text_dim is None:
                text_dim, audio_dim = x.size, a.size
            elif x.size != text_dim or a.size != audio_dim:
                raise DataError(
                    f"{path}:{lineno}: dimensions ({x.size}, {a.size}) do not match "
                    f"first record ({text_dim}, {audio_dim})"
                )
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(a))):
                raise DataError(f"{path}:{lineno}: features must be finite")
            xs.append(x)
            auds.append(a)
            ys.append(record["y"])
    if not xs:
        return Dataset(
            np.zeros((0, 0)), np.zeros((0, 0)), np.zeros(0, dtype=np.intp), None
        )
    noise = None
    if meta_path is not None:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        noise = np.asarray(meta["noise_levels"], dtype=np.float64)
        if noise.shape != (len(xs),):
            raise DataError(
                f"{meta_path}: {noise.size} noise levels for {len(xs)} samples"
            )
    return Dataset(np.stack(xs), np.stack(auds), np.asarray(ys, dtype=np.intp), noise)


def kfold_split(n: int, k: int, seed: int) -> list:
    """Seeded k-fold partition: list of (train_idx, test_idx) pairs.

    Test sets are disjoint and cover range(n); sizes differ by at most one.
    """
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    if k > n:
        raise DataError(f"cannot split {n} samples into {k} folds")
    perm = SeededRng(seed).derive("kfold").permutation(n)
    folds = np.array_split(perm, k)
    splits = []
    for i in range(k):
        test = np.sort(folds[i])
        train = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        splits.append((train, test))
    return splits
