"""Diagonal Gaussian posteriors, isotropic priors, and their KL divergence.

The closed form for KL(N(mu, diag(sigma^2)) || N(0, beta^2 I)) is

    sum_j [ log(beta / sigma_j) + (sigma_j^2 + mu_j^2) / (2 beta^2) - 1/2 ]

``mc_kl_estimate`` provides an independent Monte Carlo check of the same
quantity, and ``kl_batch`` is the differentiable batched version used inside
the training objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .errors import ShapeError
from .numerics import SeededRng, softplus


@dataclass(frozen=True)
class DiagonalGaussian:
    """Factorized Gaussian with per-coordinate standard deviations."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.ndim != 1 or std.ndim != 1:
            raise ShapeError("mean and std must be 1-D vectors")
        if mean.shape != std.shape:
            raise ShapeError(
                f"mean shape {mean.shape} does not match std shape {std.shape}"
            )
        if not np.all(std > 0.0):
            raise ValueError("std must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def log_density(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != self.mean.shape:
            raise ShapeError(f"point shape {z.shape} does not match dim {self.dim}")
        u = (z - self.mean) / self.std
        return float(
            -0.5 * np.dot(u, u) - np.sum(np.log(self.std)) - 0.5 * self.dim * np.log(2.0 * np.pi)
        )

    def sample(self, rng: SeededRng) -> np.ndarray:
        return self.mean + self.std * rng.normal(self.mean.shape)


@dataclass(frozen=True)
class IsotropicPrior:
    """Zero-mean Gaussian N(0, std^2 I)."""

    std: float

    def __post_init__(self):
        if not self.std > 0.0:
            raise ValueError(f"prior std must be positive, got {self.std}")

    def log_density(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=np.float64)
        u = z / self.std
        return float(
            -0.5 * np.dot(u, u) - z.size * (np.log(self.std) + 0.5 * np.log(2.0 * np.pi))
        )


def kl_to_isotropic_prior(q: DiagonalGaussian, prior: IsotropicPrior) -> float:
    """Exact KL(q || prior) for a diagonal Gaussian q and isotropic prior."""
    beta = prior.std
    terms = (
        np.log(beta / q.std)
        + (q.std**2 + q.mean**2) / (2.0 * beta**2)
        - 0.5
    )
    return float(terms.sum())


def mc_kl_estimate(
    q: DiagonalGaussian, prior: IsotropicPrior, n_samples: int, rng: SeededRng
) -> float:
    """Monte Carlo estimate (1/N) sum [log q(z_i) - log p(z_i)], z_i ~ q.

    Slow by construction; used to cross-check the closed form.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    xi = rng.normal((n_samples, q.dim))
    z = q.mean[None, :] + q.std[None, :] * xi
    # log q(z): -(1/2)||xi||^2 - sum log std - (d/2) log 2pi
    log_q = (
        -0.5 * np.sum(xi**2, axis=1)
        - np.sum(np.log(q.std))
        - 0.5 * q.dim * np.log(2.0 * np.pi)
    )
    log_p = (
        -0.5 * np.sum((z / prior.std) ** 2, axis=1)
        - q.dim * (np.log(prior.std) + 0.5 * np.log(2.0 * np.pi))
    )
    return float(np.mean(log_q - log_p))


def reparameterize(mean: np.ndarray, std: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Pathwise sample mean + std * noise."""
    return mean + std * noise


def scaled_softplus_std(raw: np.ndarray, epsilon: float, delta: float) -> np.ndarray:
    """Map an unconstrained array to strictly positive stds.

    epsilon scales the softplus; delta is an additive floor that keeps the
    result bounded away from zero even when raw is very negative.
    """
    return epsilon * softplus(raw) + delta


def kl_batch(mean: ag.Tensor, std: ag.Tensor, prior_std: float) -> ag.Tensor:
    """Differentiable per-sample KL, (n, d) posterior stats -> (n,) KL values."""
    beta2 = prior_std * prior_std
    terms = (
        ag.Tensor(np.log(prior_std))
        - ag.log(std)
        + (ag.mul(std, std) + ag.mul(mean, mean)) * (0.5 / beta2)
        - 0.5
    )
    return ag.tsum(terms, axis=1)
