"""KL divergence, reparameterization, and the scaled-softplus std map."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cocolora.autograd import Tensor
from cocolora.errors import ShapeError
from cocolora.numerics import SeededRng, finite_difference_gradient
from cocolora.variational import (
    DiagonalGaussian,
    IsotropicPrior,
    kl_batch,
    kl_to_isotropic_prior,
    mc_kl_estimate,
    reparameterize,
    scaled_softplus_std,
)


def test_diagonal_gaussian_validation():
    with pytest.raises(ShapeError):
        DiagonalGaussian(np.zeros(3), np.ones(4))
    with pytest.raises(ValueError):
        DiagonalGaussian(np.zeros(3), np.array([1.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        IsotropicPrior(0.0)


def test_kl_zero_when_posterior_equals_prior():
    q = DiagonalGaussian(np.zeros(16), np.full(16, 0.2))
    assert kl_to_isotropic_prior(q, IsotropicPrior(0.2)) == 0.0


def test_kl_single_shifted_coordinate_is_half():
    # 64 dims at the prior except one mean entry at 0.2 = beta:
    # that coordinate contributes mu^2 / (2 beta^2) = 1/2, the rest 0.
    mean = np.zeros(64)
    mean[17] = 0.2
    q = DiagonalGaussian(mean, np.full(64, 0.2))
    assert kl_to_isotropic_prior(q, IsotropicPrior(0.2)) == pytest.approx(0.5, abs=1e-12)


def test_kl_closed_form_matches_monte_carlo():
    rng = SeededRng(11)
    for i in range(5):
        case = rng.derive("case", i)
        dim = int(case.derive("dim").integers(1, 12))
        mean = case.derive("mean").normal(dim) * 0.5
        std = 0.05 + np.abs(case.derive("std").normal(dim)) * 0.5
        beta = 0.1 + float(case.derive("beta").uniform()) * 0.5
        q = DiagonalGaussian(mean, std)
        prior = IsotropicPrior(beta)
        exact = kl_to_isotropic_prior(q, prior)
        estimate = mc_kl_estimate(q, prior, 200_000, case.derive("mc"))
        assert estimate == pytest.approx(exact, rel=2e-2, abs=2e-3)


def test_mc_kl_rejects_zero_samples():
    q = DiagonalGaussian(np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        mc_kl_estimate(q, IsotropicPrior(1.0), 0, SeededRng(0))


@settings(max_examples=50)
@given(st.integers(min_value=0, max_value=10_000))
def test_kl_is_nonnegative(case_seed):
    rng = SeededRng(case_seed).derive("kl-prop")
    dim = int(rng.derive("dim").integers(1, 20))
    mean = rng.derive("mean").normal(dim)
    std = 1e-3 + np.abs(rng.derive("std").normal(dim))
    beta = 1e-2 + float(rng.derive("beta").uniform()) * 2.0
    q = DiagonalGaussian(mean, std)
    assert kl_to_isotropic_prior(q, IsotropicPrior(beta)) >= -1e-12


def test_log_density_matches_direct_formula():
    q = DiagonalGaussian(np.array([1.0, -2.0]), np.array([0.5, 2.0]))
    z = np.array([0.3, 0.1])
    expected = sum(
        -0.5 * ((zi - mi) / si) ** 2 - np.log(si) - 0.5 * np.log(2 * np.pi)
        for zi, mi, si in zip(z, q.mean, q.std)
    )
    assert q.log_density(z) == pytest.approx(expected, abs=1e-12)
    prior = IsotropicPrior(0.7)
    iso = DiagonalGaussian(np.zeros(2), np.full(2, 0.7))
    assert prior.log_density(z) == pytest.approx(iso.log_density(z), abs=1e-12)


def test_reparameterize_is_pathwise_affine():
    mean = np.array([1.0, 2.0])
    std = np.array([0.5, 0.25])
    noise = np.array([-1.0, 4.0])
    assert np.array_equal(reparameterize(mean, std, noise), [0.5, 3.0])


def test_reparameterize_point_mass_is_bitwise_mean():
    mean = np.array([0.1, -0.7, 3.3])
    sample = reparameterize(mean, np.zeros(3), np.array([9.0, -9.0, 1.0]))
    assert np.array_equal(sample, mean)


def test_scaled_softplus_std_known_values():
    # softplus(0) = ln 2, so the std is 0.05 ln 2 + 1e-6
    assert scaled_softplus_std(np.array([0.0]), 0.05, 1e-6)[0] == pytest.approx(
        0.0346583590, abs=1e-9
    )
    assert scaled_softplus_std(np.array([-100.0]), 0.05, 1e-6)[0] == pytest.approx(
        1e-6, abs=1e-9
    )
    # exp(-800) underflows, leaving exactly the floor
    assert scaled_softplus_std(np.array([-800.0]), 0.05, 1e-6)[0] == 1e-6
    assert np.all(scaled_softplus_std(np.linspace(-50, 50, 101), 0.05, 1e-6) >= 1e-6)


def test_kl_batch_matches_closed_form_per_row():
    rng = SeededRng(5)
    mean = rng.derive("m").normal((4, 6))
    std = 0.01 + np.abs(rng.derive("s").normal((4, 6)))
    beta = 0.3
    out = kl_batch(Tensor(mean), Tensor(std), beta)
    for i in range(4):
        q = DiagonalGaussian(mean[i], std[i])
        assert out.data[i] == pytest.approx(
            kl_to_isotropic_prior(q, IsotropicPrior(beta)), abs=1e-12
        )


def test_kl_batch_gradient_against_finite_differences():
    rng = SeededRng(6)
    mean0 = rng.derive("m").normal((3, 4))
    raw0 = rng.derive("r").normal((3, 4))

    def loss_arrays(mean, raw):
        std = np.logaddexp(0.0, raw) * 0.05 + 1e-6
        total = 0.0
        for i in range(3):
            q = DiagonalGaussian(mean[i], std[i])
            total += kl_to_isotropic_prior(q, IsotropicPrior(0.2))
        return total

    mean_t = Tensor(mean0.copy(), requires_grad=True)
    raw_t = Tensor(raw0.copy(), requires_grad=True)
    from cocolora import autograd as ag

    std_t = ag.softplus(raw_t) * 0.05 + 1e-6
    ag.tsum(kl_batch(mean_t, std_t, 0.2)).backward()

    flat0 = np.concatenate([mean0.ravel(), raw0.ravel()])
    numeric = finite_difference_gradient(
        lambda v: loss_arrays(v[:12].reshape(3, 4), v[12:].reshape(3, 4)), flat0
    )
    analytic = np.concatenate([mean_t.grad.ravel(), raw_t.grad.ravel()])
    assert np.allclose(analytic, numeric, atol=1e-7)
