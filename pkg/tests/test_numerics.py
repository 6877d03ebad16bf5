"""Tests for the numerics module: stable scalars, seeded rng, FD oracle."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cocolora.errors import NumericError, ShapeError
from cocolora.numerics import (
    SeededRng,
    finite_difference_gradient,
    matmul,
    sample_standard_normal,
    sigmoid,
    softplus,
)


def test_matmul_matches_numpy():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((4, 5))
    assert np.allclose(matmul(a, b), a @ b)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_softplus_known_values():
    assert softplus(0.0) == pytest.approx(np.log(2.0), abs=1e-15)
    # exp(-800) underflows to zero, so the result is exactly zero
    assert softplus(-800.0) == 0.0
    assert softplus(800.0) == 800.0


def test_sigmoid_stable_at_extremes():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(800.0) == 1.0
    assert sigmoid(-800.0) == 0.0
    assert np.isfinite(sigmoid(np.array([-1e4, 1e4]))).all()


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_softplus_bounds(x):
    y = softplus(x)
    assert y >= 0.0
    assert y >= x


@given(st.floats(min_value=-50, max_value=50), st.floats(min_value=-50, max_value=50))
def test_sigmoid_monotone(a, b):
    lo, hi = sorted((a, b))
    assert sigmoid(lo) <= sigmoid(hi)


def test_seeded_rng_same_key_replays_identical_values():
    root = SeededRng(42)
    first = root.derive("noise", 3).normal(10)
    second = root.derive("noise", 3).normal(10)
    assert np.array_equal(first, second)


def test_seeded_rng_distinct_keys_differ():
    root = SeededRng(42)
    a = root.derive("noise", 0).normal(10)
    b = root.derive("noise", 1).normal(10)
    c = root.derive("other", 0).normal(10)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_derive_does_not_consume_parent_state():
    root = SeededRng(7)
    before = root.derive("x").normal(5)
    root.derive("y").normal(100)
    root.derive("z", "deep", 4).uniform(3)
    after = root.derive("x").normal(5)
    assert np.array_equal(before, after)


def test_seeded_rng_key_mixes_strings_and_ints():
    a = SeededRng(0).derive("layer", 1).normal(4)
    b = SeededRng(0).derive("layer", 2).normal(4)
    assert not np.array_equal(a, b)


def test_permutation_is_deterministic_and_complete():
    p1 = SeededRng(3).derive("shuffle", 0).permutation(20)
    p2 = SeededRng(3).derive("shuffle", 0).permutation(20)
    assert np.array_equal(p1, p2)
    assert np.array_equal(np.sort(p1), np.arange(20))


def test_sample_standard_normal_rejects_nonpositive_count():
    with pytest.raises(ValueError):
        sample_standard_normal(SeededRng(0), 0)


def test_finite_difference_gradient_on_quadratic():
    # f(p) = p . A p / 2 has exact gradient (A + A^T) p / 2
    rng = np.random.default_rng(1)
    a = rng.standard_normal((6, 6))
    p = rng.standard_normal(6)
    grad = finite_difference_gradient(lambda v: 0.5 * v @ a @ v, p)
    expected = 0.5 * (a + a.T) @ p
    assert np.allclose(grad, expected, atol=1e-7)


def test_finite_difference_gradient_reports_bad_coordinate():
    def f(v):
        return np.nan if v[2] > 0.5 else float(v.sum())

    with pytest.raises(NumericError) as excinfo:
        finite_difference_gradient(f, np.array([0.0, 0.0, 0.5]))
    assert excinfo.value.coordinate == 2


def test_finite_difference_gradient_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_difference_gradient(lambda v: float(v.sum()), np.zeros(3), h=0.0)
