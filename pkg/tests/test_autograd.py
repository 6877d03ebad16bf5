"""Every autograd op is checked against the finite-difference oracle."""

import numpy as np
import pytest

from cocolora import autograd as ag
from cocolora.autograd import Tensor
from cocolora.numerics import finite_difference_gradient

RNG = np.random.default_rng(20240817)


def check_against_fd(build, shapes, atol=1e-6):
    """Compare backprop through ``build(tensors) -> scalar Tensor`` with
    central differences on the flattened parameter vector."""
    arrays = [RNG.standard_normal(s) for s in shapes]
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = build(*tensors)
    out.backward()
    sizes = [a.size for a in arrays]
    offsets = np.cumsum([0] + sizes)

    def f(flat):
        parts = [
            Tensor(flat[lo:hi].reshape(s))
            for lo, hi, s in zip(offsets[:-1], offsets[1:], shapes)
        ]
        return build(*parts).item()

    flat0 = np.concatenate([a.ravel() for a in arrays])
    numeric = finite_difference_gradient(f, flat0)
    analytic = np.concatenate([t.grad.ravel() for t in tensors])
    assert np.allclose(analytic, numeric, atol=atol), (
        f"max abs diff {np.abs(analytic - numeric).max():.3e}"
    )


def test_add_mul_with_broadcasting():
    check_against_fd(
        lambda a, b: ag.tsum(ag.mul(ag.add(a, b), a)),
        [(4, 3), (3,)],
    )


def test_sub_and_neg():
    check_against_fd(lambda a, b: ag.tsum(ag.sub(ag.neg(a), b)), [(5,), (5,)])


def test_matmul_and_transpose():
    check_against_fd(
        lambda a, b: ag.tsum(ag.matmul(a, ag.transpose(b))),
        [(3, 4), (5, 4)],
    )


def test_bmv_batched_matrix_vector():
    check_against_fd(
        lambda m, v: ag.tsum(ag.mul(ag.bmv(m, v), ag.bmv(m, v))),
        [(6, 3, 4), (6, 4)],
    )


def test_pointwise_nonlinearities():
    check_against_fd(lambda a: ag.tsum(ag.tanh(a)), [(7,)])
    check_against_fd(lambda a: ag.tsum(ag.exp(a)), [(7,)])
    check_against_fd(lambda a: ag.tsum(ag.softplus(a)), [(7,)])
    check_against_fd(lambda a: ag.tsum(ag.log(ag.softplus(a) + 1.0)), [(7,)])


def test_reshape_concat_and_column_slice():
    def build(a, b):
        joined = ag.concat([ag.reshape(a, (2, 6)), b], axis=1)
        return ag.tsum(ag.cols(joined, 2, 7) * 3.0)

    check_against_fd(build, [(2, 2, 3), (2, 4)])


def test_sum_with_axis_and_keepdims():
    check_against_fd(lambda a: ag.tsum(ag.mul(ag.tsum(a, axis=1, keepdims=True), a)), [(3, 4)])
    check_against_fd(lambda a: ag.tsum(ag.tsum(a, axis=0)), [(3, 4)])


def test_mean_matches_sum_over_size():
    a = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    ag.mean(a).backward()
    assert np.allclose(a.grad, np.full((2, 3), 1.0 / 6.0))


def test_cross_entropy_value_and_gradient():
    logits = RNG.standard_normal((5, 3))
    labels = np.array([0, 2, 1, 1, 0])
    t = Tensor(logits.copy(), requires_grad=True)
    nll = ag.cross_entropy_with_logits(t, labels)
    # reference: -log softmax picked at the label
    z = logits - logits.max(axis=1, keepdims=True)
    ref = -np.log(np.exp(z) / np.exp(z).sum(axis=1, keepdims=True))[
        np.arange(5), labels
    ]
    assert np.allclose(nll.data, ref, atol=1e-12)

    ag.tsum(nll).backward()
    p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    p[np.arange(5), labels] -= 1.0
    assert np.allclose(t.grad, p, atol=1e-12)


def test_cross_entropy_stable_at_huge_logits():
    t = Tensor(np.array([[1000.0, 0.0], [-1000.0, 0.0]]), requires_grad=True)
    nll = ag.cross_entropy_with_logits(t, np.array([0, 0]))
    assert np.isfinite(nll.data).all()
    assert nll.data[0] == pytest.approx(0.0, abs=1e-12)
    assert nll.data[1] == pytest.approx(1000.0, rel=1e-12)


def test_diamond_graph_accumulates_both_paths():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = ag.add(ag.mul(x, x), x)  # x^2 + x, gradient 2x + 1 = 5
    ag.tsum(y).backward()
    assert np.allclose(x.grad, [5.0])


def test_operator_sugar_with_scalars():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    y = ag.tsum(2.0 * x + 1.0 - (-x) * 0.5)
    y.backward()
    assert np.allclose(x.grad, [2.5, 2.5])
    assert y.item() == pytest.approx(9.5)


def test_no_grad_builds_no_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    with ag.no_grad():
        y = ag.tsum(ag.tanh(x))
    assert y.requires_grad is False
    assert y._parents == ()
    assert ag.grad_enabled() is True


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        ag.tanh(x).backward()


def test_constants_collect_no_gradient():
    x = Tensor(np.ones(3), requires_grad=True)
    c = Tensor(np.full(3, 2.0))
    ag.tsum(ag.mul(x, c)).backward()
    assert c.grad is None
    assert np.allclose(x.grad, 2.0)
