"""The reverse-mode tape: primitive gradients and bookkeeping."""

import numpy as np
import pytest

from cfisac import autodiff as ad


def fd_check(build, params, tol=1e-7):
    err = ad.finite_difference_check(build, params)
    assert err < tol, f"finite-difference mismatch {err}"


def test_add_mul_chain():
    def build(p):
        tape = ad.Tape()
        x = tape.parameter("x", p["x"])
        y = tape.parameter("y", p["y"])
        z = ad.elementwise_mul(ad.add(x, y), x)
        return tape, ad.sum_reduce(z)

    rng = np.random.default_rng(0)
    fd_check(build, {"x": rng.normal(size=(3, 4)), "y": rng.normal(size=(3, 4))})


def test_broadcasting_gradients():
    def build(p):
        tape = ad.Tape()
        x = tape.parameter("x", p["x"])          # (3, 4)
        b = tape.parameter("b", p["b"])          # (4,)
        z = ad.divide(ad.add(x, b), tape.constant(np.full((3, 4), 2.0)))
        return tape, ad.sum_reduce(ad.square(z))

    rng = np.random.default_rng(1)
    fd_check(build, {"x": rng.normal(size=(3, 4)), "b": rng.normal(size=4)})


def test_matmul_gradient():
    def build(p):
        tape = ad.Tape()
        a = tape.parameter("a", p["a"])
        b = tape.parameter("b", p["b"])
        return tape, ad.sum_reduce(ad.square(ad.matmul(a, b)))

    rng = np.random.default_rng(2)
    fd_check(build, {"a": rng.normal(size=(3, 5)), "b": rng.normal(size=(5, 2))})


def test_matmul_rejects_batched():
    tape = ad.Tape()
    a = tape.constant(np.zeros((2, 3, 4)))
    b = tape.constant(np.zeros((4, 5)))
    with pytest.raises(ad.AutodiffError):
        ad.matmul(a, b)


def test_concat_and_slice():
    def build(p):
        tape = ad.Tape()
        x = tape.parameter("x", p["x"])
        y = tape.parameter("y", p["y"])
        z = ad.concat([x, y], axis=1)
        top = ad.slice_(z, (slice(0, 2), slice(1, 5)))
        return tape, ad.sum_reduce(ad.square(top))

    rng = np.random.default_rng(3)
    fd_check(build, {"x": rng.normal(size=(2, 3)), "y": rng.normal(size=(2, 3))})


def test_reductions_and_reshape():
    def build(p):
        tape = ad.Tape()
        x = tape.parameter("x", p["x"])
        s = ad.sum_reduce(ad.reshape(x, (2, 6)), axis=1, keepdims=True)
        return tape, ad.sum_reduce(ad.square(s))

    fd_check(build, {"x": np.random.default_rng(4).normal(size=(3, 4))})


def test_sqrt_log_leaky_relu():
    def build(p):
        tape = ad.Tape()
        x = tape.parameter("x", p["x"])
        pos = ad.add(ad.square(x), tape.constant(np.full(x.shape, 0.5)))
        y = ad.add(ad.sqrt(pos), ad.natural_log(pos))
        return tape, ad.sum_reduce(ad.leaky_relu(y, 0.1))

    fd_check(build, {"x": np.random.default_rng(5).normal(size=6)})


def test_leaky_relu_negative_side():
    tape = ad.Tape()
    x = tape.parameter("x", np.array([-2.0, 3.0]))
    y = ad.leaky_relu(x, 0.1)
    assert np.allclose(y.data, [-0.2, 3.0])
    g = ad.backward(tape, ad.sum_reduce(y))
    assert np.allclose(g["x"], [0.1, 1.0])


def test_sqrt_rejects_nonpositive():
    tape = ad.Tape()
    x = tape.constant(np.array([1.0, 0.0]))
    with pytest.raises(ad.AutodiffError):
        ad.sqrt(x)


def test_value_reuse_accumulates():
    # a value feeding two consumers must receive both gradient contributions
    tape = ad.Tape()
    x = tape.parameter("x", np.array([2.0]))
    y = ad.add(ad.square(x), ad.scalar_mul(x, 3.0))   # x^2 + 3x
    g = ad.backward(tape, ad.sum_reduce(y))
    assert np.allclose(g["x"], [7.0])                 # 2x + 3


def test_unused_parameter_gets_zeros():
    tape = ad.Tape()
    x = tape.parameter("x", np.ones(3))
    u = tape.parameter("unused", np.ones((2, 2)))
    g = ad.backward(tape, ad.sum_reduce(ad.square(x)))
    assert np.array_equal(g["unused"], np.zeros((2, 2)))


def test_duplicate_parameter_name():
    tape = ad.Tape()
    tape.parameter("w", np.ones(2))
    with pytest.raises(ad.AutodiffError):
        tape.parameter("w", np.ones(2))


def test_nonscalar_loss_rejected():
    tape = ad.Tape()
    x = tape.parameter("x", np.ones(3))
    with pytest.raises(ad.AutodiffError):
        ad.backward(tape, ad.square(x))


def test_mixed_tapes_rejected():
    t1, t2 = ad.Tape(), ad.Tape()
    with pytest.raises(ad.AutodiffError):
        ad.add(t1.constant(np.ones(2)), t2.constant(np.ones(2)))


def test_clear_releases_records():
    tape = ad.Tape()
    x = tape.parameter("x", np.ones(4))
    ad.sum_reduce(ad.square(x))
    assert tape._nodes
    tape.clear()
    assert not tape._nodes
    assert not tape.parameters
