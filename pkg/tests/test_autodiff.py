import gc
import weakref
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gannoise.autodiff import OP_KINDS, GradientMap, Tape, backward, finite_diff_check, grad_of_grad
from gannoise.errors import ContractError, DimensionError, DomainError
from gannoise.losses import GpConfig, critic_penalty
from gannoise.models import MlpSpec, init_mlp, mlp_forward
from op_cases import OP_CASES, covered_kinds

finite = st.floats(-10, 10, allow_nan=False, width=64)


def test_forward_examples():
    t = Tape()
    out = t.constant([[1.0, 2.0], [3.0, 4.0]]) @ t.constant([[1.0], [1.0]])
    assert out.value.tolist() == [[3.0], [7.0]]
    assert t.constant([-1.0, 0.0, 2.0]).relu().value.tolist() == [0.0, 0.0, 2.0]
    assert float(t.constant(0.0).sigmoid().value) == 0.5


def test_forward_errors():
    t = Tape()
    with pytest.raises(DimensionError):
        t.constant(np.ones((2, 3))) @ t.constant(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        t.constant(np.ones(3)) + t.constant(np.ones(4))
    with pytest.raises(DomainError):
        t.constant([1.0, -1.0]).log()
    with pytest.raises(DomainError):
        t.constant([1.0, 0.0]).log()
    with pytest.raises(ContractError):
        t.apply("no_such_op", t.constant(1.0))


def test_non_finite_values_rejected():
    t = Tape()
    with pytest.raises(DomainError):
        t.leaf([1.0, np.nan])
    with pytest.raises(DomainError):
        t.constant([800.0]).exp()


def test_tape_is_topologically_ordered():
    t = Tape()
    x = t.leaf([1.0, 2.0])
    y = (x * x).sum() + x.mean()
    backward(y, create_graph=True)
    for node in t.nodes:
        assert all(inp.id < node.id for inp in node.inputs)


def test_backward_examples():
    t = Tape()
    x = t.leaf(3.0)
    assert float(backward(x * x)[x]) == 6.0

    t = Tape()
    w = t.leaf(np.ones((2, 2)))
    f = (w @ t.constant([[1.0], [2.0]])).sum()
    assert backward(f)[w].tolist() == [[1.0, 2.0], [1.0, 2.0]]


def test_backward_needs_scalar_root():
    t = Tape()
    x = t.leaf([1.0, 2.0])
    with pytest.raises(ContractError):
        backward(x * x)


def test_gradient_map_keys_and_shapes():
    t = Tape()
    x = t.leaf(np.ones((2, 3)))
    unused = t.leaf(np.ones(4))
    y = (x.square() * 2.0).sum()
    grads = backward(y)
    assert isinstance(grads, GradientMap)
    assert grads[x].shape == (2, 3)
    assert np.array_equal(grads[x], grads[x.id])
    assert unused not in grads or np.all(grads[unused] == 0)


def test_mlp_gradient_matches_finite_differences():
    spec = MlpSpec((3, 6, 5, 1), "tanh", "identity")
    params = init_mlp(spec, np.random.default_rng(1))
    arrays = params.arrays()
    x = np.random.default_rng(2).normal(size=(4, 3))
    # perturb the zero biases so their gradients are generic
    arrays = [a + 0.1 * np.random.default_rng(i).normal(size=a.shape) for i, a in enumerate(arrays)]

    for i in range(len(arrays)):

        def f(t, leaf, i=i):
            vals = [leaf if j == i else t.constant(a) for j, a in enumerate(arrays)]
            bound = list(zip(vals[0::2], vals[1::2]))
            return mlp_forward(bound, spec, x, t).sum()

        assert finite_diff_check(f, arrays[i]) < 1e-4


def test_grad_of_grad_cubic():
    t = Tape()
    x = t.leaf(2.0)
    assert float(grad_of_grad(t, x * x * x, x, x)) == pytest.approx(12.0, abs=1e-12)


def test_linear_critic_penalty_gradient_closed_form():
    t = Tape()
    w = t.leaf([[3.0], [4.0]])
    x = np.random.default_rng(0).normal(size=(6, 2))
    penalty = critic_penalty(lambda xv: xv @ w, x, GpConfig(1.0), t)
    assert np.allclose(backward(penalty)[w].ravel(), [4.8, 6.4], atol=1e-10)


def test_mlp_critic_penalty_gradient_vs_finite_differences():
    spec = MlpSpec((2, 8, 1), "tanh", "identity")
    params = init_mlp(spec, np.random.default_rng(3))
    w1, b1, w2, b2 = params.arrays()
    x = np.random.default_rng(4).normal(size=(5, 2))

    def penalty(t, theta):
        # theta is the first-layer weight matrix; the rest stays fixed
        critic = lambda xv: t.apply("add_row", t.apply("add_row", xv @ theta.T, t.constant(b1)).tanh() @ t.constant(w2.T), t.constant(b2))  # noqa: E731
        return critic_penalty(critic, x, GpConfig(10.0), t)

    assert finite_diff_check(penalty, w1) < 1e-3


def test_finite_diff_check_examples():
    assert finite_diff_check(lambda t, x: (x * x).sum(), np.array([3.0]), h=1e-5) < 1e-8
    m = np.random.default_rng(0).normal(size=(3, 3))
    assert finite_diff_check(lambda t, x: (t.constant(m) @ x).sigmoid().sum(), np.random.default_rng(1).normal(size=(3, 3))) < 1e-4
    assert finite_diff_check(lambda t, x: (x * 0.0).sum() + 5.0, np.ones(3)) == 0.0
    with pytest.raises(ContractError):
        finite_diff_check(lambda t, x: x.sum(), np.ones(2), h=0.0)


def test_finite_diff_check_non_finite_raises():
    with pytest.raises(DomainError):
        finite_diff_check(lambda t, x: x.log().sum(), np.array([1e-7]), h=1e-5)


def test_every_op_kind_has_a_case():
    assert set(OP_KINDS) <= covered_kinds()


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_op_gradients(name):
    sample, f = OP_CASES[name]
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    for _ in range(20):
        point = sample(rng)
        t = Tape()
        x = t.leaf(point)
        analytic = backward(f(t, x))[x]
        err = finite_diff_check(f, point)
        # relative error, or absolute noise for entries that are nearly zero
        assert err < 1e-4 or _abs_close(f, point, analytic)


def _abs_close(f, point, analytic, h=1e-5):
    numeric = np.empty_like(point)
    for idx in np.ndindex(point.shape):
        up, down = point.copy(), point.copy()
        up[idx] += h
        down[idx] -= h
        t1, t2 = Tape(), Tape()
        numeric[idx] = (float(f(t1, t1.leaf(up)).value) - float(f(t2, t2.leaf(down)).value)) / (2 * h)
    return np.allclose(analytic, numeric, rtol=1e-4, atol=1e-8)


def test_double_backward_of_squared_norm():
    t = Tape()
    x = t.leaf([1.0, -2.0, 0.5])
    y = x.square().sum()
    for i in range(3):
        probe = np.eye(3)[i]
        hv = grad_of_grad(t, y, x, x, reduce=lambda g: (g * t.constant(probe)).sum())
        assert hv[i] == pytest.approx(2.0, abs=1e-12)


def test_replay_after_backward():
    t = Tape()
    x = t.leaf(np.random.default_rng(0).normal(size=(3, 4)))
    w = t.leaf(np.random.default_rng(1).normal(size=(4, 2)))
    y = (x @ w).tanh().l2_norm(axis=1, eps=1e-12).mean()
    before = [n.value.copy() for n in t.nodes]
    backward(y, create_graph=True)
    assert t.replay()
    assert all(np.array_equal(a, n.value) for a, n in zip(before, t.nodes))


def test_values_are_read_only():
    t = Tape()
    x = t.leaf([1.0, 2.0])
    with pytest.raises(ValueError):
        x.value[0] = 5.0


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 5, elements=finite), st.floats(-3, 3), st.floats(-3, 3))
def test_gradient_linearity(point, a, b):
    def grads(fn):
        t = Tape()
        x = t.leaf(point)
        return backward(fn(t, x))[x]

    f = lambda t, x: x.tanh().sum()  # noqa: E731
    g = lambda t, x: x.square().mean()  # noqa: E731
    combined = grads(lambda t, x: f(t, x) * a + g(t, x) * b)
    assert np.allclose(combined, a * grads(f) + b * grads(g), rtol=1e-12, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 2), elements=finite))
def test_forward_is_deterministic(point):
    outs = []
    for _ in range(2):
        t = Tape()
        outs.append((t.leaf(point) @ t.constant(np.ones((2, 2)))).sigmoid().value)
    assert np.array_equal(outs[0], outs[1])


def test_l2_norm_gradient_at_zero_is_zero():
    t = Tape()
    x = t.leaf(np.zeros(3))
    assert np.array_equal(backward(x.l2_norm())[x], np.zeros(3))


def test_release_frees_arrays_without_the_cycle_collector():
    gc.disable()
    try:
        t = Tape()
        x = t.leaf(np.ones((50, 50)))
        hidden = (x * x).sum()
        probe = weakref.ref(hidden.value)
        grads = backward(hidden)
        del hidden
        t.release()
        assert probe() is None
        assert np.array_equal(grads[x], 2 * np.ones((50, 50)))
    finally:
        gc.enable()


def test_backward_on_released_tape_raises():
    t = Tape()
    y = t.leaf([1.0, 2.0]).square().sum()
    t.release()
    with pytest.raises(ContractError, match="released"):
        backward(y)
