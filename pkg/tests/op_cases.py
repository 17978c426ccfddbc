"""Scalar test functions exercising each tape op, for finite-difference checks.

Each case is (point_sampler(rng), f(tape, x) -> scalar Var).  Points keep a
margin from kinks (relu, clip) and from the log/reciprocal poles, so central
differences are accurate.
"""

import numpy as np


def _away_from(values, kinks, margin=1e-2):
    for k in kinks:
        close = np.abs(values - k) < margin
        values = np.where(close, k + np.where(values >= k, margin, -margin), values)
    return values


def _uniform(shape, lo=-2.0, hi=2.0, kinks=()):
    def sample(rng):
        return _away_from(rng.uniform(lo, hi, shape), kinks)

    return sample


def _signed(shape, lo=0.5, hi=2.0):
    def sample(rng):
        return rng.uniform(lo, hi, shape) * rng.choice([-1.0, 1.0], shape)

    return sample


def _weighted(y):
    # fixed weights make each output entry contribute a distinct amount
    w = np.linspace(0.5, 1.5, y.value.size).reshape(y.value.shape)
    return (y * y.tape.constant(w)).sum()


def _unary(kind, **attrs):
    return lambda t, x: _weighted(t.apply(kind, x, **attrs))


def _halves(x):
    t = x.tape
    return t.apply("slice", x, axis=0, start=0, stop=2), t.apply("slice", x, axis=0, start=2, stop=4)


def _binary(kind):
    def f(t, x):
        a, b = _halves(x)
        return _weighted(t.apply(kind, a, b))

    return f


def _scalar_tensor(kind):
    def f(t, x):
        a = t.apply("sum", t.apply("slice", x, axis=0, start=0, stop=1))
        b = t.apply("slice", x, axis=0, start=1, stop=4)
        return _weighted(t.apply(kind, a, b)) + _weighted(t.apply(kind, b, a))

    return f


def _matmul(t, x):
    a = t.apply("slice", x, axis=0, start=0, stop=3)
    b = t.apply("transpose", t.apply("slice", x, axis=0, start=3, stop=7))
    return _weighted(t.apply("matmul", a, b))


def _add_row(t, x):
    a = t.apply("slice", x, axis=0, start=0, stop=3)
    b = t.apply("sum", t.apply("slice", x, axis=0, start=3, stop=4), axis=0)
    return _weighted(t.apply("add_row", a, b))


def _concat(t, x):
    a, b = _halves(x)
    return _weighted(t.apply("concat", a, t.apply("square", b), axis=1))


def _broadcast_scalar(t, x):
    return _weighted(t.apply("broadcast", _weighted(x), shape=(2, 3)))


def _nested(t, x):
    # a small MLP-like composition that mixes most ops
    h = t.apply("tanh", t.apply("matmul", x, t.constant(np.linspace(-1, 1, 12).reshape(4, 3))))
    z = t.apply("log_softmax", h)
    return _weighted(t.apply("sigmoid", z)) + t.apply("l2_norm", h)


OP_CASES = {
    "add": (_uniform((4, 3)), _binary("add")),
    "add/scalar": (_uniform((4, 3)), _scalar_tensor("add")),
    "sub": (_uniform((4, 3)), _binary("sub")),
    "sub/scalar": (_uniform((4, 3)), _scalar_tensor("sub")),
    "mul": (_uniform((4, 3)), _binary("mul")),
    "mul/scalar": (_uniform((4, 3)), _scalar_tensor("mul")),
    "matmul": (_uniform((7, 4)), _matmul),
    "transpose": (_uniform((3, 4)), _unary("transpose")),
    "relu": (_uniform((3, 4), kinks=(0.0,)), _unary("relu")),
    "leaky_relu": (_uniform((3, 4), kinks=(0.0,)), _unary("leaky_relu", alpha=0.2)),
    "sigmoid": (_uniform((3, 4), -4, 4), _unary("sigmoid")),
    "tanh": (_uniform((3, 4)), _unary("tanh")),
    "log": (_uniform((3, 4), 0.2, 3.0), _unary("log")),
    "exp": (_uniform((3, 4)), _unary("exp")),
    "square": (_uniform((3, 4)), _unary("square")),
    "reciprocal": (_signed((3, 4)), _unary("reciprocal")),
    "affine": (_uniform((3, 4)), _unary("affine", scale=-1.7, shift=0.3)),
    "sum": (_uniform((3, 4)), lambda t, x: t.apply("sum", t.apply("square", x))),
    "sum/axis0": (_uniform((3, 4)), _unary("sum", axis=0)),
    "sum/axis1": (_uniform((3, 4)), _unary("sum", axis=1)),
    "mean": (_uniform((3, 4)), lambda t, x: t.apply("mean", t.apply("exp", x))),
    "mean/axis0": (_uniform((3, 4)), _unary("mean", axis=0)),
    "mean/axis1": (_uniform((3, 4)), _unary("mean", axis=1)),
    "broadcast": (_uniform((3,)), _unary("broadcast", shape=(3, 4), axis=1)),
    "broadcast/scalar": (_uniform((3,)), _broadcast_scalar),
    "l2_norm": (_signed((3, 4)), _unary("l2_norm")),
    "l2_norm/axis1": (_signed((3, 4)), _unary("l2_norm", axis=1, eps=1e-12)),
    "concat": (_uniform((4, 3)), _concat),
    "slice": (_uniform((3, 5)), _unary("slice", axis=1, start=1, stop=4)),
    "pad": (_uniform((3, 2)), _unary("pad", axis=1, before=2, after=1)),
    "add_row": (_uniform((4, 5)), _add_row),
    "log_softmax": (_uniform((3, 5)), _unary("log_softmax")),
    "clip": (_uniform((3, 4), kinks=(-0.5, 0.5)), _unary("clip", lo=-0.5, hi=0.5)),
    "composite": (_uniform((5, 4)), _nested),
}


def covered_kinds():
    return {name.split("/")[0] for name in OP_CASES}
