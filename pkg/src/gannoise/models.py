"""Multi-layer perceptrons for the generator, discriminator and embedder."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from .autodiff import Tape, Var
from .errors import ContractError, DimensionError, FormatError, LengthError

HIDDEN_ACTIVATIONS = ("relu", "leaky_relu", "tanh")
OUTPUT_ACTIVATIONS = ("identity", "sigmoid", "tanh")

WEIGHTS_MAGIC = b"GNWT"
EMBEDDER_MAGIC = b"GNEM"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    leaky_slope: float = 0.2

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 3:
            raise ContractError("an MLP needs input, at least one hidden layer, and output")
        if any(w < 1 for w in widths):
            raise ContractError(f"layer widths must be >= 1, got {widths}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ContractError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ContractError(f"unknown output activation {self.output_activation!r}")

    @property
    def n_layers(self):
        return len(self.layer_widths) - 1

    @property
    def input_width(self):
        return self.layer_widths[0]

    @property
    def output_width(self):
        return self.layer_widths[-1]


@dataclass
class Parameters:
    """Per-layer weights (out x in) and biases (out,)."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    role: str = "generator"

    def arrays(self):
        """Flat list [W0, b0, W1, b1, ...] in optimizer order."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @classmethod
    def from_arrays(cls, arrays, role):
        return cls(list(arrays[0::2]), list(arrays[1::2]), role)

    def copy(self):
        return Parameters([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.role)

    def bind(self, tape: Tape, requires_grad=True):
        """Put every array on ``tape``; returns [(W, b), ...] as Vars."""
        return [
            (tape.leaf(w, requires_grad), tape.leaf(b, requires_grad))
            for w, b in zip(self.weights, self.biases)
        ]

    def widths(self):
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def equals(self, other):
        return len(self.weights) == len(other.weights) and all(
            np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays())
        )


def init_mlp(spec: MlpSpec, rng: np.random.Generator, role="generator") -> Parameters:
    """Xavier-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Parameters(weights, biases, role)


def _activate(x: Var, name, slope):
    if name == "relu":
        return x.relu()
    if name == "leaky_relu":
        return x.leaky_relu(slope)
    if name == "tanh":
        return x.tanh()
    if name == "sigmoid":
        return x.sigmoid()
    return x


def mlp_forward(params, spec: MlpSpec, x, tape: Tape, return_hidden=False):
    """Evaluate the network on a batch ``x`` of shape (n, input_width).

    ``params`` may be a :class:`Parameters` (bound to the tape as constants)
    or the list returned by :meth:`Parameters.bind`.  With ``return_hidden``
    the post-activation output of every hidden layer is returned as well.
    """
    layers = params.bind(tape, requires_grad=False) if isinstance(params, Parameters) else params
    if len(layers) != spec.n_layers:
        raise DimensionError(f"spec has {spec.n_layers} layers, parameters have {len(layers)}")
    h = tape.lift(x)
    if h.value.ndim != 2 or h.shape[1] != spec.input_width:
        raise DimensionError(f"input shape {h.shape} does not match width {spec.input_width}")
    hidden = []
    for i, (w, b) in enumerate(layers):
        h = tape.apply("add_row", h @ w.T, b)
        last = i == len(layers) - 1
        h = _activate(h, spec.output_activation if last else spec.hidden_activation, spec.leaky_slope)
        if not last:
            hidden.append(h)
    if return_hidden:
        return h, hidden
    return h


def mlp_apply(params: Parameters, spec: MlpSpec, x) -> np.ndarray:
    """Forward pass without keeping the tape around."""
    t = Tape()
    out = mlp_forward(params, spec, np.asarray(x, dtype=np.float64), t).value
    t.release()
    return out


# -- checkpoint format ------------------------------------------------------
# magic(4) | version u32 | layer count u32 | per layer: rows u32, cols u32,
# rows*cols f64 weights (row-major), rows f64 biases.  All little-endian.


def params_to_bytes(params: Parameters, magic=WEIGHTS_MAGIC) -> bytes:
    chunks = [magic, struct.pack("<II", CHECKPOINT_VERSION, len(params.weights))]
    for w, b in zip(params.weights, params.biases):
        rows, cols = w.shape
        chunks.append(struct.pack("<II", rows, cols))
        chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(chunks)


def params_from_bytes(data: bytes, magic=WEIGHTS_MAGIC, role="generator") -> Parameters:
    if len(data) < 12:
        raise LengthError("checkpoint header truncated", 12, len(data))
    if data[:4] != magic:
        raise FormatError(f"bad checkpoint magic {data[:4]!r}, expected {magic!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    offset = 12
    weights, biases = [], []
    for _ in range(count):
        if len(data) < offset + 8:
            raise LengthError("checkpoint layer header truncated", offset + 8, len(data))
        rows, cols = struct.unpack_from("<II", data, offset)
        offset += 8
        need = offset + 8 * (rows * cols + rows)
        if len(data) < need:
            raise LengthError("checkpoint layer payload truncated", need, len(data))
        w = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=offset)
        offset += 8 * rows * cols
        b = np.frombuffer(data, dtype="<f8", count=rows, offset=offset)
        offset += 8 * rows
        weights.append(w.reshape(rows, cols).astype(np.float64))
        biases.append(b.astype(np.float64))
    if offset != len(data):
        raise LengthError("checkpoint has trailing bytes", offset, len(data))
    for prev, nxt in zip(weights[:-1], weights[1:]):
        if nxt.shape[1] != prev.shape[0]:
            raise FormatError("checkpoint layer shapes do not chain")
    return Parameters(weights, biases, role)


def save_params(params: Parameters, path, magic=WEIGHTS_MAGIC):
    Path(path).write_bytes(params_to_bytes(params, magic))


def load_params(path, magic=WEIGHTS_MAGIC, role="generator") -> Parameters:
    return params_from_bytes(Path(path).read_bytes(), magic, role)
