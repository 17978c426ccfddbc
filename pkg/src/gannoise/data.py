"""Datasets: 1-D Gaussian mixtures, MNIST IDX files, and input noise."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ContractError, FormatError, LengthError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
MNIST_DIR_ENV = "GANNOISE_MNIST_DIR"

NOISE_DISTS = ("standard_normal", "uniform_pm1")


@dataclass(frozen=True)
class GaussianDataSpec:
    """A one- or two-component 1-D Gaussian mixture."""

    means: tuple
    variances: tuple
    mix_weights: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "variances", tuple(float(v) for v in self.variances))
        object.__setattr__(self, "mix_weights", tuple(float(w) for w in self.mix_weights))
        k = len(self.means)
        if k not in (1, 2):
            raise ContractError(f"modes must be 1 or 2, got {k}")
        if len(self.variances) != k or len(self.mix_weights) != k:
            raise ContractError("means, variances and mix_weights must have equal length")
        if any(v <= 0 for v in self.variances):
            raise ContractError("variances must be positive")
        if any(w < 0 for w in self.mix_weights) or abs(sum(self.mix_weights) - 1.0) > 1e-12:
            raise ContractError("mix_weights must be non-negative and sum to 1")

    @property
    def modes(self):
        return len(self.means)

    @classmethod
    def unimodal(cls, mean=0.0, variance=4.0):
        return cls((mean,), (variance,), (1.0,))

    @classmethod
    def bimodal(cls, separation=3.0, variance=1.0):
        """Equal-weight modes at -separation and +separation."""
        return cls((-separation, separation), (variance, variance), (0.5, 0.5))

    def to_dict(self):
        return {
            "means": list(self.means),
            "variances": list(self.variances),
            "mix_weights": list(self.mix_weights),
        }


@dataclass(frozen=True)
class NoiseSpec:
    dim: int
    dist: str = "standard_normal"

    def __post_init__(self):
        if isinstance(self.dim, bool) or int(self.dim) != self.dim or self.dim < 1:
            raise ContractError(f"noise dim must be a positive integer, got {self.dim!r}")
        if self.dist not in NOISE_DISTS:
            raise ContractError(f"unknown noise dist {self.dist!r}; expected one of {NOISE_DISTS}")


@dataclass
class ImageDataset:
    images: np.ndarray  # (n, 784) in [-1, 1]
    labels: np.ndarray  # (n,) ints in [0, 9]
    split: str

    def __len__(self):
        return len(self.labels)


def sample_gaussian_data(spec: GaussianDataSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` points as an (n, 1) column.

    The draw protocol is the same for every mixture (one uniform for the mode,
    one normal for the offset) so a unimodal spec and a two-mode spec with
    weights ``[1, 0]`` produce identical samples from the same generator.
    """
    if n < 1:
        raise ContractError("n must be at least 1")
    u = rng.random(n)
    z = rng.standard_normal(n)
    cum = np.cumsum(spec.mix_weights)
    mode = np.minimum(np.searchsorted(cum, u, side="right"), spec.modes - 1)
    means = np.asarray(spec.means)[mode]
    stds = np.sqrt(np.asarray(spec.variances))[mode]
    return (means + stds * z).reshape(n, 1)


def sample_noise(spec: NoiseSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ContractError("n must be at least 1")
    if spec.dist == "standard_normal":
        return rng.standard_normal((n, spec.dim))
    return rng.uniform(-1.0, 1.0, (n, spec.dim))


def parse_idx(data: bytes) -> np.ndarray:
    """Decode one IDX file.

    Image files (magic 0x803) become an (n, rows*cols) float array scaled to
    [-1, 1]; label files (magic 0x801) become an int64 vector.
    """
    if len(data) < 4:
        raise LengthError("IDX header truncated", 4, len(data))
    (magic,) = struct.unpack(">I", data[:4])
    if magic == IDX_IMAGES_MAGIC:
        ndim = 3
    elif magic == IDX_LABELS_MAGIC:
        ndim = 1
    else:
        raise FormatError(f"bad IDX magic 0x{magic:08x}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise LengthError("IDX header truncated", header, len(data))
    dims = struct.unpack(f">{ndim}I", data[4:header])
    expected = header + int(np.prod(dims, dtype=np.int64))
    if len(data) != expected:
        raise LengthError("IDX payload length mismatch", expected, len(data))
    payload = np.frombuffer(data, dtype=np.uint8, offset=header)
    if ndim == 1:
        return payload.astype(np.int64)
    n, rows, cols = dims
    return payload.reshape(n, rows * cols).astype(np.float64) / 127.5 - 1.0


def resolve_mnist_dir(directory=None) -> Path:
    directory = directory or os.environ.get(MNIST_DIR_ENV)
    if not directory:
        raise FileNotFoundError(
            f"no MNIST directory given and {MNIST_DIR_ENV} is not set"
        )
    path = Path(directory)
    missing = [name for pair in MNIST_FILES.values() for name in pair if not (path / name).is_file()]
    if missing:
        raise FileNotFoundError(f"MNIST files missing under {path}: {', '.join(missing)}")
    return path


@lru_cache(maxsize=4)
def _load_split(directory: str, split: str) -> ImageDataset:
    image_file, label_file = MNIST_FILES[split]
    images = parse_idx((Path(directory) / image_file).read_bytes())
    labels = parse_idx((Path(directory) / label_file).read_bytes())
    if len(images) != len(labels):
        raise FormatError(f"{split}: {len(images)} images but {len(labels)} labels")
    images.flags.writeable = False
    labels.flags.writeable = False
    return ImageDataset(images, labels, split)


def load_mnist(directory=None, split: str = "train") -> ImageDataset:
    if split not in MNIST_FILES:
        raise ContractError(f"split must be 'train' or 'test', got {split!r}")
    return _load_split(str(resolve_mnist_dir(directory).resolve()), split)
