"""Qualitative dumps of a trained generator: PGM digits or a 1-D histogram."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import GaussianDataSpec, NoiseSpec, sample_gaussian_data, sample_noise
from .errors import ContractError, FormatError
from .experiment import DATASET_DEFAULTS, MNIST_PIXELS
from .models import MlpSpec, load_params, mlp_apply
from .rng import stream

PGM_SIDE = 28
HIST_BINS = 50


def to_pixels(x) -> np.ndarray:
    """Map generator output in [-1, 1] to bytes 0..255."""
    return np.clip(np.rint((np.asarray(x) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def write_pgm(path, image):
    pixels = to_pixels(image).reshape(PGM_SIDE, PGM_SIDE)
    Path(path).write_bytes(f"P5\n{PGM_SIDE} {PGM_SIDE}\n255\n".encode("ascii") + pixels.tobytes())


def _generator_spec(params, dataset):
    widths = params.widths()
    want = 1 if dataset == "gaussian" else MNIST_PIXELS
    if widths[-1] != want:
        raise FormatError(f"checkpoint produces width {widths[-1]}, {dataset} needs {want}")
    output = "identity" if dataset == "gaussian" else "tanh"
    return MlpSpec(widths, DATASET_DEFAULTS[dataset]["g_activation"], output)


def dump_samples(checkpoint, dataset, n, out_dir, seed=0, noise_dist="standard_normal",
                 gaussian: GaussianDataSpec = None, bins=HIST_BINS):  # fmt: skip
    """Write ``n`` generated digits as PGM files, or histograms of ``n``
    generated and ``n`` real Gaussian samples over shared bins (two files,
    ``bin_center count`` per line).

    The generator's hidden activation is taken from the dataset defaults
    because the checkpoint format stores weights only.  Returns the list of
    written paths.
    """
    if dataset not in ("gaussian", "mnist"):
        raise ContractError(f"unknown dataset {dataset!r}")
    if n < 1:
        raise ContractError("n must be positive")
    params = load_params(checkpoint)
    spec = _generator_spec(params, dataset)
    noise = NoiseSpec(spec.input_width, noise_dist)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fake = mlp_apply(params, spec, sample_noise(noise, n, stream(seed, "dump:noise")))

    if dataset == "mnist":
        paths = []
        for i, image in enumerate(fake):
            path = out_dir / f"sample_{i:04d}.pgm"
            write_pgm(path, image)
            paths.append(path)
        return paths

    spec_real = gaussian or GaussianDataSpec.unimodal()
    real = sample_gaussian_data(spec_real, n, stream(seed, "dump:real"))
    lo = float(min(fake.min(), real.min()))
    hi = float(max(fake.max(), real.max()))
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    fake_counts, _ = np.histogram(fake, edges)
    real_counts, _ = np.histogram(real, edges)
    centers = (edges[:-1] + edges[1:]) / 2.0
    paths = []
    for name, counts in (("generated", fake_counts), ("real", real_counts)):
        path = out_dir / f"histogram_{name}.txt"
        path.write_text("".join(f"{c:.6g} {k}\n" for c, k in zip(centers, counts)))
        paths.append(path)
    return paths
