"""Sample-quality measures: Frechet distance, histogram JSD, FID and IS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError
from .linalg import SYMMETRY_TOL, psd_eigenvalues, psd_sqrt

JSD_BINS = 200
JSD_SMOOTHING = 1e-12
IS_SPLITS = 10
LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class GaussianStats:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        if mu.ndim != 1 or sigma.shape != (mu.size, mu.size):
            raise DimensionError(f"mean {mu.shape} and covariance {sigma.shape} disagree")
        if np.max(np.abs(sigma - sigma.T), initial=0.0) > SYMMETRY_TOL * (1.0 + np.max(np.abs(sigma))):
            raise ContractError("covariance is not symmetric")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self):
        return self.mu.size


def empirical_gaussian_stats(samples) -> GaussianStats:
    """Sample mean and unbiased covariance of the rows of ``samples``."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 2:
        raise ContractError("need at least 2 samples")
    mu = x.mean(axis=0)
    centered = x - mu
    sigma = centered.T @ centered / (x.shape[0] - 1)
    return GaussianStats(mu, (sigma + sigma.T) / 2.0)


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).

    The cross term uses the symmetric product, which has the same trace as
    the square root of S_a S_b but stays inside symmetric PSD arithmetic.
    """
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.mu - b.mu
    root_a = psd_sqrt(a.sigma)
    middle = root_a @ b.sigma @ root_a
    cross = np.sum(np.sqrt(psd_eigenvalues((middle + middle.T) / 2.0)))
    fd = float(diff @ diff + np.trace(a.sigma) + np.trace(b.sigma) - 2.0 * cross)
    return max(fd, 0.0)


def default_jsd_range(samples_p, samples_q, width=3.0):
    """Pooled mean +/- ``width`` pooled standard deviations."""
    pooled = np.concatenate([np.ravel(samples_p), np.ravel(samples_q)])
    center = float(pooled.mean())
    spread = float(pooled.std())
    if spread == 0.0:
        spread = 1.0
    return center - width * spread, center + width * spread


def _histogram(x, bins, lo, hi):
    # out-of-range points land in the edge bins
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(np.int64)
    return np.bincount(np.clip(idx, 0, bins - 1), minlength=bins).astype(np.float64)


def jsd_histogram(samples_p, samples_q, bins=JSD_BINS, range=None) -> float:
    """Jensen-Shannon divergence (nats) of two 1-D sample sets on a shared grid."""
    p_x = np.ravel(np.asarray(samples_p, dtype=np.float64))
    q_x = np.ravel(np.asarray(samples_q, dtype=np.float64))
    if p_x.size == 0 or q_x.size == 0:
        raise ContractError("both sample sets must be non-empty")
    if bins < 2:
        raise ContractError("need at least 2 bins")
    lo, hi = range if range is not None else default_jsd_range(p_x, q_x)
    if not lo < hi:
        raise ContractError(f"empty histogram range [{lo}, {hi}]")
    p = _histogram(p_x, bins, lo, hi) + JSD_SMOOTHING
    q = _histogram(q_x, bins, lo, hi) + JSD_SMOOTHING
    p /= p.sum()
    q /= q.sum()
    m = (p + q) / 2.0
    value = 0.5 * np.sum(p * np.log(p / m)) + 0.5 * np.sum(q * np.log(q / m))
    return float(min(max(value, 0.0), LN2))


def inception_score_from_probs(probs, splits=IS_SPLITS):
    """exp(E_x KL(p(y|x) || p(y))) per split; returns (mean, variance) across splits."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise DimensionError(f"class probabilities must be 2-D, got {probs.shape}")
    n, k = probs.shape
    if splits < 1 or splits > n:
        raise ContractError(f"cannot split {n} samples into {splits} groups")
    scores = []
    for part in np.array_split(probs, splits):
        if len(part) < 2:
            raise ContractError(f"each split needs >= 2 samples; {n} samples / {splits} splits")
        marginal = part.mean(axis=0)
        safe = np.where(part > 0, part, 1.0)
        kl = np.sum(np.where(part > 0, part * np.log(safe / np.where(marginal > 0, marginal, 1.0)), 0.0), axis=1)
        scores.append(float(np.clip(np.exp(kl.mean()), 1.0, k)))
    scores = np.asarray(scores)
    return float(scores.mean()), float(scores.var())


def inception_score(embedder, fake, splits=IS_SPLITS):
    return inception_score_from_probs(embedder.predict_proba(fake), splits)


def fid(embedder, real, fake) -> float:
    """Frechet distance between embedder features of two image batches."""
    real_stats = empirical_gaussian_stats(embedder.features(real))
    fake_stats = empirical_gaussian_stats(embedder.features(fake))
    return frechet_distance(real_stats, fake_stats)
