"""Experiment and sweep configuration.

A sweep file is flat JSON: shared settings at the top level plus a ``grid``
object whose axes (``noise_dims``, ``dists``, ``losses``, ``seeds``) expand
to their cross product.  Every cell becomes a complete
:class:`ExperimentConfig` with all per-loss defaults resolved, and its
fingerprint hashes that resolved form, so key order in the file never
matters.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import List, Optional

from .data import NOISE_DISTS, GaussianDataSpec, NoiseSpec
from .errors import ConfigError, ContractError
from .losses import LOSS_FAMILIES
from .models import MlpSpec
from .optim import OPTIMIZER_KINDS

DATASETS = ("gaussian", "mnist")

CSV_COLUMNS = (
    "run_id", "fingerprint", "dataset", "loss", "noise_dim", "noise_dist", "seed", "step",
    "fd", "jsd", "fid", "is_mean", "is_var", "d_loss", "g_loss", "failed", "wall_ms",
)  # fmt: skip


@dataclass(frozen=True)
class TrainSchedule:
    total_steps: int
    batch_size: int
    n_critic: int = 1
    eval_every: int = 1000

    def __post_init__(self):
        if self.total_steps < 0:
            raise ContractError("total_steps must be >= 0")
        if self.batch_size < 1 or self.n_critic < 1 or self.eval_every < 1:
            raise ContractError("batch_size, n_critic and eval_every must be positive")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigError(f"unknown optimizer kind {self.kind!r}")
        if self.lr <= 0:
            raise ConfigError("optimizer lr must be positive")


# the usual settings for each loss family in the GAN and WGAN literature
LOSS_DEFAULTS = {
    "gan_nonsat": (OptimizerConfig("adam", 2e-4, 0.5, 0.999), 1),
    "wgan_gp": (OptimizerConfig("adam", 1e-4, 0.0, 0.9), 5),
    "wgan_clip": (OptimizerConfig("adam", 5e-5, 0.5, 0.999), 5),
}

DATASET_DEFAULTS = {
    "gaussian": dict(
        total_steps=3000, batch_size=256, eval_every=1000, eval_samples=10_000,
        g_hidden=(32, 32), d_hidden=(32, 32),
        g_activation="relu", d_activation="relu",
    ),
    "mnist": dict(
        total_steps=10_000, batch_size=64, eval_every=2500, eval_samples=5000,
        g_hidden=(256, 512), d_hidden=(512, 256),
        g_activation="relu", d_activation="leaky_relu",
    ),
}  # fmt: skip

MNIST_PIXELS = 784


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep cell."""

    dataset: str
    loss: str
    noise: NoiseSpec
    schedule: TrainSchedule
    optimizer: OptimizerConfig
    seed: int
    gaussian: Optional[GaussianDataSpec] = None
    eval_samples: int = 10_000
    jsd_bins: int = 200
    is_splits: int = 10
    gp_lambda: float = 10.0
    clip_c: float = 0.01
    g_hidden: tuple = (32, 32)
    d_hidden: tuple = (32, 32)
    g_activation: str = "relu"
    d_activation: str = "relu"
    # locations, not part of the experiment identity
    mnist_dir: Optional[str] = field(default=None, compare=False)
    embedder_path: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if self.loss not in LOSS_FAMILIES:
            raise ConfigError(f"unknown loss {self.loss!r}; expected one of {LOSS_FAMILIES}")
        if self.dataset == "gaussian" and self.gaussian is None:
            raise ConfigError("gaussian dataset needs a 'gaussian' spec")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.eval_samples < 2:
            raise ConfigError("eval_samples must be >= 2")
        object.__setattr__(self, "g_hidden", tuple(int(w) for w in self.g_hidden))
        object.__setattr__(self, "d_hidden", tuple(int(w) for w in self.d_hidden))
        self.g_spec()
        self.d_spec()

    @property
    def data_width(self):
        return 1 if self.dataset == "gaussian" else MNIST_PIXELS

    @property
    def wasserstein(self):
        return self.loss != "gan_nonsat"

    def g_spec(self) -> MlpSpec:
        out = "identity" if self.dataset == "gaussian" else "tanh"
        widths = (self.noise.dim,) + self.g_hidden + (self.data_width,)
        return MlpSpec(widths, self.g_activation, out)

    def d_spec(self) -> MlpSpec:
        out = "identity" if self.wasserstein else "sigmoid"
        return MlpSpec((self.data_width,) + self.d_hidden + (1,), self.d_activation, out)

    @property
    def run_id(self):
        return f"{self.dataset}-{self.loss}-z{self.noise.dim}-{self.noise.dist}-s{self.seed}"

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("mnist_dir")
        d.pop("embedder_path")
        return d

    def canonical_text(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))

    @property
    def fingerprint(self) -> str:
        """128-bit hex digest of the canonical config text."""
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()[:32]


@dataclass(frozen=True)
class MetricRecord:
    run_id: str
    fingerprint: str
    dataset: str
    loss: str
    noise_dim: int
    noise_dist: str
    seed: int
    step: int
    fd: Optional[float] = None
    jsd: Optional[float] = None
    fid: Optional[float] = None
    is_mean: Optional[float] = None
    is_var: Optional[float] = None
    d_loss: Optional[float] = None
    g_loss: Optional[float] = None
    failed: bool = False
    wall_ms: Optional[int] = None

    @classmethod
    def for_config(cls, cfg: ExperimentConfig, step: int, **values):
        return cls(
            cfg.run_id, cfg.fingerprint, cfg.dataset, cfg.loss,
            cfg.noise.dim, cfg.noise.dist, cfg.seed, step, **values,
        )  # fmt: skip

    def to_row(self, strip_timing=False) -> List[str]:
        row = []
        for name in CSV_COLUMNS:
            value = getattr(self, name)
            if name == "wall_ms" and strip_timing:
                value = None
            if value is None:
                row.append("")
            elif isinstance(value, bool):
                row.append("1" if value else "0")
            elif isinstance(value, float):
                row.append(repr(value))
            else:
                row.append(str(value))
        return row


@dataclass
class Sweep:
    cells: List[ExperimentConfig]
    source: Optional[str] = None

    def __len__(self):
        return len(self.cells)


_TOP_KEYS = {
    "dataset", "gaussian", "total_steps", "batch_size", "n_critic", "eval_every",
    "optimizer", "eval_samples", "jsd_bins", "is_splits", "gp_lambda", "clip_c",
    "g_hidden", "d_hidden", "g_activation", "d_activation", "mnist_dir", "embedder", "grid",
}  # fmt: skip
_GRID_KEYS = {"noise_dims", "dists", "losses", "seeds"}
_GAUSSIAN_KEYS = {"means", "variances", "mix_weights"}
_OPTIMIZER_KEYS = {"kind", "lr", "beta1", "beta2", "eps"}


def _reject_unknown(mapping, allowed, where):
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def _axis(grid, key, default=None):
    if key not in grid:
        if default is None:
            raise ConfigError(f"grid.{key} is required")
        return default
    values = grid[key]
    if not isinstance(values, list) or not values:
        raise ConfigError(f"grid.{key} must be a non-empty list")
    return values


def _gaussian_spec(raw):
    if not isinstance(raw, dict):
        raise ConfigError("'gaussian' must be an object")
    _reject_unknown(raw, _GAUSSIAN_KEYS, "gaussian")
    means = raw.get("means", [0.0])
    k = len(means)
    weights = raw.get("mix_weights", [1.0 / k] * k)
    try:
        return GaussianDataSpec(tuple(means), tuple(raw.get("variances", [4.0] * k)), tuple(weights))
    except ContractError as exc:
        raise ConfigError(f"invalid gaussian spec: {exc}") from None


def _resolve_path(value, base_dir):
    if value is None:
        return None
    path = Path(value)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    return str(path)


def parse_sweep(raw: dict, base_dir=None) -> Sweep:
    """Expand a parsed sweep document into its cells."""
    if not isinstance(raw, dict):
        raise ConfigError("sweep config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "sweep config")
    dataset = raw.get("dataset", "gaussian")
    if dataset not in DATASETS:
        raise ConfigError(f"unknown dataset {dataset!r}")
    defaults = DATASET_DEFAULTS[dataset]
    grid = raw.get("grid")
    if not isinstance(grid, dict):
        raise ConfigError("sweep config needs a 'grid' object")
    _reject_unknown(grid, _GRID_KEYS, "grid")
    seeds = _axis(grid, "seeds")
    dims = _axis(grid, "noise_dims")
    dists = _axis(grid, "dists", ["standard_normal"])
    losses = _axis(grid, "losses", ["gan_nonsat"])
    for dist in dists:
        if dist not in NOISE_DISTS:
            raise ConfigError(f"unknown noise dist {dist!r}")
    for loss in losses:
        if loss not in LOSS_FAMILIES:
            raise ConfigError(f"unknown loss {loss!r}")

    overrides = raw.get("optimizer", {})
    if not isinstance(overrides, dict):
        raise ConfigError("'optimizer' must be an object")
    _reject_unknown(overrides, _OPTIMIZER_KEYS, "optimizer")
    gaussian = _gaussian_spec(raw.get("gaussian", {})) if dataset == "gaussian" else None

    cells = []
    for dim, dist, loss, seed in itertools.product(dims, dists, losses, seeds):
        base_opt, base_critic = LOSS_DEFAULTS[loss]
        try:
            cells.append(
                ExperimentConfig(
                    dataset=dataset,
                    loss=loss,
                    noise=NoiseSpec(dim, dist),
                    schedule=TrainSchedule(
                        raw.get("total_steps", defaults["total_steps"]),
                        raw.get("batch_size", defaults["batch_size"]),
                        raw.get("n_critic", base_critic),
                        raw.get("eval_every", defaults["eval_every"]),
                    ),
                    optimizer=replace(base_opt, **overrides),
                    seed=seed,
                    gaussian=gaussian,
                    eval_samples=raw.get("eval_samples", defaults["eval_samples"]),
                    jsd_bins=raw.get("jsd_bins", 200),
                    is_splits=raw.get("is_splits", 10),
                    gp_lambda=float(raw.get("gp_lambda", 10.0)),
                    clip_c=float(raw.get("clip_c", 0.01)),
                    g_hidden=tuple(raw.get("g_hidden", defaults["g_hidden"])),
                    d_hidden=tuple(raw.get("d_hidden", defaults["d_hidden"])),
                    g_activation=raw.get("g_activation", defaults["g_activation"]),
                    d_activation=raw.get("d_activation", defaults["d_activation"]),
                    mnist_dir=_resolve_path(raw.get("mnist_dir"), base_dir),
                    embedder_path=_resolve_path(raw.get("embedder"), base_dir),
                )
            )
        except ContractError as exc:
            raise ConfigError(str(exc)) from None
    return Sweep(cells)


def load_config(path) -> Sweep:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    sweep = parse_sweep(raw, base_dir=path.parent)
    sweep.source = str(path)
    return sweep
