"""Noise-dimension studies for GANs on a small numpy autodiff engine."""

from .autodiff import OP_KINDS, Tape, Var, backward, finite_diff_check, grad_of_grad
from .data import (
    GaussianDataSpec,
    ImageDataset,
    NoiseSpec,
    load_mnist,
    parse_idx,
    sample_gaussian_data,
    sample_noise,
)
from .errors import (
    ConfigError,
    ContractError,
    DimensionError,
    DomainError,
    EmbedderQualityError,
    FormatError,
    GanNoiseError,
    LengthError,
    NonFiniteGradientError,
    NotPSDError,
)
from .estimators import GANSampler, MLPEmbedder
from .experiment import ExperimentConfig, MetricRecord, Sweep, load_config, parse_sweep
from .harness import run_sweep
from .metrics import (
    GaussianStats,
    empirical_gaussian_stats,
    fid,
    frechet_distance,
    inception_score,
    inception_score_from_probs,
    jsd_histogram,
)
from .linalg import psd_sqrt
from .models import MlpSpec, Parameters, init_mlp, load_params, mlp_apply, mlp_forward, save_params
from .trainer import TrainResult, fit_adversarial, train_run

__version__ = "0.1.0"
