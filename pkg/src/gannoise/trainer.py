"""Alternating (simultaneous) gradient descent for the three loss families.

Each generator update is preceded by ``n_critic`` discriminator updates.
During a discriminator update the generator weights enter the tape as
constants and vice versa, so only one network moves per step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from .autodiff import Tape, backward
from .data import NoiseSpec, load_mnist, sample_gaussian_data, sample_noise
from .errors import ContractError, DomainError
from .experiment import ExperimentConfig, MetricRecord, OptimizerConfig, TrainSchedule
from .losses import (
    GpConfig,
    LossReport,
    clip_weights,
    gan_d_loss,
    gan_g_loss_nonsaturating,
    gradient_penalty,
    interpolate_pairs,
    wgan_critic_value,
    wgan_g_loss,
)
from .metrics import empirical_gaussian_stats, fid, frechet_distance, inception_score, jsd_histogram
from .models import MlpSpec, Parameters, init_mlp, mlp_apply, mlp_forward, save_params
from .optim import OptimizerState, optimizer_step
from .rng import stream

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    g_params: Parameters
    d_params: Parameters
    step_log: List[LossReport] = field(default_factory=list)
    records: List[MetricRecord] = field(default_factory=list)
    failed: bool = False
    failure: Optional[str] = None

    @property
    def final(self) -> Optional[MetricRecord]:
        return self.records[-1] if self.records else None


def _grads_for(grads, bound):
    return [grads.get(v, np.zeros_like(v.value)) for pair in bound for v in pair]


def _new_optimizer(cfg: OptimizerConfig, params: Parameters):
    return OptimizerState.for_params(
        params.arrays(), kind=cfg.kind, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps
    )


def discriminator_step(loss, g_params, g_spec, d_params, d_spec, real, z, state, rng_interp, gp, clip_c):
    """One update of the discriminator/critic.  Returns (new d_params, LossReport fields)."""
    t = Tape()
    d_vars = d_params.bind(t)
    fake = mlp_apply(g_params, g_spec, z)
    real_scores = mlp_forward(d_vars, d_spec, real, t)
    fake_scores = mlp_forward(d_vars, d_spec, fake, t)
    gp_value = 0.0
    if loss == "gan_nonsat":
        objective = gan_d_loss(real_scores, fake_scores)
    else:
        objective = -wgan_critic_value(real_scores, fake_scores)
        if loss == "wgan_gp":
            x_tilde, _ = interpolate_pairs(real, fake, rng_interp)
            penalty = gradient_penalty(d_vars, d_spec, x_tilde, gp, t)
            gp_value = float(penalty.value)
            objective = objective + penalty
    grads = backward(objective)
    arrays, _ = optimizer_step(state, d_params.arrays(), _grads_for(grads, d_vars))
    new = Parameters.from_arrays(arrays, d_params.role)
    if loss == "wgan_clip":
        new = clip_weights(new, clip_c)
    stats = dict(
        d_loss=float(objective.value),
        gp_term=gp_value,
        d_real_mean=float(real_scores.value.mean()),
        d_fake_mean=float(fake_scores.value.mean()),
    )
    t.release()
    return new, stats


def generator_step(loss, g_params, g_spec, d_params, d_spec, z, state):
    t = Tape()
    g_vars = g_params.bind(t)
    fake = mlp_forward(g_vars, g_spec, z, t)
    scores = mlp_forward(d_params, d_spec, fake, t)
    objective = gan_g_loss_nonsaturating(scores) if loss == "gan_nonsat" else wgan_g_loss(scores)
    grads = backward(objective)
    arrays, _ = optimizer_step(state, g_params.arrays(), _grads_for(grads, g_vars))
    g_loss, fake_mean = float(objective.value), float(scores.value.mean())
    t.release()
    return Parameters.from_arrays(arrays, g_params.role), g_loss, fake_mean


def fit_adversarial(
    sample_real: Callable[[int, np.random.Generator], np.ndarray],
    data_width: int,
    noise: NoiseSpec,
    loss: str,
    schedule: TrainSchedule,
    g_spec: MlpSpec,
    d_spec: MlpSpec,
    optimizer: OptimizerConfig,
    seed: int,
    gp: GpConfig = GpConfig(),
    clip_c: float = 0.01,
    evaluate: Optional[Callable[[Parameters, int], dict]] = None,
    g_optimizer: Optional[OptimizerConfig] = None,
) -> TrainResult:
    """Train a generator/discriminator pair on batches drawn by ``sample_real``.

    ``evaluate(g_params, step)`` is called every ``schedule.eval_every``
    generator steps and once at the end; its dict is folded into the
    returned records (as plain dicts in ``records``; :func:`train_run`
    converts them to :class:`MetricRecord`).
    """
    if g_spec.output_width != data_width or d_spec.input_width != data_width:
        raise ContractError("network widths do not match the data width")
    if g_spec.input_width != noise.dim:
        raise ContractError("generator input width does not match the noise dimension")
    g_params = init_mlp(g_spec, stream(seed, "init:g"), "generator")
    d_params = init_mlp(d_spec, stream(seed, "init:d"), "discriminator")
    rng_data = stream(seed, "data")
    rng_noise = stream(seed, "noise")
    rng_interp = stream(seed, "interp")
    d_state = _new_optimizer(optimizer, d_params)
    g_state = _new_optimizer(g_optimizer or optimizer, g_params)
    result = TrainResult(g_params, d_params)
    last = {"d_loss": None, "g_loss": None}
    evaluated_at = None

    def run_eval(step):
        nonlocal evaluated_at
        if evaluate is None or evaluated_at == step:
            return
        values = evaluate(result.g_params, step)
        result.records.append(dict(step=step, **values, **last))
        evaluated_at = step

    step = 0
    try:
        for step in range(1, schedule.total_steps + 1):
            for _ in range(schedule.n_critic):
                real = sample_real(schedule.batch_size, rng_data)
                z = sample_noise(noise, schedule.batch_size, rng_noise)
                result.d_params, stats = discriminator_step(
                    loss, result.g_params, g_spec, result.d_params, d_spec,
                    real, z, d_state, rng_interp, gp, clip_c,
                )  # fmt: skip
                last["d_loss"] = stats["d_loss"]
                result.step_log.append(LossReport(step, "d", stats["d_loss"], None, **{
                    k: stats[k] for k in ("gp_term", "d_real_mean", "d_fake_mean")
                }))  # fmt: skip
            z = sample_noise(noise, schedule.batch_size, rng_noise)
            result.g_params, g_loss, fake_mean = generator_step(
                loss, result.g_params, g_spec, result.d_params, d_spec, z, g_state
            )
            last["g_loss"] = g_loss
            result.step_log.append(LossReport(step, "g", None, g_loss, d_fake_mean=fake_mean))
            if step % schedule.eval_every == 0:
                run_eval(step)
        run_eval(schedule.total_steps)
    except DomainError as exc:
        result.failed = True
        result.failure = f"step {step}: {exc}"
        log.warning("run failed at %s", result.failure)
    return result


def _gaussian_evaluator(cfg: ExperimentConfig, g_spec):
    def evaluate(g_params, step):
        rng = stream(cfg.seed, f"eval:{step}")
        z = sample_noise(cfg.noise, cfg.eval_samples, rng)
        fake = mlp_apply(g_params, g_spec, z)
        real = sample_gaussian_data(cfg.gaussian, cfg.eval_samples, rng)
        fd = frechet_distance(empirical_gaussian_stats(real), empirical_gaussian_stats(fake))
        return dict(fd=fd, jsd=jsd_histogram(real, fake, bins=cfg.jsd_bins))

    return evaluate


def _mnist_evaluator(cfg: ExperimentConfig, g_spec, embedder, test_images):
    def evaluate(g_params, step):
        rng = stream(cfg.seed, f"eval:{step}")
        z = sample_noise(cfg.noise, cfg.eval_samples, rng)
        fake = mlp_apply(g_params, g_spec, z)
        idx = rng.choice(len(test_images), size=min(cfg.eval_samples, len(test_images)), replace=False)
        real = test_images[np.sort(idx)]
        is_mean, is_var = inception_score(embedder, fake, cfg.is_splits)
        return dict(fid=fid(embedder, real, fake), is_mean=is_mean, is_var=is_var)

    return evaluate


def train_run(cfg: ExperimentConfig, embedder=None, checkpoint_dir=None):
    """Train one sweep cell and evaluate it.

    Returns a :class:`TrainResult` whose ``records`` are :class:`MetricRecord`
    rows; the last one describes the end of the run (including failures).
    """
    g_spec, d_spec = cfg.g_spec(), cfg.d_spec()
    if cfg.dataset == "gaussian":
        spec = cfg.gaussian

        def sample_real(n, rng):
            return sample_gaussian_data(spec, n, rng)

        evaluate = _gaussian_evaluator(cfg, g_spec)
    else:
        train = load_mnist(cfg.mnist_dir, "train")
        test = load_mnist(cfg.mnist_dir, "test")
        if embedder is None:
            if cfg.embedder_path is None:
                raise ContractError("MNIST runs need an embedder")
            from .embedder import load_embedder

            embedder = load_embedder(cfg.embedder_path)
        images = train.images

        def sample_real(n, rng):
            return images[rng.integers(0, len(images), size=n)]

        evaluate = _mnist_evaluator(cfg, g_spec, embedder, test.images)

    result = fit_adversarial(
        sample_real, cfg.data_width, cfg.noise, cfg.loss, cfg.schedule, g_spec, d_spec,
        cfg.optimizer, cfg.seed, GpConfig(cfg.gp_lambda), cfg.clip_c, evaluate,
    )  # fmt: skip
    records = [MetricRecord.for_config(cfg, **r) for r in result.records]
    if result.failed:
        failed_at = max(len(result.step_log) and result.step_log[-1].step, 0)
        values = {}
        if records:
            values = {k: getattr(records[-1], k) for k in ("fd", "jsd", "fid", "is_mean", "is_var", "d_loss", "g_loss")}
        records.append(MetricRecord.for_config(cfg, failed_at, failed=True, **values))
    result.records = records
    if checkpoint_dir is not None:
        out = Path(checkpoint_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_params(result.g_params, out / f"{cfg.run_id}.g.gnwt")
        save_params(result.d_params, out / f"{cfg.run_id}.d.gnwt")
    return result
