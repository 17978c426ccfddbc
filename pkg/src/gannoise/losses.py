"""Adversarial objectives, the interpolation sampler and the weight clamp.

Every loss is returned as a scalar Var so it can be differentiated; the
discriminator-side functions return the quantity the discriminator
*minimizes*.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .autodiff import Tape, Var, backward
from .errors import ContractError, DimensionError, DomainError
from .models import MlpSpec, Parameters, mlp_forward

SCORE_CLAMP = 1e-7
GP_NORM_EPS = 1e-12

LOSS_FAMILIES = ("gan_nonsat", "wgan_gp", "wgan_clip")


@dataclass(frozen=True)
class GpConfig:
    lam: float = 10.0

    def __post_init__(self):
        if self.lam < 0:
            raise ContractError("gradient penalty weight must be non-negative")


@dataclass
class LossReport:
    step: int
    phase: str  # "d" or "g"
    d_loss: float
    g_loss: float
    gp_term: float = 0.0
    d_real_mean: float = float("nan")
    d_fake_mean: float = float("nan")
    score_clamp: float = SCORE_CLAMP


def _as_var(scores, tape: Optional[Tape]):
    if isinstance(scores, Var):
        return scores
    return (tape or Tape()).constant(np.asarray(scores, dtype=np.float64))


def _probabilities(scores: Var):
    v = scores.value
    # sigmoid rounds to exactly 0 or 1 for large logits; those are clamped
    if np.any(v < 0) or np.any(v > 1):
        raise DomainError(f"discriminator scores must lie in (0, 1), got range [{v.min()}, {v.max()}]")
    return scores.tape.apply("clip", scores, lo=SCORE_CLAMP, hi=1.0 - SCORE_CLAMP)


def gan_d_loss(scores_real, scores_fake, tape=None) -> Var:
    """Binary cross-entropy of the discriminator: -E[log D(x)] - E[log(1 - D(G(z)))]."""
    real = _probabilities(_as_var(scores_real, tape))
    fake = _probabilities(_as_var(scores_fake, tape if tape else real.tape))
    return -real.log().mean() - (1.0 - fake).log().mean()


def gan_g_loss_saturating(scores_fake, tape=None) -> Var:
    """E[log(1 - D(G(z)))], the original minimax generator objective.  Tests only."""
    fake = _probabilities(_as_var(scores_fake, tape))
    return (1.0 - fake).log().mean()


def gan_g_loss_nonsaturating(scores_fake, tape=None) -> Var:
    fake = _probabilities(_as_var(scores_fake, tape))
    return -fake.log().mean()


def wgan_critic_value(scores_real, scores_fake, tape=None) -> Var:
    """E[D(x)] - E[D(G(z))]; the critic maximizes it."""
    real = _as_var(scores_real, tape)
    fake = _as_var(scores_fake, tape if tape else real.tape)
    return real.mean() - fake.mean()


def wgan_g_loss(scores_fake, tape=None) -> Var:
    return -_as_var(scores_fake, tape).mean()


def clip_weights(params: Parameters, c: float) -> Parameters:
    if c <= 0:
        raise ContractError("clip bound must be positive")
    return Parameters(
        [np.clip(w, -c, c) for w in params.weights],
        [np.clip(b, -c, c) for b in params.biases],
        params.role,
    )


def interpolate_pairs(x_real, x_fake, rng=None, eps=None):
    """Points on the segments between paired real and fake rows.

    One mixing weight per row is drawn from U(0, 1) unless ``eps`` is given.
    Returns ``(x_tilde, eps)`` with ``eps`` of shape (n, 1).
    """
    x_real = np.asarray(x_real, dtype=np.float64)
    x_fake = np.asarray(x_fake, dtype=np.float64)
    if x_real.shape != x_fake.shape:
        raise DimensionError(f"real batch {x_real.shape} and fake batch {x_fake.shape} differ")
    n = x_real.shape[0]
    if eps is None:
        if rng is None:
            raise ContractError("need an rng or explicit eps")
        eps = rng.random((n, 1))
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64).reshape(-1, 1), (n, 1))
    return eps * x_real + (1.0 - eps) * x_fake, eps


def critic_penalty(critic, x_tilde, gp: GpConfig, tape: Tape) -> Var:
    """Penalty for an arbitrary critic ``critic(x: Var) -> (n, 1) Var``."""
    x = tape.leaf(np.asarray(x_tilde, dtype=np.float64))
    scores = critic(x)
    # rows are independent, so d(sum)/dx holds each row's own input gradient
    grad_x = backward(scores.sum(), create_graph=True)[x]
    norms = grad_x.l2_norm(axis=1, eps=GP_NORM_EPS)
    return (norms - 1.0).square().mean() * gp.lam


def gradient_penalty(d_params, d_spec: MlpSpec, x_tilde, gp: GpConfig, tape: Tape) -> Var:
    """lam * mean_i (||grad_x D(x_tilde_i)||_2 - 1)^2, differentiable w.r.t. the critic weights.

    ``d_params`` should be bound on ``tape`` (see :meth:`Parameters.bind`) when
    the penalty's gradient w.r.t. the critic is wanted.
    """
    return critic_penalty(lambda x: mlp_forward(d_params, d_spec, x, tape), x_tilde, gp, tape)
