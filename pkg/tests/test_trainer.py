import numpy as np
import pytest

import gannoise.trainer as trainer_mod
from gannoise.data import GaussianDataSpec, NoiseSpec
from gannoise.errors import ContractError, DimensionError, NonFiniteGradientError
from gannoise.experiment import ExperimentConfig, OptimizerConfig, TrainSchedule
from gannoise.losses import GpConfig
from gannoise.metrics import empirical_gaussian_stats, frechet_distance
from gannoise.models import MlpSpec, init_mlp, load_params, mlp_apply
from gannoise.optim import OptimizerState, adam_step, optimizer_step, sgd_step
from gannoise.rng import stream
from gannoise.trainer import discriminator_step, fit_adversarial, generator_step, train_run

# x <- x - lr * m_hat / (sqrt(v_hat) + eps) on f(x) = x^2 from x = 1 with
# lr 0.1, betas (0.9, 0.999), eps 1e-8, stepped by hand in plain floats
ADAM_TRACE = [0.9000000005, 0.8004122286917928, 0.7015862729460303]


def test_adam_first_step_is_lr_times_sign():
    state = OptimizerState.for_params([np.zeros(1)], lr=1e-3, beta1=0.9, beta2=0.999)
    (new,), _ = adam_step(state, [np.array([0.5])], [np.array([0.1])])
    # sign(g) up to eps: lr * g / (|g| + eps)
    assert new[0] == pytest.approx(0.5 - 1e-3, abs=1e-9)
    assert state.t == 1


def test_adam_zero_gradient_leaves_params():
    params = [np.array([[1.0, -2.0]]), np.array([3.0])]
    state = OptimizerState.for_params(params)
    new, _ = adam_step(state, params, [np.zeros((1, 2)), np.zeros(1)])
    assert all(np.array_equal(a, b) for a, b in zip(new, params))


def test_adam_matches_hand_trace():
    x = np.array([1.0])
    state = OptimizerState.for_params([x], lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
    for expected in ADAM_TRACE:
        (x,), _ = adam_step(state, [x], [2.0 * x])
        assert abs(x[0] - expected) <= 1e-12


def test_adam_does_not_mutate_inputs():
    p = np.array([1.0, 2.0])
    p.flags.writeable = False
    state = OptimizerState.for_params([p])
    adam_step(state, [p], [np.ones(2)])
    assert p.tolist() == [1.0, 2.0]


def test_optimizer_errors():
    state = OptimizerState.for_params([np.zeros(2)])
    with pytest.raises(NonFiniteGradientError, match="non-finite"):
        adam_step(state, [np.zeros(2)], [np.array([1.0, np.nan])])
    with pytest.raises(DimensionError):
        adam_step(state, [np.zeros(2)], [np.zeros(3)])
    assert state.t == 0


def test_sgd_step():
    state = OptimizerState.for_params([np.zeros(2)], kind="sgd", lr=0.5)
    (new,), _ = sgd_step(state, [np.array([1.0, 1.0])], [np.array([2.0, -2.0])])
    assert new.tolist() == [0.0, 2.0]
    (again,), _ = optimizer_step(state, [new], [np.zeros(2)])
    assert again.tolist() == [0.0, 2.0]


def _gaussian_cfg(steps=40, loss="gan_nonsat", dim=3, seed=1, n_critic=None, **kw):
    from gannoise.experiment import LOSS_DEFAULTS

    opt, critic = LOSS_DEFAULTS[loss]
    return ExperimentConfig(
        dataset="gaussian", loss=loss, noise=NoiseSpec(dim), seed=seed,
        schedule=TrainSchedule(steps, 32, n_critic or critic, kw.pop("eval_every", 20)),
        optimizer=opt, gaussian=GaussianDataSpec.unimodal(), eval_samples=500,
        g_hidden=(8, 8), d_hidden=(8, 8), **kw,
    )  # fmt: skip


def test_zero_steps_returns_initial_params():
    cfg = _gaussian_cfg(steps=0)
    result = train_run(cfg)
    assert result.g_params.equals(init_mlp(cfg.g_spec(), stream(cfg.seed, "init:g")))
    assert result.d_params.equals(init_mlp(cfg.d_spec(), stream(cfg.seed, "init:d")))
    assert result.step_log == []
    assert len(result.records) == 1 and result.final.step == 0


@pytest.mark.parametrize("loss", ["gan_nonsat", "wgan_gp", "wgan_clip"])
def test_runs_are_deterministic(loss, tmp_path):
    cfg = _gaussian_cfg(steps=15, loss=loss)
    a = train_run(cfg, checkpoint_dir=tmp_path / "a")
    b = train_run(cfg, checkpoint_dir=tmp_path / "b")
    assert a.step_log == b.step_log
    assert a.records == b.records
    for name in (f"{cfg.run_id}.g.gnwt", f"{cfg.run_id}.d.gnwt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert load_params(tmp_path / "a" / f"{cfg.run_id}.g.gnwt").equals(a.g_params)


def test_step_log_counts_critic_updates():
    cfg = _gaussian_cfg(steps=6, loss="wgan_gp", n_critic=3)
    log = train_run(cfg).step_log
    assert sum(r.phase == "d" for r in log) == 3 * 6
    assert sum(r.phase == "g" for r in log) == 6
    assert all(r.gp_term >= 0 for r in log if r.phase == "d")
    assert [r.phase for r in log[:4]] == ["d", "d", "d", "g"]


def test_wgan_clip_keeps_critic_in_box():
    cfg = _gaussian_cfg(steps=10, loss="wgan_clip", clip_c=0.02)
    d = train_run(cfg).d_params
    assert all(np.all(np.abs(a) <= 0.02) for a in d.arrays())


def test_updates_only_move_one_network():
    g_spec, d_spec = MlpSpec((2, 6, 1)), MlpSpec((1, 6, 1), output_activation="sigmoid")
    g = init_mlp(g_spec, np.random.default_rng(0))
    d = init_mlp(d_spec, np.random.default_rng(1), "discriminator")
    g_before, d_before = g.copy(), d.copy()
    rng = np.random.default_rng(2)
    real, z = rng.normal(size=(8, 1)), rng.normal(size=(8, 2))
    new_d, _ = discriminator_step("gan_nonsat", g, g_spec, d, d_spec, real, z,
                                  OptimizerState.for_params(d.arrays()), rng, GpConfig(), 0.01)  # fmt: skip
    assert g.equals(g_before) and not new_d.equals(d_before)
    d_snapshot = new_d.copy()
    new_g, _, _ = generator_step("gan_nonsat", g, g_spec, new_d, d_spec, z, OptimizerState.for_params(g.arrays()))
    assert not new_g.equals(g_before)
    assert new_d.equals(d_snapshot)


def test_eval_schedule_and_empty_image_metrics():
    records = train_run(_gaussian_cfg(steps=45, eval_every=20)).records
    assert [r.step for r in records] == [20, 40, 45]
    assert all(r.fid is None and r.is_mean is None and r.fd is not None for r in records)
    assert all(r.d_loss is not None and r.g_loss is not None for r in records)


def test_nan_marks_run_failed(monkeypatch):
    calls = {"n": 0}
    original = trainer_mod.sample_gaussian_data

    def poisoned(spec, n, rng):
        calls["n"] += 1
        x = original(spec, n, rng)
        if calls["n"] > 12:
            x[0, 0] = np.nan
        return x

    monkeypatch.setattr(trainer_mod, "sample_gaussian_data", poisoned)
    result = train_run(_gaussian_cfg(steps=30, eval_every=5))
    assert result.failed and "step" in result.failure
    assert result.final.failed
    # last finite metrics are carried into the failure row
    assert result.final.fd == result.records[-2].fd


def test_fit_adversarial_checks_widths():
    with pytest.raises(ContractError):
        fit_adversarial(lambda n, r: np.zeros((n, 1)), 1, NoiseSpec(3), "gan_nonsat", TrainSchedule(1, 4),
                        MlpSpec((2, 4, 1)), MlpSpec((1, 4, 1)), OptimizerConfig(), seed=0)  # fmt: skip


def test_training_improves_fd():
    cfg = ExperimentConfig(
        dataset="gaussian", loss="gan_nonsat", noise=NoiseSpec(10), seed=1,
        schedule=TrainSchedule(3000, 256, 1, 3000), optimizer=OptimizerConfig(),
        gaussian=GaussianDataSpec.unimodal(),
    )  # fmt: skip
    result = train_run(cfg)
    rng = stream(0, "check")
    real = np.random.default_rng(0).normal(0.0, 2.0, (10_000, 1))
    z = rng.standard_normal((10_000, 10))
    untrained = init_mlp(cfg.g_spec(), stream(cfg.seed, "init:g"))
    fd_before = frechet_distance(empirical_gaussian_stats(real), empirical_gaussian_stats(mlp_apply(untrained, cfg.g_spec(), z)))
    fd_after = frechet_distance(empirical_gaussian_stats(real), empirical_gaussian_stats(mlp_apply(result.g_params, cfg.g_spec(), z)))
    assert not result.failed
    assert fd_after < fd_before


class _FixedEps:
    def __init__(self, eps):
        self.eps = eps

    def random(self, size=None):
        return self.eps


def test_wgan_gp_updates_match_torch():
    torch = pytest.importorskip("torch")

    def net(ws, bs, x):
        for i, (w, b) in enumerate(zip(ws, bs)):
            x = x @ w.T + b
            if i < len(ws) - 1:
                x = torch.relu(x)
        return x

    def leaves(arrays):
        return [torch.tensor(a, dtype=torch.float64, requires_grad=True) for a in arrays]

    g_spec, d_spec = MlpSpec((3, 8, 8, 1)), MlpSpec((1, 8, 8, 1))
    g = init_mlp(g_spec, np.random.default_rng(0))
    d = init_mlp(d_spec, np.random.default_rng(1), "discriminator")
    rng = np.random.default_rng(2)
    real, z, eps = rng.normal(0, 2, (16, 1)), rng.normal(size=(16, 3)), rng.uniform(size=(16, 1))
    adam = dict(lr=1e-3, betas=(0.0, 0.9), eps=1e-8)

    state = OptimizerState.for_params(d.arrays(), lr=1e-3, beta1=0.0, beta2=0.9)
    new_d, stats = discriminator_step("wgan_gp", g, g_spec, d, d_spec, real, z, state, _FixedEps(eps), GpConfig(10.0), 0.01)
    gw, gb = leaves(g.weights), leaves(g.biases)
    dw, db = leaves(d.weights), leaves(d.biases)
    fake = net(gw, gb, torch.tensor(z)).detach()
    xr, e = torch.tensor(real), torch.tensor(eps)
    xt = (e * xr + (1 - e) * fake).requires_grad_(True)
    (gx,) = torch.autograd.grad(net(dw, db, xt).sum(), xt, create_graph=True)
    penalty = 10.0 * ((torch.sqrt((gx**2).sum(1) + 1e-12) - 1) ** 2).mean()
    loss = net(dw, db, fake).mean() - net(dw, db, xr).mean() + penalty
    assert stats["d_loss"] == pytest.approx(loss.item(), abs=1e-12)
    opt = torch.optim.Adam(dw + db, **adam)
    loss.backward()
    opt.step()
    for mine, theirs in zip(new_d.weights + new_d.biases, dw + db):
        assert np.allclose(mine, theirs.detach().numpy(), rtol=0, atol=1e-12)

    g_state = OptimizerState.for_params(g.arrays(), lr=1e-3, beta1=0.0, beta2=0.9)
    new_g, g_loss, _ = generator_step("wgan_gp", g, g_spec, new_d, d_spec, z, g_state)
    fixed_d = [torch.tensor(a) for a in new_d.weights], [torch.tensor(a) for a in new_d.biases]
    g_obj = -net(*fixed_d, net(gw, gb, torch.tensor(z))).mean()
    assert g_loss == pytest.approx(g_obj.item(), abs=1e-12)
    opt = torch.optim.Adam(gw + gb, **adam)
    g_obj.backward()
    opt.step()
    for mine, theirs in zip(new_g.weights + new_g.biases, gw + gb):
        assert np.allclose(mine, theirs.detach().numpy(), rtol=0, atol=1e-12)
