import json

import numpy as np
import pytest

import gradcheck
from rl2adn.devices import load_fleet
from rl2adn.environment import AdnEnv, EnvConfig
from rl2adn.grid import load_case
from rl2adn.penalty import zero_program
from rl2adn.sac import (
    Adam,
    Batch,
    Mlp,
    ReplayBuffer,
    SacAgent,
    SacConfig,
    TrainingResults,
    critic_targets,
    exponential_lr,
    load_checkpoint,
    policy_loss,
    sample_action,
    save_checkpoint,
    soft_target_update,
    train,
)

F64 = np.float64


class ConstNet:
    """Stands in for an Mlp whose output ignores its input."""

    def __init__(self, out):
        self.out = np.asarray(out, dtype=F64)

    def forward(self, x):
        return np.tile(self.out, (x.shape[0], 1)), None

    def __call__(self, x):
        return self.forward(x)[0]


def test_log_prob_at_the_mean():
    policy = ConstNet([0.0, 0.0])  # mu = 0, log sigma = 0
    a, logp = sample_action(policy, np.zeros(3), np.zeros(1))
    assert a[0] == 0.0
    assert logp == pytest.approx(np.log(1 / np.sqrt(2 * np.pi)) - np.log(1 + 1e-6), abs=1e-12)
    assert logp == pytest.approx(-0.9189, abs=1e-4)


def test_log_std_floor_gives_deterministic_tanh():
    policy = ConstNet([0.3, -0.7, -50.0, -50.0])
    rng = np.random.default_rng(0)
    for _ in range(5):
        a, _ = sample_action(policy, np.zeros(2), rng.normal(size=2))
        np.testing.assert_allclose(a, np.tanh([0.3, -0.7]), atol=1e-8)


def test_actions_stay_inside_open_box():
    rng = np.random.default_rng(1)
    net = Mlp((4, 16, 6), rng, F64)
    a, lp = sample_action(net, rng.normal(size=(500, 4)), rng.normal(size=(500, 3)))
    assert np.all(np.abs(a) < 1) and np.all(np.isfinite(lp))


def _targets_problem(done, gamma):
    rng = np.random.default_rng(2)
    policy = Mlp((3, 8, 4), rng, F64)
    target = [Mlp((5, 8, 1), rng, F64)]
    n = 6
    b = Batch(rng.normal(size=(n, 3)), np.zeros((n, 2)), rng.normal(size=n), rng.normal(size=(n, 3)), done)
    return critic_targets(target, policy, b, rng.normal(size=(n, 2)), gamma, 0.04), b


def test_terminal_transitions_do_not_bootstrap():
    y, b = _targets_problem(np.ones(6), 0.99)
    np.testing.assert_array_equal(y, b.r)


def test_myopic_targets():
    y, b = _targets_problem(np.zeros(6), 0.0)
    np.testing.assert_array_equal(y, b.r)


def test_flat_critic_without_entropy_has_zero_policy_gradient():
    rng = np.random.default_rng(3)
    policy = Mlp((3, 8, 4), rng, F64)
    critic = Mlp((5, 8, 1), rng, F64)
    for p in critic.params[:-1]:
        p[:] = 0.0
    critic.params[-1][:] = 4.2
    b = Batch(rng.normal(size=(5, 3)), np.zeros((5, 2)), np.zeros(5), np.zeros((5, 3)), np.zeros(5))
    loss, grads = policy_loss(policy, [critic], b, rng.normal(size=(5, 2)), alpha=0.0)
    assert loss == pytest.approx(-4.2)
    assert all(np.all(g == 0) for g in grads)


def test_entropy_term_grows_with_alpha():
    rng = np.random.default_rng(4)
    policy = Mlp((3, 8, 4), rng, F64)
    critic = Mlp((5, 8, 1), rng, F64)
    b = Batch(rng.normal(size=(5, 3)), np.zeros((5, 2)), np.zeros(5), np.zeros((5, 3)), np.zeros(5))
    xi = rng.normal(size=(5, 2))
    losses = [policy_loss(policy, [critic], b, xi, alpha)[0] for alpha in (0.0, 0.1, 0.2)]
    _, logp = sample_action(policy, b.s, xi)
    assert np.mean(logp) != 0
    d1, d2 = losses[1] - losses[0], losses[2] - losses[1]
    assert d1 == pytest.approx(0.1 * np.mean(logp)) and d2 == pytest.approx(d1)


def test_gradients_match_finite_differences():
    worst_c, worst_p = gradcheck.run(n=20, seed=11)
    assert worst_c < 1e-5 and worst_p < 1e-5


def test_lr_schedule():
    assert exponential_lr(1e-3, 1e-4, 0, 500) == pytest.approx(1e-3)
    assert exponential_lr(1e-3, 1e-4, 500, 500) == pytest.approx(1e-4)
    assert exponential_lr(1e-3, 1e-4, 250, 500) == pytest.approx(3.162e-4, rel=1e-3)


def test_adam_zero_gradient_and_non_finite_skip():
    p = [np.array([1.0, -2.0])]
    opt = Adam(p)
    assert opt.step(p, [np.zeros(2)], 1e-2)
    np.testing.assert_array_equal(p[0], [1.0, -2.0])
    assert not opt.step(p, [np.array([np.nan, 0.0])], 1e-2)
    assert opt.skipped == 1
    np.testing.assert_array_equal(p[0], [1.0, -2.0])
    # a fresh optimizer's first step is lr * sign(g) after bias correction
    q = [np.array([1.0, -2.0])]
    Adam(q).step(q, [np.array([3.0, -0.5])], 1e-2)
    np.testing.assert_allclose(q[0], [1.0 - 1e-2, -2.0 + 1e-2], rtol=1e-6)


def test_soft_update_examples():
    src, dst = [np.ones(3)], [np.zeros(3)]
    soft_target_update(src, dst, 5e-3)
    np.testing.assert_allclose(dst[0], 0.005)
    soft_target_update(src, dst, 1.0)
    np.testing.assert_array_equal(dst[0], src[0])
    before = dst[0].copy()
    soft_target_update([np.full(3, 9.0)], dst, 0.0)
    np.testing.assert_array_equal(dst[0], before)


def test_buffer_is_fifo_and_samples_without_replacement():
    buf = ReplayBuffer(4, 1, 1, F64)
    for k in range(6):
        buf.add([k], [0.0], k, [k + 1], False)
    assert len(buf) == 4 and buf.inserted == 6
    assert sorted(buf.s[:, 0]) == [2, 3, 4, 5]
    assert buf.s[buf.oldest_index(), 0] == 2
    b = buf.sample(4, np.random.default_rng(0))
    assert sorted(b.s[:, 0]) == [2, 3, 4, 5]
    with pytest.raises(ValueError):
        buf.sample(5, np.random.default_rng(0))
    with pytest.raises(ValueError):
        buf.add([0], [1.5], 0, [0], False)


def test_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        SacConfig(gamma=1.0)
    with pytest.raises(ValueError):
        SacConfig(tau=0.0)
    with pytest.raises(ValueError):
        SacConfig(batch_size=20_000)
    cfg = SacConfig(hidden=(32, 16), episodes=7)
    assert SacConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises((TypeError, ValueError)):
        SacConfig.from_dict({**cfg.to_dict(), "bogus": 1})


SMALL = SacConfig(episodes=3, hidden=(16, 16), batch_size=16, buffer_capacity=500, warmup_steps=30)


@pytest.fixture(scope="module")
def tiny_env():
    return AdnEnv(load_case("tiny4"), load_fleet("tiny4"), EnvConfig(dt=1.0, horizon=24))


def test_training_is_bit_identical_for_a_seed(tiny_env):
    a1, r1 = train(tiny_env, zero_program(), SMALL, seed=5)
    a2, r2 = train(tiny_env, zero_program(), SMALL, seed=5)
    assert r1.to_dict() == r2.to_dict()
    for p, q in zip(a1.policy.params, a2.policy.params):
        np.testing.assert_array_equal(p, q)
    _, r3 = train(tiny_env, zero_program(), SMALL, seed=6)
    assert r3.episode_rewards != r1.episode_rewards


def test_update_counts_follow_frequencies(tiny_env):
    _, res = train(tiny_env, zero_program(), SMALL, seed=1)
    steps = 3 * 24
    assert res.env_steps == steps
    active = range(SMALL.warmup_steps, steps + 1)
    assert res.critic_updates == len([s for s in active if s >= 30])
    assert res.policy_updates == len([s for s in active if s % 2 == 0])
    assert TrainingResults.from_dict(res.to_dict()) == res


def test_checkpoint_round_trip(tiny_env, tmp_path):
    agent, _ = train(tiny_env, zero_program(), SMALL, seed=2)
    path = tmp_path / "policy.npz"
    save_checkpoint(agent, path)
    back = load_checkpoint(path)
    assert back.config == agent.config
    s = tiny_env.reset(tiny_env_profiles(tiny_env))
    np.testing.assert_array_equal(back.act(s, True), agent.act(s, True))
    for p, q in zip(back.critics[0].params, agent.critics[0].params):
        np.testing.assert_array_equal(p, q)


def tiny_env_profiles(env):
    from rl2adn.environment import typical_day

    return typical_day(env.config, env.case, env.fleet)


def test_twin_critic_agent_builds_two_critics():
    agent = SacAgent(5, 2, SacConfig(twin_critic=True, hidden=(8,)), np.random.default_rng(0))
    assert len(agent.critics) == 2 and len(agent.targets) == 2
    rng = np.random.default_rng(1)
    b = Batch(rng.normal(size=(4, 5)).astype(np.float32), np.zeros((4, 2), np.float32), np.ones(4, np.float32),
              rng.normal(size=(4, 5)).astype(np.float32), np.zeros(4, np.float32))
    agent.update_critic(b, 0)
    agent.update_policy(b, 0)
    assert agent.stats.critic_updates == 1 and agent.stats.policy_updates == 1
