import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentic_thermal.nn import MLP
from agentic_thermal.sac import (AlphaMode, Batch, EmptyBuffer, NonPositiveAlpha, ReplayBuffer,
                                 SACAgent, SACConfig, actor_loss_and_grads, alpha_loss_and_grad,
                                 critic_loss_and_grads, policy_forward)
from oracles import central_difference, relative_error

SMALL = SACConfig(hidden=(16, 16), batch_size=16, learning_starts=16, buffer_capacity=1000)


def random_instance(seed):
    rng = np.random.default_rng(seed)
    obs_dim, act_dim = int(rng.integers(2, 5)), int(rng.integers(1, 3))
    hidden = tuple(int(h) for h in rng.integers(2, 6, size=2))
    actor = MLP((obs_dim, *hidden, 2 * act_dim), rng, out_scale=0.5)
    q1 = MLP((obs_dim + act_dim, *hidden, 1), rng)
    q2 = MLP((obs_dim + act_dim, *hidden, 1), rng)
    # nonzero biases keep pre-activations off the ReLU kink at exactly 0
    for net in (actor, q1, q2):
        for bias in net.params[1::2]:
            bias[...] = rng.normal(scale=0.3, size=bias.shape)
    b = int(rng.integers(3, 7))
    obs = rng.normal(size=(b, obs_dim))
    eps = rng.normal(size=(b, act_dim))
    actions = np.tanh(rng.normal(size=(b, act_dim)))
    target = rng.normal(size=b)
    return rng, actor, q1, q2, obs, eps, actions, target


@pytest.mark.parametrize("seed", range(20))
def test_critic_gradients_match_finite_differences(seed):
    _, _, q1, q2, obs, _, actions, target = random_instance(seed)
    _, g1, g2 = critic_loss_and_grads(q1, q2, obs, actions, target)
    g1, g2 = g1.copy(), g2.copy()

    def loss():
        return critic_loss_and_grads(q1, q2, obs, actions, target)[0]

    assert relative_error(g1, central_difference(loss, q1.flat)) < 1e-4
    assert relative_error(g2, central_difference(loss, q2.flat)) < 1e-4


@pytest.mark.parametrize("seed", range(20))
def test_actor_gradients_match_finite_differences(seed):
    rng, actor, q1, q2, obs, eps, _, _ = random_instance(seed)
    alpha = float(rng.uniform(0.05, 1.0))
    _, ga, _ = actor_loss_and_grads(actor, q1, q2, obs, eps, alpha)
    ga = ga.copy()

    def loss():
        return actor_loss_and_grads(actor, q1, q2, obs, eps, alpha)[0]

    assert relative_error(ga, central_difference(loss, actor.flat)) < 1e-4


@pytest.mark.parametrize("seed", range(20))
def test_alpha_gradient_matches_finite_difference(seed):
    rng, actor, _, _, obs, eps, _, _ = random_instance(seed)
    _, logp, _ = policy_forward(actor, obs, eps, -20.0, 2.0)
    target = -float(eps.shape[1])
    log_alpha = np.array([float(rng.uniform(-3.0, 1.0))])
    _, g = alpha_loss_and_grad(float(log_alpha[0]), logp, target)
    num = central_difference(lambda: alpha_loss_and_grad(float(log_alpha[0]), logp, target)[0],
                             log_alpha)
    assert relative_error(np.array([g]), num) < 1e-4


def test_logp_matches_change_of_variables():
    rng = np.random.default_rng(3)
    actor = MLP((3, 4, 2), rng, out_scale=0.5)
    obs = rng.normal(size=(5, 3))
    eps = rng.normal(size=(5, 1))
    _, logp, (_, _, std) = policy_forward(actor, obs, eps, -20.0, 2.0)
    mu = actor(obs)[:, :1]
    u = mu + std * eps
    gauss = -0.5 * ((u - mu) / std) ** 2 - np.log(std) - 0.5 * math.log(2 * math.pi)
    expected = (gauss - np.log(1 - np.tanh(u) ** 2 + 1e-6)).sum(axis=1)
    np.testing.assert_allclose(logp, expected, rtol=1e-12, atol=1e-12)


def fill(agent, n, rng):
    for _ in range(n):
        o = rng.normal(size=agent.obs_dim)
        agent.store(o, np.tanh(rng.normal(size=agent.act_dim)), float(rng.normal()),
                    rng.normal(size=agent.obs_dim), bool(rng.random() < 0.1))


def test_replay_buffer_wraps_and_rejects_short_sample():
    buf = ReplayBuffer(4, 2, 1)
    rng = np.random.default_rng(0)
    with pytest.raises(EmptyBuffer):
        buf.sample(1, rng)
    for i in range(6):
        buf.add([i, i], [0.0], float(i), [i, i], False)
    assert len(buf) == 4
    assert sorted(buf.rewards.tolist()) == [2.0, 3.0, 4.0, 5.0]


def test_update_on_empty_buffer_raises():
    agent = SACAgent(3, 2, SMALL, seed=0)
    with pytest.raises(EmptyBuffer):
        agent.update()


def test_set_alpha_contract():
    agent = SACAgent(3, 2, SMALL, seed=0)
    assert agent.alpha_mode is AlphaMode.AUTO_TUNE
    agent.set_alpha(0.2)
    assert agent.alpha == pytest.approx(0.2)
    assert agent.alpha_mode is AlphaMode.OVERRIDE
    for bad in (0.0, -1.0, float("nan"), float("inf")):
        with pytest.raises(NonPositiveAlpha):
            agent.set_alpha(bad)


def test_override_freezes_alpha_over_1000_updates():
    agent = SACAgent(3, 2, SMALL, seed=1)
    fill(agent, 64, np.random.default_rng(1))
    agent.set_alpha(0.37)
    before = agent.alpha
    for _ in range(1000):
        agent.update()
    assert agent.alpha == before


def test_auto_tune_moves_alpha():
    agent = SACAgent(3, 2, SMALL, seed=2)
    fill(agent, 64, np.random.default_rng(2))
    start = agent.alpha
    for _ in range(50):
        rec = agent.update()
    assert rec["alpha_mode"] == "auto_tune"
    assert agent.alpha != start and agent.alpha > 0


def test_set_alpha_to_current_value_keeps_deterministic_actions():
    agent = SACAgent(3, 2, SMALL, seed=3)
    obs = np.ones(3)
    before = agent.select_action(obs, deterministic=True)
    agent.set_alpha(agent.alpha)
    np.testing.assert_array_equal(agent.select_action(obs, deterministic=True), before)


def test_tau_one_copies_online_into_target():
    agent = SACAgent(3, 2, SACConfig(hidden=(8, 8), batch_size=8, learning_starts=8, tau=1.0),
                     seed=4)
    fill(agent, 16, np.random.default_rng(4))
    agent.update()
    np.testing.assert_array_equal(agent.q1_target.flat, agent.q1.flat)
    np.testing.assert_array_equal(agent.q2_target.flat, agent.q2.flat)


def test_seeded_determinism():
    def trajectory():
        agent = SACAgent(3, 2, SMALL, seed=11)
        fill(agent, 32, np.random.default_rng(0))
        out = [agent.update() for _ in range(20)]
        out.append(agent.select_action(np.zeros(3)).tolist())
        return out

    assert trajectory() == trajectory()


def test_checkpoint_round_trip(tmp_path):
    agent = SACAgent(3, 2, SMALL, seed=5)
    fill(agent, 32, np.random.default_rng(5))
    agent.update()
    agent.set_alpha(0.3)
    path = tmp_path / "agent.npz"
    agent.save(path)
    back = SACAgent.load(path)
    assert back.alpha == pytest.approx(0.3)
    assert back.alpha_mode is AlphaMode.OVERRIDE
    for name, net in agent._networks().items():
        np.testing.assert_array_equal(net.flat, back._networks()[name].flat)


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "other.npz"
    np.savez(path, header=np.frombuffer(b'{"format": "x", "version": 1}', dtype=np.uint8))
    with pytest.raises(ValueError):
        SACAgent.load(path)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1),
       st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_sampled_actions_within_unit_box(seed, obs):
    agent = SACAgent(3, 2, SMALL, seed=seed)
    a = agent.select_action(np.array(obs))
    assert np.all(np.abs(a) <= 1.0)
    assert np.all(np.isfinite(a))


def toy_batch(rng, n=64):
    # one fixed state; reward prefers actions near +0.5 in both dims
    obs = np.tile(np.array([0.3, -0.2, 0.1]), (n, 1))
    actions = np.tanh(rng.normal(size=(n, 2)))
    rewards = -np.sum((actions - 0.5) ** 2, axis=1)
    return Batch(obs, actions, rewards, obs.copy(), np.ones(n))


def sample_entropy(agent, n=2000):
    obs = np.array([0.3, -0.2, 0.1])
    acts = np.array([agent.select_action(obs) for _ in range(n)])
    return float(np.sum(np.log(acts.std(axis=0))))


@pytest.mark.slow
def test_higher_alpha_gives_more_spread_policy():
    spreads = {}
    for alpha in (0.05, 0.8):
        agent = SACAgent(3, 2, SMALL, seed=9)
        agent.set_alpha(alpha)
        rng = np.random.default_rng(9)
        for _ in range(600):
            agent.update(toy_batch(rng))
        spreads[alpha] = sample_entropy(agent)
    assert spreads[0.8] > spreads[0.05]


@pytest.mark.slow
def test_auto_tune_drives_entropy_toward_target():
    cfg = SACConfig(hidden=(16, 16), batch_size=64, learning_starts=64, alpha_lr=3e-3,
                    target_entropy=-4.0)
    agent = SACAgent(3, 2, cfg, seed=10)
    rng = np.random.default_rng(10)
    gaps = []
    for _ in range(5000):
        rec = agent.update(toy_batch(rng))
        gaps.append(abs(rec["entropy"] - cfg.target_entropy))
    early, late = np.mean(gaps[:500]), np.mean(gaps[-500:])
    assert late < early
