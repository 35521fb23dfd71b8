import math

import numpy as np
import pytest

from dollyshot.demos import DatasetError, record_scripted_dataset
from dollyshot.gail import (
    GailConfig,
    discriminator_loss,
    surrogate_reward,
    train_gail,
)
from dollyshot.nets import Adam, Discriminator, GaussianPolicy, value_net
from dollyshot.ppo import PpoConfig, RolloutBuffer, ppo_update
from dollyshot.sim import EpisodeConfig, OBS_DIM
from dollyshot.verify import finite_diff_grad, max_relative_error


@pytest.fixture(scope="module")
def base_dataset():
    env = EpisodeConfig(task="base", start_position="random")
    return record_scripted_dataset(env, "high", 5, seed=7)


def test_untrained_disc_loss_is_ln2(rng):
    disc = Discriminator(4, 2)  # zero weights: D == 0.5 everywhere
    e_obs, e_act = rng.standard_normal((8, 4)), rng.standard_normal((8, 2))
    a_obs, a_act = rng.standard_normal((8, 4)), rng.standard_normal((8, 2))
    loss, grad, stats = discriminator_loss(disc, e_obs, e_act, a_obs, a_act)
    assert loss == pytest.approx(math.log(2.0), abs=1e-12)


def test_disc_trains_to_separate_toy_data(rng):
    # 1-D separable: expert obs at +1, agent obs at -1.
    disc = Discriminator(1, 1, hidden=(16,), rng=rng)
    opt = Adam(disc.net.params.size, lr=1e-2)
    e_obs = np.ones((32, 1)) + 0.1 * rng.standard_normal((32, 1))
    a_obs = -np.ones((32, 1)) + 0.1 * rng.standard_normal((32, 1))
    act = np.zeros((32, 1))
    loss = None
    for _ in range(400):
        loss, grad, _ = discriminator_loss(disc, e_obs, act, a_obs, act)
        opt.step(disc.net.params, grad)
    assert loss < 0.1


def test_identical_distributions_cannot_beat_chance(rng):
    disc = Discriminator(3, 2, rng=rng)
    opt = Adam(disc.net.params.size, lr=1e-3)
    batch_obs = rng.standard_normal((64, 3))
    batch_act = rng.standard_normal((64, 2))
    final = None
    for _ in range(300):
        final, grad, _ = discriminator_loss(
            disc, batch_obs, batch_act, batch_obs, batch_act
        )
        opt.step(disc.net.params, grad)
    # expert batch == agent batch: the optimum is D == 0.5, loss >= ln 2
    assert final >= math.log(2.0) - 1e-9


def test_disc_gradient_matches_finite_differences(rng):
    disc = Discriminator(3, 2, hidden=(8, 8), rng=rng)
    e_obs, e_act = rng.standard_normal((5, 3)), rng.standard_normal((5, 2))
    a_obs, a_act = rng.standard_normal((5, 3)), rng.standard_normal((5, 2))
    _, analytic, _ = discriminator_loss(disc, e_obs, e_act, a_obs, a_act)

    def loss(params):
        saved = disc.net.params.copy()
        disc.net.params[...] = params
        value, _, _ = discriminator_loss(disc, e_obs, e_act, a_obs, a_act)
        disc.net.params[...] = saved
        return value

    numeric = finite_diff_grad(loss, disc.net.params.copy())
    assert max_relative_error(analytic, numeric) < 1e-4


def test_surrogate_reward_reference_points():
    disc = Discriminator(2, 1)  # D == 0.5
    obs, act = np.zeros((1, 2)), np.zeros((1, 1))
    assert surrogate_reward(disc, obs, act)[0] == pytest.approx(math.log(2.0))
    # force D = 0.9 via the output bias
    disc.net._biases[-1][0] = math.log(0.9 / 0.1)
    assert surrogate_reward(disc, obs, act)[0] == pytest.approx(-math.log(0.1), abs=1e-12)
    # push D toward 1: the reward hits the clip ceiling
    disc.net._biases[-1][0] = 50.0
    assert surrogate_reward(disc, obs, act, reward_clip=10.0)[0] == 10.0


def test_surrogate_reward_monotone_in_d(rng):
    disc = Discriminator(2, 1)
    obs, act = np.zeros((1, 2)), np.zeros((1, 1))
    rewards = []
    for logit in np.linspace(-6, 6, 25):
        disc.net._biases[-1][0] = logit
        rewards.append(surrogate_reward(disc, obs, act, reward_clip=1e9)[0])
    assert all(b > a for a, b in zip(rewards, rewards[1:]))
    assert all(r >= 0.0 for r in rewards)


def test_frozen_chance_discriminator_equals_constant_reward_ppo(rng, base_dataset):
    """With D frozen at 0.5 the relabeled rewards are constant, so the
    generator update must equal a PPO update on a constant-reward buffer."""
    policy_a = GaussianPolicy(OBS_DIM, 2, rng=np.random.default_rng(3))
    policy_b = GaussianPolicy(OBS_DIM, 2)
    policy_b.params[...] = policy_a.params
    value_a = value_net(OBS_DIM, rng=np.random.default_rng(4))
    value_b = value_net(OBS_DIM)
    value_b.params[...] = value_a.params

    cfg = PpoConfig(rollout_steps=96, epochs=2, minibatch=32)
    buf_a = RolloutBuffer(96, OBS_DIM, 2)
    rng_fill = np.random.default_rng(9)
    for i in range(96):
        obs = rng_fill.standard_normal(OBS_DIM)
        _, u, logp = policy_a.sample(obs, rng_fill)
        buf_a.add(obs, u, logp, 0.0, 0.0, i % 31 == 30)
    buf_b = RolloutBuffer(96, OBS_DIM, 2)
    buf_b.obs[...] = buf_a.obs
    buf_b.presquash[...] = buf_a.presquash
    buf_b.logprob[...] = buf_a.logprob
    buf_b.done[...] = buf_a.done
    buf_b.ptr = buf_a.ptr

    disc = Discriminator(OBS_DIM, 2)  # zero net: D == 0.5 everywhere
    rewards = surrogate_reward(disc, buf_a.obs, np.tanh(buf_a.presquash)) - math.log(2.0)
    buf_a.reward[:] = rewards
    assert np.allclose(buf_a.reward, 0.0, atol=1e-15)
    buf_b.reward[:] = 0.0  # the same constant reward, set directly

    ppo_update(policy_a, value_a, Adam(policy_a.n_params, 3e-4), Adam(value_a.n_params, 3e-4),
               buf_a, cfg, np.random.default_rng(17), 0.0)
    ppo_update(policy_b, value_b, Adam(policy_b.n_params, 3e-4), Adam(value_b.n_params, 3e-4),
               buf_b, cfg, np.random.default_rng(17), 0.0)
    assert np.array_equal(policy_a.params, policy_b.params)
    assert np.array_equal(value_a.params, value_b.params)


def test_zero_iterations_returns_untrained(base_dataset, weights):
    env = EpisodeConfig(task="base", start_position="random")
    result = train_gail(base_dataset, env, GailConfig(), PpoConfig(total_steps=0),
                        weights, seed=0)
    assert result.curve == []


def test_task_mismatch_rejected(base_dataset, weights):
    env = EpisodeConfig(task="full", start_position="random")
    with pytest.raises(DatasetError, match="task"):
        train_gail(base_dataset, env, GailConfig(), PpoConfig(total_steps=1024),
                   weights, seed=0)


def test_gail_short_run_produces_curve_with_disc_stats(base_dataset, weights):
    env = EpisodeConfig(task="base", start_position="random")
    cfg = PpoConfig(total_steps=1024, rollout_steps=512, eval_episodes=2)
    result = train_gail(base_dataset, env, GailConfig(), cfg, weights, seed=0)
    assert len(result.curve) == 2
    for row in result.curve:
        assert "disc_loss" in row and "disc_acc" in row and "mean_surrogate_reward" in row
        assert 0.0 <= row["disc_acc"] <= 1.0
        assert row["mean_surrogate_reward"] >= 0.0


def test_gail_deterministic_per_seed(base_dataset, weights):
    env = EpisodeConfig(task="base", start_position="random")
    cfg = PpoConfig(total_steps=1024, rollout_steps=512, eval_episodes=2)
    a = train_gail(base_dataset, env, GailConfig(), cfg, weights, seed=11)
    b = train_gail(base_dataset, env, GailConfig(), cfg, weights, seed=11)
    assert np.array_equal(a.policy.params, b.policy.params)
    assert a.curve == b.curve


def test_gail_config_validation():
    with pytest.raises(ValueError):
        GailConfig(disc_batch=63).validate()
    with pytest.raises(ValueError):
        GailConfig(disc_lr=0.0).validate()
    GailConfig().validate()
