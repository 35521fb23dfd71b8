import numpy as np
import pytest

from dollyshot.nets import Adam, GaussianPolicy, value_net
from dollyshot.ppo import (
    PpoConfig,
    RolloutBuffer,
    clipped_objective,
    compute_gae,
    normalize_advantages,
    ppo_update,
    run_training,
    train_ppo,
)
from dollyshot.sim import EpisodeConfig, OBS_DIM
from dollyshot.verify import oracle_gae_bruteforce


def test_gae_all_zero_rewards_and_values():
    adv, ret = compute_gae(np.zeros(10), np.zeros(10), np.zeros(10), 0.0, 0.99, 0.95)
    assert np.array_equal(adv, np.zeros(10))
    assert np.array_equal(ret, np.zeros(10))


def test_gae_single_terminal_step():
    adv, ret = compute_gae(
        np.array([2.0]), np.array([0.7]), np.array([1.0]), 123.0, 0.99, 0.95
    )
    assert adv[0] == pytest.approx(2.0 - 0.7)
    assert ret[0] == pytest.approx(2.0)


def test_gae_empty_buffer_rejected():
    with pytest.raises(ValueError):
        compute_gae(np.array([]), np.array([]), np.array([]), 0.0, 0.99, 0.95)


def test_gae_matches_bruteforce_on_random_buffers():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        n = 20
        rewards = rng.standard_normal(n)
        values = rng.standard_normal(n)
        dones = (rng.random(n) < 0.2).astype(float)
        bootstrap = float(rng.standard_normal())
        adv, ret = compute_gae(rewards, values, dones, bootstrap, 0.99, 0.95)
        o_adv, o_ret = oracle_gae_bruteforce(rewards, values, dones, bootstrap, 0.99, 0.95)
        worst = max(worst, np.max(np.abs(adv - o_adv)), np.max(np.abs(ret - o_ret)))
    assert worst < 1e-10


def test_clipped_objective_examples():
    assert clipped_objective(np.array([1.0]), np.array([3.0]), 0.2)[0] == 3.0
    assert clipped_objective(np.array([2.0]), np.array([1.0]), 0.2)[0] == pytest.approx(1.2)
    assert clipped_objective(np.array([0.5]), np.array([-1.0]), 0.2)[0] == pytest.approx(-0.8)


def test_clipped_objective_is_pessimistic_bound():
    rng = np.random.default_rng(0)
    ratio = np.exp(rng.standard_normal(1000) * 0.5)
    adv = rng.standard_normal(1000)
    assert np.all(clipped_objective(ratio, adv, 0.2) <= ratio * adv + 1e-12)


def test_advantage_normalization_invariant():
    rng = np.random.default_rng(1)
    adv = rng.standard_normal(2048) * 3.0 + 5.0
    normed = normalize_advantages(adv)
    assert abs(normed.mean()) < 1e-9
    assert abs(normed.std() - 1.0) < 1e-6


def _filled_buffer(rng, n=128, obs_dim=OBS_DIM, act_dim=2, policy=None, constant_reward=None):
    buf = RolloutBuffer(n, obs_dim, act_dim)
    for i in range(n):
        obs = rng.standard_normal(obs_dim)
        if policy is None:
            u, logp = rng.standard_normal(act_dim), float(rng.standard_normal())
        else:
            _, u, logp = policy.sample(obs, rng)
        reward = constant_reward if constant_reward is not None else float(rng.standard_normal())
        done = i % 37 == 36
        buf.add(obs, u, logp, reward, 0.0, done)
    return buf


def test_buffer_overflow_guard(rng):
    buf = RolloutBuffer(2, OBS_DIM, 2)
    for _ in range(2):
        buf.add(np.zeros(OBS_DIM), np.zeros(2), 0.0, 0.0, 0.0, False)
    with pytest.raises(RuntimeError):
        buf.add(np.zeros(OBS_DIM), np.zeros(2), 0.0, 0.0, 0.0, False)


def test_zero_advantages_leave_policy_untouched(rng):
    policy = GaussianPolicy(OBS_DIM, 2, rng=rng)
    value = value_net(OBS_DIM, rng=rng)
    cfg = PpoConfig(rollout_steps=128, epochs=2, minibatch=32, entropy_coef=0.0)
    buf = _filled_buffer(rng, 128, policy=policy, constant_reward=0.0)
    # Zero rewards and a zero value net: every advantage is exactly zero.
    assert np.array_equal(value.params, value.params)
    value.params[...] = 0.0
    before = policy.params.copy()
    stats = ppo_update(
        policy, value, Adam(policy.n_params, 3e-4), Adam(value.n_params, 3e-4),
        buf, cfg, np.random.default_rng(0), bootstrap_value=0.0,
    )
    assert np.array_equal(policy.params, before)
    assert stats["clip_fraction"] == 0.0


def test_update_moves_logprobs_toward_positive_advantage(rng):
    policy = GaussianPolicy(OBS_DIM, 2, rng=rng)
    value = value_net(OBS_DIM)  # zero net: advantages = discounted rewards
    cfg = PpoConfig(rollout_steps=128, epochs=4, minibatch=64, kl_stop=1e9)
    buf = _filled_buffer(rng, 128, policy=policy)
    # synthetic signal: reward = +1 for u[0] > 0 else -1
    buf.reward[:] = np.where(buf.presquash[:, 0] > 0, 1.0, -1.0)
    buf.done[:] = 1.0  # one-step episodes: advantage = reward - V
    logp_before, _ = policy.logprob(buf.obs, buf.presquash)
    ppo_update(
        policy, value, Adam(policy.n_params, 3e-4), Adam(value.n_params, 3e-4),
        buf, cfg, np.random.default_rng(0), bootstrap_value=0.0,
    )
    logp_after, _ = policy.logprob(buf.obs, buf.presquash)
    delta = logp_after - logp_before
    good = buf.presquash[:, 0] > 0
    assert delta[good].mean() > delta[~good].mean()


def test_clip_fraction_zero_when_ratios_inside_band(rng):
    policy = GaussianPolicy(OBS_DIM, 2, rng=rng)
    value = value_net(OBS_DIM, rng=rng)
    cfg = PpoConfig(rollout_steps=64, epochs=1, minibatch=64, lr=1e-12)
    buf = _filled_buffer(rng, 64, policy=policy)
    stats = ppo_update(
        policy, value, Adam(policy.n_params, 1e-12), Adam(value.n_params, 1e-12),
        buf, cfg, np.random.default_rng(0), bootstrap_value=0.0,
    )
    # with a vanishing lr the first (and only) epoch sees ratio == 1
    assert stats["clip_fraction"] == 0.0


def test_train_zero_steps_returns_untrained(base_env, weights):
    cfg = PpoConfig(total_steps=0)
    result = train_ppo(base_env, weights, cfg, seed=0)
    assert result.curve == []
    assert result.final_eval["episodes"] == 0


def test_training_deterministic_per_seed(weights):
    env = EpisodeConfig(task="base", start_position="random")
    cfg = PpoConfig(total_steps=2048 * 2, rollout_steps=1024, eval_episodes=3)
    a = run_training(env, weights, cfg, seed=5)
    b = run_training(env, weights, cfg, seed=5)
    assert a.curve == b.curve
    assert np.array_equal(a.policy.params, b.policy.params)
    assert np.array_equal(a.value.params, b.value.params)
    assert a.final_eval == b.final_eval


def test_config_validation():
    with pytest.raises(ValueError):
        PpoConfig(clip_eps=0.0).validate()
    with pytest.raises(ValueError):
        PpoConfig(gamma=1.5).validate()
    PpoConfig().validate()
