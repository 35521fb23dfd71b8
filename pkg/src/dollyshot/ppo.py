"""PPO: clipped-surrogate on-policy training, also GAIL's generator.

The rollout/update loop is shared: GAIL plugs in a hook that relabels the
freshly collected buffer with its learned reward before the update, while
plain PPO trains on the handcrafted reward recorded during collection.
Learning-curve rows always report the handcrafted episodic return, so PPO
and GAIL curves stay directly comparable.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .nets import Adam, GaussianPolicy, Mlp, value_net
from .rewards import RewardWeights, reward_for_task
from .sim import Action, EpisodeConfig, EpisodeStatus, FilmingSim, OBS_DIM, action_dim

log = logging.getLogger(__name__)

CURVE_COLUMNS = (
    "step",
    "seed",
    "mean_ep_reward",
    "std_ep_reward",
    "ep_len_mean",
    "success_rate",
)
_EP_WINDOW = 20  # completed episodes summarized per curve row


@dataclass
class PpoConfig:
    clip_eps: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    rollout_steps: int = 2048
    epochs: int = 10
    minibatch: int = 64
    lr: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    total_steps: int = 1_000_000
    seeds: int = 3
    kl_stop: float = 0.02
    eval_episodes: int = 100

    def validate(self) -> None:
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError("clip_eps must be in (0, 1)")
        for name in ("gamma", "gae_lambda"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        for name in ("rollout_steps", "epochs", "minibatch", "seeds"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")


class RolloutBuffer:
    """Fixed-capacity on-policy storage; flushed after every update."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.presquash = np.zeros((capacity, act_dim))
        self.logprob = np.zeros(capacity)
        self.reward = np.zeros(capacity)
        self.value = np.zeros(capacity)
        self.done = np.zeros(capacity)
        self.ptr = 0

    @property
    def full(self) -> bool:
        return self.ptr >= self.capacity

    def add(self, obs, u, logprob, reward, value, done) -> None:
        i = self.ptr
        if i >= self.capacity:
            raise RuntimeError("rollout buffer overflow")
        self.obs[i] = obs
        self.presquash[i] = u
        self.logprob[i] = logprob
        self.reward[i] = reward
        self.value[i] = value
        self.done[i] = 1.0 if done else 0.0
        self.ptr += 1

    def flush(self) -> None:
        self.ptr = 0


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """GAE advantages and returns over one buffer.

    delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t), and the
    advantage is the (gamma * lam)-discounted sum of deltas, cut at
    episode ends. The bootstrap value stands in for V(s_{t+1}) at the
    buffer boundary.
    """
    n = len(rewards)
    if n == 0:
        raise ValueError("empty buffer")
    advantages = np.zeros(n)
    last_adv = 0.0
    next_value = bootstrap_value
    for t in range(n - 1, -1, -1):
        mask = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * mask - values[t]
        last_adv = delta + gamma * lam * mask * last_adv
        advantages[t] = last_adv
        next_value = values[t]
    return advantages, advantages + values


def clipped_objective(ratio: np.ndarray, advantage: np.ndarray, clip_eps: float) -> np.ndarray:
    """Pessimistic clipped surrogate term, elementwise."""
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage
    return np.minimum(ratio * advantage, clipped)


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    return (advantages - advantages.mean()) / (advantages.std() + 1e-8)


def ppo_update(
    policy: GaussianPolicy,
    value: Mlp,
    policy_opt: Adam,
    value_opt: Adam,
    buffer: RolloutBuffer,
    cfg: PpoConfig,
    rng: np.random.Generator,
    bootstrap_value: float,
) -> dict:
    """One PPO update over a full buffer; returns loss statistics."""
    if not buffer.full:
        raise RuntimeError("buffer must be full before an update")
    advantages, returns = compute_gae(
        buffer.reward, buffer.value, buffer.done, bootstrap_value,
        cfg.gamma, cfg.gae_lambda,
    )
    advantages = normalize_advantages(advantages)

    n = buffer.capacity
    clip_hits = 0
    clip_total = 0
    value_losses = []
    policy_losses = []
    approx_kl = 0.0
    for _epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            idx = perm[start:start + cfg.minibatch]
            mb = len(idx)
            adv = advantages[idx]
            logp_new, cache = policy.logprob(buffer.obs[idx], buffer.presquash[idx])
            ratio = np.exp(logp_new - buffer.logprob[idx])
            surr = ratio * adv
            clip_lo, clip_hi = 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps
            clipped = np.clip(ratio, clip_lo, clip_hi) * adv
            policy_losses.append(-float(np.minimum(surr, clipped).mean()))
            clip_hits += int(np.sum(np.abs(ratio - 1.0) > cfg.clip_eps))
            clip_total += mb
            # Gradient flows through the unclipped branch wherever it is
            # active (surr <= clipped) or the ratio is inside the band.
            active = (surr <= clipped) | ((ratio >= clip_lo) & (ratio <= clip_hi))
            dlogp = -(active * ratio * adv) / mb
            grad = policy.logprob_backward(cache, dlogp)
            if cfg.entropy_coef != 0.0:
                # Pre-squash Gaussian entropy: d H / d log_std = 1 per dim.
                grad[-policy.act_dim:] -= cfg.entropy_coef
            if not np.all(np.isfinite(grad)):
                raise RuntimeError("non-finite policy gradient; aborting update")
            policy_opt.step(policy.params, grad)

            v_pred, v_cache = value.forward_cached(buffer.obs[idx])
            v_err = v_pred[:, 0] - returns[idx]
            value_losses.append(cfg.value_coef * float(np.mean(v_err**2)))
            dv = (cfg.value_coef * 2.0 * v_err / mb).reshape(-1, 1)
            v_grad, _ = value.backward(v_cache, dv)
            if not np.all(np.isfinite(v_grad)):
                raise RuntimeError("non-finite value gradient; aborting update")
            value_opt.step(value.params, v_grad)

        logp_all, _ = policy.logprob(buffer.obs, buffer.presquash)
        approx_kl = float(np.mean(buffer.logprob - logp_all))
        if approx_kl > cfg.kl_stop:
            break

    return {
        "policy_loss": float(np.mean(policy_losses)),
        "value_loss": float(np.mean(value_losses)),
        "clip_fraction": clip_hits / max(clip_total, 1),
        "approx_kl": approx_kl,
    }


@dataclass
class TrainResult:
    policy: GaussianPolicy
    value: Mlp
    curve: list[dict]
    final_eval: dict
    task: str
    seed: int
    extra: dict = field(default_factory=dict)


def evaluate_policy(
    policy: GaussianPolicy,
    env_cfg: EpisodeConfig,
    weights: RewardWeights,
    episodes: int,
    seed: int,
    deterministic: bool = True,
) -> dict:
    """Run evaluation episodes; returns reward/success/length summaries."""
    sim = FilmingSim(env_cfg)
    rng = np.random.default_rng(seed)
    sample_rng = np.random.default_rng(seed + 1)
    returns, lengths, successes = [], [], 0
    for _ in range(episodes):
        ep_seed = int(rng.integers(2**31 - 1))
        _, obs = sim.reset(ep_seed)
        total = 0.0
        while True:
            if deterministic:
                act_vec = policy.deterministic(obs)
            else:
                act_vec, _, _ = policy.sample(obs, sample_rng)
            outcome = sim.step(Action.from_vector(act_vec, env_cfg.task))
            total += reward_for_task(env_cfg.task, outcome.deltas, weights)
            obs = outcome.observation
            if outcome.status.terminal:
                if outcome.status is EpisodeStatus.SUCCESS:
                    successes += 1
                lengths.append(sim.state.step)
                break
        returns.append(total)
    return {
        "episodes": episodes,
        "mean_ep_reward": float(np.mean(returns)) if returns else 0.0,
        "std_ep_reward": float(np.std(returns)) if returns else 0.0,
        "success_rate": successes / episodes if episodes else 0.0,
        "ep_len_mean": float(np.mean(lengths)) if lengths else 0.0,
    }


def run_training(
    env_cfg: EpisodeConfig,
    weights: RewardWeights,
    cfg: PpoConfig,
    seed: int,
    reward_hook: Optional[Callable[[RolloutBuffer], dict]] = None,
    log_every: int = 10,
) -> TrainResult:
    """Shared PPO rollout/update loop, deterministic per seed.

    `reward_hook`, if given, is called with the full buffer before each
    update; it may rewrite `buffer.reward` in place (GAIL does) and its
    returned stats are merged into that iteration's curve row.
    """
    cfg.validate()
    env_cfg.validate()
    ss = np.random.SeedSequence(seed)
    init_rng, sample_rng, shuffle_rng, env_seed_rng = (
        np.random.default_rng(s) for s in ss.spawn(4)
    )

    act_dim = action_dim(env_cfg.task)
    policy = GaussianPolicy(OBS_DIM, act_dim, rng=init_rng)
    value = value_net(OBS_DIM, rng=init_rng)
    policy_opt = Adam(policy.n_params, lr=cfg.lr)
    value_opt = Adam(value.n_params, lr=cfg.lr)

    sim = FilmingSim(env_cfg)
    buffer = RolloutBuffer(cfg.rollout_steps, OBS_DIM, act_dim)
    curve: list[dict] = []
    recent = deque(maxlen=_EP_WINDOW)  # (handcrafted return, length, success)

    steps_done = 0
    iteration = 0
    obs = None
    ep_return = 0.0
    while steps_done < cfg.total_steps:
        buffer.flush()
        while not buffer.full:
            if obs is None:
                _, obs = sim.reset(int(env_seed_rng.integers(2**31 - 1)))
                ep_return = 0.0
            act_vec, u, logp = policy.sample(obs, sample_rng)
            outcome = sim.step(Action.from_vector(act_vec, env_cfg.task))
            reward = reward_for_task(env_cfg.task, outcome.deltas, weights)
            done = outcome.status.terminal
            buffer.add(obs, u, logp, reward, 0.0, done)  # values batched below
            ep_return += reward
            steps_done += 1
            if done:
                recent.append(
                    (ep_return, sim.state.step,
                     outcome.status is EpisodeStatus.SUCCESS)
                )
                obs = None
            else:
                obs = outcome.observation
        hook_stats = reward_hook(buffer) if reward_hook is not None else {}
        buffer.value[:] = value.forward(buffer.obs)[:, 0]
        bootstrap = 0.0 if obs is None else float(value.forward(obs)[0])
        update_stats = ppo_update(
            policy, value, policy_opt, value_opt, buffer, cfg, shuffle_rng, bootstrap
        )
        iteration += 1

        rets = [r for r, _, _ in recent]
        lens = [n for _, n, _ in recent]
        row = {
            "step": steps_done,
            "seed": seed,
            "mean_ep_reward": float(np.mean(rets)) if rets else 0.0,
            "std_ep_reward": float(np.std(rets)) if rets else 0.0,
            "ep_len_mean": float(np.mean(lens)) if lens else 0.0,
            "success_rate": (
                sum(1 for _, _, s in recent if s) / len(recent) if recent else 0.0
            ),
        }
        row.update(hook_stats)
        curve.append(row)
        if iteration % log_every == 0:
            log.info(
                "seed %d iter %d step %d reward %.3f success %.2f kl %.4f",
                seed, iteration, steps_done, row["mean_ep_reward"],
                row["success_rate"], update_stats["approx_kl"],
            )

    if cfg.total_steps > 0:
        final_eval = evaluate_policy(
            policy, env_cfg, weights, cfg.eval_episodes, seed=seed + 977
        )
    else:
        final_eval = {"episodes": 0}
    return TrainResult(
        policy=policy, value=value, curve=curve, final_eval=final_eval,
        task=env_cfg.task, seed=seed,
    )


def train_ppo(
    env_cfg: EpisodeConfig,
    weights: RewardWeights,
    cfg: PpoConfig,
    seed: int,
) -> TrainResult:
    """Train PPO on the handcrafted reward; returns policy + learning curve."""
    return run_training(env_cfg, weights, cfg, seed)
