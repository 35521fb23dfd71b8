"""GAIL: adversarial imitation against recorded expert demonstrations.

A discriminator learns to separate expert (observation, action) pairs
from the agent's; the policy is optimized by the PPO generator against
the discriminator-derived reward -ln(1 - D), clipped above. Learning
curves still report the handcrafted episodic reward so GAIL and PPO runs
are directly comparable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .demos import DatasetError, DemoDataset
from .nets import Adam, Discriminator, softplus, _sigmoid
from .ppo import PpoConfig, RolloutBuffer, TrainResult, run_training
from .rewards import RewardWeights
from .sim import EpisodeConfig, OBS_DIM, action_dim, obs_spec_hash

log = logging.getLogger(__name__)

GAIL_CURVE_COLUMNS = ("disc_loss", "disc_acc", "mean_surrogate_reward")


@dataclass
class GailConfig:
    disc_lr: float = 1e-4
    disc_batch: int = 64
    disc_updates: int = 2  # discriminator updates per generator iteration
    reward_clip: float = 10.0
    grad_penalty: float = 0.0
    # Subtract the chance-level ln 2 from the generator reward. Without
    # this the reward is positive everywhere, and because episodes end at
    # Success the return-maximizing policy learns to linger near the
    # subject forever instead of finishing the shot (observed: success
    # rate peaks mid-training, then decays to 0 as episode length climbs
    # to the cap). Centring at D = 0.5 removes that survival bias while
    # leaving the discriminator objective untouched.
    center_reward: bool = True

    def validate(self) -> None:
        if self.disc_lr <= 0.0:
            raise ValueError("disc_lr must be positive")
        if self.disc_batch < 2 or self.disc_batch % 2 != 0:
            raise ValueError("disc_batch must be an even number >= 2")
        if self.disc_updates < 0:
            raise ValueError("disc_updates must be >= 0")
        if self.reward_clip <= 0.0:
            raise ValueError("reward_clip must be positive")
        if self.grad_penalty < 0.0:
            raise ValueError("grad_penalty must be >= 0")


def discriminator_loss(
    disc: Discriminator,
    expert_obs: np.ndarray,
    expert_act: np.ndarray,
    agent_obs: np.ndarray,
    agent_act: np.ndarray,
) -> tuple[float, np.ndarray, dict]:
    """Mean binary cross-entropy with expert label 1, agent label 0.

    Returns (loss, flat parameter gradient, stats). Gradients are exact;
    the loss is computed from logits, so saturated discriminators stay
    numerically stable.
    """
    n_e, n_a = len(expert_obs), len(agent_obs)
    if n_e == 0 or n_a == 0:
        raise ValueError("discriminator batch halves must be non-empty")
    x = np.concatenate(
        [
            np.concatenate([np.atleast_2d(expert_obs), np.atleast_2d(expert_act)], axis=1),
            np.concatenate([np.atleast_2d(agent_obs), np.atleast_2d(agent_act)], axis=1),
        ]
    )
    out, cache = disc.net.forward_cached(x)
    logits = out[:, 0]
    probs = _sigmoid(logits)
    n = n_e + n_a
    # -log D on the expert half, -log(1 - D) on the agent half.
    loss = float(
        (softplus(-logits[:n_e]).sum() + softplus(logits[n_e:]).sum()) / n
    )
    dlogits = np.empty(n)
    dlogits[:n_e] = (probs[:n_e] - 1.0) / n
    dlogits[n_e:] = probs[n_e:] / n
    grad, _ = disc.net.backward(cache, dlogits.reshape(-1, 1))
    acc = float(
        (np.sum(probs[:n_e] > 0.5) + np.sum(probs[n_e:] < 0.5)) / n
    )
    return loss, grad, {"disc_loss": loss, "disc_acc": acc}


def _directional_penalty_grad(
    disc: Discriminator, x: np.ndarray, coef: float, rng: np.random.Generator
) -> np.ndarray:
    """Gradient of a finite-difference smoothness penalty on the logits.

    Penalizes squared directional derivatives of the logit along random
    unit directions -- a first-order stand-in for a full gradient penalty
    that avoids double backprop.
    """
    eps = 1e-3
    direction = rng.standard_normal(x.shape)
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    out_p, cache_p = disc.net.forward_cached(x + eps * direction)
    out_m, cache_m = disc.net.forward_cached(x - eps * direction)
    slope = (out_p - out_m) / (2.0 * eps)
    d_slope = coef * 2.0 * slope / (len(x) * 2.0 * eps)
    grad_p, _ = disc.net.backward(cache_p, d_slope)
    grad_m, _ = disc.net.backward(cache_m, -d_slope)
    return grad_p + grad_m


def surrogate_reward(
    disc: Discriminator,
    obs: np.ndarray,
    act: np.ndarray,
    reward_clip: float = 10.0,
) -> np.ndarray:
    """Generator reward -ln(1 - D(s, a)), clipped to [0, reward_clip].

    Strictly increasing in D before the clip and non-negative, so early
    episodes are survivable.
    """
    # 1 - sigmoid(l) == sigmoid(-l), hence -ln(1 - D) == softplus(logit).
    raw = softplus(disc.logits(obs, act))
    return np.clip(raw, 0.0, reward_clip)


def train_gail(
    dataset: DemoDataset,
    env_cfg: EpisodeConfig,
    gail_cfg: GailConfig,
    ppo_cfg: PpoConfig,
    weights: RewardWeights,
    seed: int,
) -> TrainResult:
    """Alternate discriminator updates and PPO generator updates.

    The buffer collected by the generator is relabeled with the surrogate
    reward before each PPO update; agent samples for the discriminator
    come from that same (most recent) buffer only.
    """
    gail_cfg.validate()
    if len(dataset) == 0 or dataset.n_transitions == 0:
        raise DatasetError("expert dataset is empty")
    if dataset.manifest.task != env_cfg.task:
        raise DatasetError(
            f"dataset task {dataset.manifest.task!r} does not match "
            f"environment task {env_cfg.task!r}"
        )
    if dataset.manifest.obs_hash != obs_spec_hash():
        raise DatasetError("dataset observation spec does not match this build")

    expert_obs, expert_act = dataset.transition_arrays()
    act_dim = action_dim(env_cfg.task)
    if expert_obs.shape[1] != OBS_DIM or expert_act.shape[1] != act_dim:
        raise DatasetError(
            f"expert transitions have shape obs{expert_obs.shape} "
            f"act{expert_act.shape}; expected obs dim {OBS_DIM}, act dim {act_dim}"
        )

    ss = np.random.SeedSequence((seed, 0xD15C))
    disc_init_rng, batch_rng, penalty_rng = (
        np.random.default_rng(s) for s in ss.spawn(3)
    )
    disc = Discriminator(OBS_DIM, act_dim, rng=disc_init_rng)
    disc_opt = Adam(disc.net.params.size, lr=gail_cfg.disc_lr)
    half = gail_cfg.disc_batch // 2

    def reward_hook(buffer: RolloutBuffer) -> dict:
        agent_act_all = np.tanh(buffer.presquash)
        stats = {"disc_loss": 0.0, "disc_acc": 0.0}
        for _ in range(gail_cfg.disc_updates):
            e_idx = batch_rng.choice(len(expert_obs), size=half, replace=True)
            a_idx = batch_rng.choice(buffer.capacity, size=half, replace=True)
            loss, grad, stats = discriminator_loss(
                disc,
                expert_obs[e_idx], expert_act[e_idx],
                buffer.obs[a_idx], agent_act_all[a_idx],
            )
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"discriminator diverged: loss={loss!r} at step ~{buffer.capacity}"
                )
            if gail_cfg.grad_penalty > 0.0:
                x = np.concatenate(
                    [
                        np.concatenate([expert_obs[e_idx], expert_act[e_idx]], axis=1),
                        np.concatenate([buffer.obs[a_idx], agent_act_all[a_idx]], axis=1),
                    ]
                )
                grad = grad + _directional_penalty_grad(
                    disc, x, gail_cfg.grad_penalty, penalty_rng
                )
            disc_opt.step(disc.net.params, grad)
        rewards = surrogate_reward(
            disc, buffer.obs, agent_act_all, gail_cfg.reward_clip
        )
        stats["mean_surrogate_reward"] = float(rewards.mean())
        if gail_cfg.center_reward:
            rewards = rewards - math.log(2.0)
        buffer.reward[:] = rewards
        return stats

    return run_training(env_cfg, weights, ppo_cfg, seed, reward_hook=reward_hook)
