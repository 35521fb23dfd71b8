"""Handcrafted per-step rewards for the Base and Full control tasks.

Base control rewards subject-area growth and penalises changes in the
steering rate; Full control extends the smoothness penalty to pan and
tilt rates. These are the rewards PPO trains on and every policy
(including GAIL) is evaluated with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class RewardWeights:
    """Non-negative weights of the area and smoothness terms.

    Defaults are this artifact's declared choice; they are recorded in
    every metric report so runs remain comparable.
    """

    lambda_area: float = 1.0
    lambda_steer: float = 0.5
    lambda_cam: float = 0.5

    def __post_init__(self) -> None:
        for name in ("lambda_area", "lambda_steer", "lambda_cam"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and non-negative")


@dataclass(frozen=True)
class StepDeltas:
    """Per-step changes driving the reward.

    d_area is the change in subject area (percent of frame) between
    consecutive steps; the rate deltas are changes in the commanded
    (post-smoothing) steering / pan / tilt rates in rad/s.
    """

    d_area: float
    d_steer_rate: float
    d_pan_rate: float = 0.0
    d_tilt_rate: float = 0.0


def base_reward(deltas: StepDeltas, weights: RewardWeights) -> float:
    """Area progress minus the squared change in steering rate."""
    return (
        weights.lambda_area * deltas.d_area
        - weights.lambda_steer * deltas.d_steer_rate**2
    )


def full_reward(deltas: StepDeltas, weights: RewardWeights) -> float:
    """Base reward minus the squared changes in pan and tilt rates."""
    return base_reward(deltas, weights) - weights.lambda_cam * (
        deltas.d_pan_rate**2 + deltas.d_tilt_rate**2
    )


def reward_for_task(task: str, deltas: StepDeltas, weights: RewardWeights) -> float:
    """Dispatch to the task's reward equation ("base" or "full")."""
    if task == "base":
        return base_reward(deltas, weights)
    if task == "full":
        return full_reward(deltas, weights)
    raise ValueError(f"unknown task {task!r}")
