"""Run configuration: one JSON document with a section per subsystem.

Every knob has an explicit default here; loading merges a user file over
the defaults, rejecting unknown keys, and the fully resolved document is
echoed into the header of every artifact a run produces.
"""

from __future__ import annotations

import copy
import json
from typing import Any, Optional

from .evalkit import TwinConfig
from .gail import GailConfig
from .ppo import PpoConfig
from .rewards import RewardWeights
from .scene import SubjectSpec
from .sim import EpisodeConfig

CONFIG_FORMAT_VERSION = 1

DESK_TOTAL_STEPS = 200_000
PAPER_TOTAL_STEPS = 1_000_000

DEFAULTS: dict[str, Any] = {
    "env": {
        "task": "base",
        "start_position": "random",
        "max_steps": 1500,
        "dt": 1.0 / 30.0,
        "area_target": 10.0,
        "v_max": 0.5,
        "omega_max": 1.5,
        "pan_rate_max": 1.0,
        "tilt_rate_max": 0.5,
        "pan_max": 0.2,
        "tilt_max": 0.35,
        "camera_height": 0.25,
        "hfov_deg": 90.0,
        "start_noise": 0.4,
        "actuator_tau": 0.1,
        "subject": {"x": 0.0, "y": 0.0, "width": 0.5, "height": 1.7},
    },
    "reward": {
        "lambda_area": 1.0,
        "lambda_steer": 0.5,
        "lambda_cam": 0.5,
    },
    "ppo": {
        "clip_eps": 0.2,
        "gamma": 0.99,
        "gae_lambda": 0.95,
        "rollout_steps": 2048,
        "epochs": 10,
        "minibatch": 64,
        "lr": 3e-4,
        "value_coef": 0.5,
        "entropy_coef": 0.0,
        "total_steps": DESK_TOTAL_STEPS,
        "seeds": 3,
        "kl_stop": 0.02,
        "eval_episodes": 100,
    },
    "gail": {
        "disc_lr": 1e-4,
        "disc_batch": 64,
        "disc_updates": 2,
        "reward_clip": 10.0,
        "grad_penalty": 0.0,
    },
    "demos": {
        "count": 25,
        "diversity": "high",
        "require_success": True,
    },
    "eval": {
        "starts": ["left", "centre", "right"],
        "episodes": 100,
        "twin": {
            "gain_scale": 0.9,
            "dt_jitter": 0.1,
            "obs_noise": 0.01,
            "start_offset": 0.05,
        },
    },
    "teleop": {
        "port": 8008,
        "tick_hz": 30.0,
        "lockstep": False,
        "action_timeout": 1.0,
    },
}


class ConfigError(ValueError):
    """Raised for unknown keys or malformed values in a run config."""


def resolved_config(user: Optional[dict] = None, profile: str = "desk") -> dict:
    """Merge a user document over the defaults; reject unknown keys."""
    merged = copy.deepcopy(DEFAULTS)
    if profile == "paper":
        merged["ppo"]["total_steps"] = PAPER_TOTAL_STEPS
    elif profile != "desk":
        raise ConfigError(f"unknown profile {profile!r} (expected 'desk' or 'paper')")
    if user:
        _merge(merged, user, path="")
    merged["format_version"] = CONFIG_FORMAT_VERSION
    merged["profile"] = profile
    return merged


def load_config(path: Optional[str], profile: str = "desk") -> dict:
    user = None
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: config root must be a JSON object")
    return resolved_config(user, profile)


def _merge(base: dict, user: dict, path: str) -> None:
    for key, value in user.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected an object")
            _merge(base[key], value, here)
        else:
            if isinstance(base[key], bool) != isinstance(value, bool):
                raise ConfigError(f"{here}: expected {type(base[key]).__name__}")
            if isinstance(base[key], (int, float)) and not isinstance(value, (int, float)):
                raise ConfigError(f"{here}: expected a number")
            if isinstance(base[key], str) and not isinstance(value, str):
                raise ConfigError(f"{here}: expected a string")
            base[key] = value


def env_config(cfg: dict, task: Optional[str] = None) -> EpisodeConfig:
    section = cfg["env"]
    subject = SubjectSpec(**section["subject"])
    kwargs = {k: v for k, v in section.items() if k != "subject"}
    if task is not None:
        kwargs["task"] = task
    out = EpisodeConfig(subject=subject, **kwargs)
    out.validate()
    return out


def reward_weights(cfg: dict) -> RewardWeights:
    return RewardWeights(**cfg["reward"])


def ppo_config(cfg: dict, **overrides) -> PpoConfig:
    out = PpoConfig(**{**cfg["ppo"], **overrides})
    out.validate()
    return out


def gail_config(cfg: dict) -> GailConfig:
    out = GailConfig(**cfg["gail"])
    out.validate()
    return out


def twin_config(cfg: dict) -> TwinConfig:
    out = TwinConfig(**cfg["eval"]["twin"])
    out.validate()
    return out
