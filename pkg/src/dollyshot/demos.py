"""Demonstration datasets: recording, JSONL storage, sampling, and a
scripted stand-in expert so the full pipeline runs without a human.

On-disk format (`.demos.jsonl`): line 1 is the manifest record, each
following line is one trajectory (metadata plus columnar transition
arrays). Floats are serialized with full round-trip precision, so
load(save(x)) reproduces x bit-exactly.
"""

from __future__ import annotations

import datetime
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import __version__ as _sim_version
from .rewards import RewardWeights, reward_for_task
from .scene import wrap_angle
from .sim import (
    Action,
    EpisodeConfig,
    EpisodeStatus,
    FilmingSim,
    SimState,
    TASK_BASE,
    obs_spec_hash,
)

DATASET_FORMAT_VERSION = 1

DIVERSITY_POSITIONS = {
    "low": ("P3",),
    "moderate": ("P1", "P3", "P5"),
    "high": ("P1", "P2", "P3", "P4", "P5"),
}

# Scripted-expert gains. Test fixtures, not tuned values: steering tracks
# the bearing error, throttle tracks the raw area deficit, pan/tilt
# recentre the subject in frame. The floor keeps the final approach at a
# deliberate pace; a pure proportional law would decay asymptotically and
# never actually reach the target size. Steering and camera commands are
# slew-limited against the previous action so corrections ease in the way
# an operator's would, instead of yanking the wheel at off-centre starts.
K_STEER = 2.0
K_THROTTLE = 1.0
K_PAN = 1.5
K_TILT = 1.5
THROTTLE_FLOOR = 0.3
COMMAND_SLEW = 0.15  # max change per step for steering/pan/tilt


class DatasetError(ValueError):
    """Raised for malformed, mismatched, or corrupted demo datasets."""


@dataclass
class Transition:
    step: int
    obs: np.ndarray
    action: np.ndarray
    next_obs: np.ndarray
    done: bool
    reward: float


@dataclass
class Trajectory:
    task: str
    start_position: str
    seed: int
    operator_id: str
    timestamp: str
    sim_version: str
    terminal_status: str
    transitions: list[Transition]

    def __len__(self) -> int:
        return len(self.transitions)


class TrajectoryAccumulator:
    """Collects one episode's transitions, enforcing observation chaining."""

    def __init__(self):
        self.transitions: list[Transition] = []

    def add(self, obs, action, next_obs, done: bool, reward: float) -> None:
        obs = np.asarray(obs, dtype=np.float64)
        action = np.asarray(action, dtype=np.float64)
        next_obs = np.asarray(next_obs, dtype=np.float64)
        if self.transitions:
            prev = self.transitions[-1]
            if obs.shape != prev.obs.shape or action.shape != prev.action.shape:
                raise DatasetError("observation/action dimensions changed mid-episode")
            if not np.array_equal(prev.next_obs, obs):
                raise DatasetError("transition chaining broken: obs != previous next_obs")
        self.transitions.append(
            Transition(len(self.transitions), obs, action, next_obs, bool(done), float(reward))
        )

    def seal(
        self,
        task: str,
        start_position: str,
        seed: int,
        terminal_status: str,
        operator_id: str = "unknown",
        timestamp: Optional[str] = None,
    ) -> Trajectory:
        if not self.transitions:
            raise DatasetError("cannot seal an empty trajectory")
        if timestamp is None:
            timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        return Trajectory(
            task=task,
            start_position=start_position,
            seed=seed,
            operator_id=operator_id,
            timestamp=timestamp,
            sim_version=_sim_version,
            terminal_status=terminal_status,
            transitions=self.transitions,
        )


@dataclass
class DatasetManifest:
    task: str
    diversity: str
    obs_hash: str
    trajectory_count: int
    sim_version: str = _sim_version
    created: str = ""
    env_config: dict = field(default_factory=dict)


@dataclass
class DemoDataset:
    manifest: DatasetManifest
    trajectories: list[Trajectory]

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def n_transitions(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def start_positions_present(self) -> tuple[str, ...]:
        return tuple(sorted({t.start_position for t in self.trajectories}))

    def transition_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """All (observation, action) rows stacked, in stored order."""
        obs = np.concatenate([[tr.obs for tr in t.transitions] for t in self.trajectories])
        act = np.concatenate([[tr.action for tr in t.transitions] for t in self.trajectories])
        return obs, act

    def validate(self) -> None:
        expected = set(DIVERSITY_POSITIONS.get(self.manifest.diversity, ()))
        if expected:
            present = set(self.start_positions_present())
            if not present <= expected:
                raise DatasetError(
                    f"diversity {self.manifest.diversity!r} allows starts "
                    f"{sorted(expected)}, but dataset contains {sorted(present)}"
                )
        for t in self.trajectories:
            if t.task != self.manifest.task:
                raise DatasetError("trajectory task does not match manifest")
            for a, b in zip(t.transitions, t.transitions[1:]):
                if not np.array_equal(a.next_obs, b.obs):
                    raise DatasetError("transition chaining broken in stored trajectory")


def save_dataset(dataset: DemoDataset, path: Union[str, os.PathLike]) -> None:
    dataset.validate()
    manifest = dataset.manifest
    head = {
        "format_version": DATASET_FORMAT_VERSION,
        "kind": "demos",
        "task": manifest.task,
        "diversity": manifest.diversity,
        "obs_hash": manifest.obs_hash,
        "trajectory_count": len(dataset.trajectories),
        "sim_version": manifest.sim_version,
        "created": manifest.created,
        "env_config": manifest.env_config,
    }
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(json.dumps(head) + "\n")
        for t in dataset.trajectories:
            row = {
                "meta": {
                    "task": t.task,
                    "start_position": t.start_position,
                    "seed": t.seed,
                    "operator_id": t.operator_id,
                    "timestamp": t.timestamp,
                    "sim_version": t.sim_version,
                },
                "terminal_status": t.terminal_status,
                "obs": [tr.obs.tolist() for tr in t.transitions],
                "action": [tr.action.tolist() for tr in t.transitions],
                "next_obs": [tr.next_obs.tolist() for tr in t.transitions],
                "done": [tr.done for tr in t.transitions],
                "reward": [tr.reward for tr in t.transitions],
            }
            fh.write(json.dumps(row) + "\n")


def load_dataset(
    path: Union[str, os.PathLike], expect_task: Optional[str] = None
) -> DemoDataset:
    with open(path) as fh:
        lines = [line for line in fh.read().splitlines() if line]
    if not lines:
        raise DatasetError(f"{path}: empty dataset file")
    head = json.loads(lines[0])
    if head.get("format_version") != DATASET_FORMAT_VERSION:
        raise DatasetError(
            f"{path}: unsupported dataset format version {head.get('format_version')!r}"
        )
    if head.get("kind") != "demos":
        raise DatasetError(f"{path}: not a demos file")
    if head.get("obs_hash") != obs_spec_hash():
        raise DatasetError(
            f"{path}: observation spec hash mismatch "
            f"({head.get('obs_hash')!r} != {obs_spec_hash()!r})"
        )
    if expect_task is not None and head.get("task") != expect_task:
        raise DatasetError(
            f"{path}: dataset task {head.get('task')!r} does not match "
            f"required task {expect_task!r}"
        )
    manifest = DatasetManifest(
        task=head["task"],
        diversity=head["diversity"],
        obs_hash=head["obs_hash"],
        trajectory_count=head["trajectory_count"],
        sim_version=head.get("sim_version", ""),
        created=head.get("created", ""),
        env_config=head.get("env_config", {}),
    )
    trajectories = []
    for line in lines[1:]:
        row = json.loads(line)
        meta = row["meta"]
        transitions = [
            Transition(
                step=i,
                obs=np.array(o, dtype=np.float64),
                action=np.array(a, dtype=np.float64),
                next_obs=np.array(n, dtype=np.float64),
                done=bool(d),
                reward=float(r),
            )
            for i, (o, a, n, d, r) in enumerate(
                zip(row["obs"], row["action"], row["next_obs"], row["done"], row["reward"])
            )
        ]
        trajectories.append(
            Trajectory(
                task=meta["task"],
                start_position=meta["start_position"],
                seed=int(meta["seed"]),
                operator_id=meta["operator_id"],
                timestamp=meta["timestamp"],
                sim_version=meta["sim_version"],
                terminal_status=row["terminal_status"],
                transitions=transitions,
            )
        )
    if len(trajectories) != manifest.trajectory_count:
        raise DatasetError(
            f"{path}: manifest promises {manifest.trajectory_count} trajectories, "
            f"file holds {len(trajectories)}"
        )
    dataset = DemoDataset(manifest=manifest, trajectories=trajectories)
    dataset.validate()
    return dataset


def scripted_expert(state: SimState, task: str, area_target: float = 10.0) -> Action:
    """Proportional stand-in for the human operator.

    Steering tracks the bearing to the subject, throttle the area deficit,
    and (Full control) pan/tilt the frame-centre error. Returns the zero
    action when the subject is not visible.
    """
    bbox = state.prev_bbox
    if bbox is None:
        return Action.zero()
    prev = state.prev_action
    bearing = math.atan2(
        state.subject.y - state.pose.y, state.subject.x - state.pose.x
    )
    heading_err = wrap_angle(bearing - state.pose.heading)
    steering = _slew(prev.steering, _unit_clamp(K_STEER * heading_err))

    deficit = area_target - bbox.area
    if deficit > 0.0:
        throttle = _unit_clamp(max(K_THROTTLE * deficit, THROTTLE_FLOOR))
    else:
        throttle = 0.0

    if task == TASK_BASE:
        return Action(throttle, steering)
    pan_rate = _slew(prev.pan_rate, _unit_clamp(K_PAN * (60.0 - bbox.cx) / 60.0))
    tilt_rate = _slew(prev.tilt_rate, _unit_clamp(K_TILT * (40.0 - bbox.cy) / 40.0))
    return Action(throttle, steering, pan_rate, tilt_rate)


def record_scripted_dataset(
    env_cfg: EpisodeConfig,
    diversity: str,
    count: int,
    seed: int,
    weights: Optional[RewardWeights] = None,
    operator_id: str = "scripted-expert",
    require_success: bool = True,
) -> DemoDataset:
    """Record `count` scripted-expert demonstrations, cycling the start
    positions of the requested diversity level."""
    if diversity not in DIVERSITY_POSITIONS:
        raise DatasetError(f"unknown diversity level {diversity!r}")
    if weights is None:
        weights = RewardWeights()
    positions = DIVERSITY_POSITIONS[diversity]
    seed_rng = np.random.default_rng(seed)
    trajectories = []
    for i in range(count):
        start = positions[i % len(positions)]
        ep_seed = int(seed_rng.integers(2**31 - 1))
        trajectories.append(
            record_episode(
                env_cfg, start, ep_seed, weights,
                operator_id=operator_id, require_success=require_success,
            )
        )
    manifest = DatasetManifest(
        task=env_cfg.task,
        diversity=diversity,
        obs_hash=obs_spec_hash(),
        trajectory_count=count,
        created=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        env_config=_env_config_summary(env_cfg),
    )
    return DemoDataset(manifest=manifest, trajectories=trajectories)


def record_episode(
    env_cfg: EpisodeConfig,
    start: str,
    ep_seed: int,
    weights: RewardWeights,
    operator_id: str = "scripted-expert",
    require_success: bool = True,
) -> Trajectory:
    """Drive one scripted-expert episode and seal it into a trajectory."""
    cfg = replace(env_cfg, start_position=start)
    sim = FilmingSim(cfg)
    _, obs = sim.reset(ep_seed)
    acc = TrajectoryAccumulator()
    while True:
        action = scripted_expert(sim.state, cfg.task, cfg.area_target)
        outcome = sim.step(action)
        reward = reward_for_task(cfg.task, outcome.deltas, weights)
        acc.add(obs, action.to_vector(cfg.task), outcome.observation,
                outcome.status.terminal, reward)
        obs = outcome.observation
        if outcome.status.terminal:
            status = outcome.status
            break
    if require_success and status is not EpisodeStatus.SUCCESS:
        raise DatasetError(
            f"scripted expert failed from {start} (seed {ep_seed}): {status.value}"
        )
    return acc.seal(
        task=cfg.task,
        start_position=start,
        seed=ep_seed,
        terminal_status=status.value,
        operator_id=operator_id,
    )


def sample_batch(
    dataset: DemoDataset,
    size: int,
    rng: Union[int, np.random.Generator],
    replace: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform (observation, action) sample over all stored transitions."""
    if len(dataset) == 0 or dataset.n_transitions == 0:
        raise DatasetError("cannot sample from an empty dataset")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    obs, act = dataset.transition_arrays()
    idx = rng.choice(len(obs), size=size, replace=replace)
    return obs[idx], act[idx]


def _env_config_summary(cfg: EpisodeConfig) -> dict:
    summary = {
        k: v for k, v in vars(cfg).items()
        if isinstance(v, (int, float, str, bool))
    }
    summary["subject"] = vars(cfg.subject).copy()
    if not isinstance(cfg.start_position, str):
        summary["start_position"] = vars(cfg.start_position).copy()
    return summary


def _unit_clamp(x: float) -> float:
    return -1.0 if x < -1.0 else (1.0 if x > 1.0 else x)


def _slew(previous: float, target: float, rate: float = COMMAND_SLEW) -> float:
    if target > previous + rate:
        return previous + rate
    if target < previous - rate:
        return previous - rate
    return target

