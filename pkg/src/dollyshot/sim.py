"""Deterministic kinematic simulation of the filming robot MDP.

One `FilmingSim` instance owns one episode at a time and is driven by a
single caller; instances are independent, so rollout workers simply hold
their own. Equal seeds plus equal action sequences reproduce bit-identical
states and observations.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from .rewards import StepDeltas
from .scene import (
    DEFAULT_HFOV_DEG,
    FRAME_CX,
    FRAME_CY,
    BoundingBox,
    CameraState,
    Pose,
    SubjectSpec,
    centre_in_frame,
    project_subject,
    wrap_angle,
)

TASK_BASE = "base"
TASK_FULL = "full"
TASKS = (TASK_BASE, TASK_FULL)

# Start poses sit on a stage line 4 m back from the subject, spanning 2 m
# to either side, all facing "downstage" (+y). P1..P5 run left to right,
# so the outer marks see the subject well off the frame centre at reset;
# that lateral spread is what the low/moderate/high diversity levels of a
# demo dataset do or do not cover.
_STAGE_DEPTH = 4.0
_STAGE_LATERALS = {"P1": -2.0, "P2": -1.0, "P3": 0.0, "P4": 1.0, "P5": 2.0}
_MAX_START_DRAWS = 100

START_POSITIONS = {
    name: Pose(lat, -_STAGE_DEPTH, math.pi / 2.0)
    for name, lat in _STAGE_LATERALS.items()
}
START_POSITION_NAMES = tuple(START_POSITIONS)


def action_dim(task: str) -> int:
    if task == TASK_BASE:
        return 2
    if task == TASK_FULL:
        return 4
    raise ValueError(f"unknown task {task!r}")


@dataclass(frozen=True)
class Action:
    """Normalized actuator commands, each in [-1, 1].

    Base control uses throttle and steering only; pan/tilt rates must be
    zero there. Full control drives all four.
    """

    throttle: float
    steering: float
    pan_rate: float = 0.0
    tilt_rate: float = 0.0

    def __post_init__(self) -> None:
        for value in (self.throttle, self.steering, self.pan_rate, self.tilt_rate):
            if not math.isfinite(value):
                raise ValueError("action components must be finite")
            if abs(value) > 1.0 + 1e-9:
                raise ValueError("action components must lie in [-1, 1]")

    @classmethod
    def zero(cls) -> "Action":
        return cls(0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_vector(cls, vec, task: str) -> "Action":
        """Build from a policy output vector, clamping into [-1, 1]."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (action_dim(task),):
            raise ValueError(
                f"expected {action_dim(task)} action components for task "
                f"{task!r}, got shape {vec.shape}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValueError("action components must be finite")
        comps = [float(min(1.0, max(-1.0, v))) for v in vec]
        if task == TASK_BASE:
            return cls(comps[0], comps[1])
        return cls(*comps)

    def to_vector(self, task: str) -> np.ndarray:
        if task == TASK_BASE:
            return np.array([self.throttle, self.steering])
        return np.array([self.throttle, self.steering, self.pan_rate, self.tilt_rate])


@dataclass
class EpisodeConfig:
    """Everything that defines an episode: task, geometry, limits, timing."""

    task: str = TASK_BASE
    start_position: Union[str, Pose] = "P3"  # P1..P5, "random", or explicit pose
    max_steps: int = 1500
    dt: float = 1.0 / 30.0
    area_target: float = 10.0
    v_max: float = 0.5
    omega_max: float = 1.5
    pan_rate_max: float = 1.0
    tilt_rate_max: float = 0.5
    # Camera trim range, not a gimbal: wide pan/tilt limits let policies
    # park the subject near the frame corner, where wide-angle stretch
    # inflates the box enough to fake the size target from 3 m out.
    pan_max: float = 0.2
    tilt_max: float = 0.35
    # Low mast: the subject's head would clip the frame top during the
    # final approach unless the camera tilts up, so Full control's tilt
    # has a real framing job to do.
    camera_height: float = 0.25
    hfov_deg: float = DEFAULT_HFOV_DEG
    start_noise: float = 0.4  # uniform +/- jitter: metres on x/y, radians on heading
    actuator_tau: float = 0.1  # first-order smoothing time constant, seconds
    subject: SubjectSpec = field(default_factory=SubjectSpec)

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if isinstance(self.start_position, str):
            if self.start_position not in START_POSITIONS and self.start_position != "random":
                raise ValueError(
                    f"start_position must be one of {START_POSITION_NAMES}, "
                    f"'random', or an explicit Pose"
                )
        for name in ("area_target", "v_max", "omega_max", "pan_rate_max",
                     "tilt_rate_max", "pan_max", "tilt_max", "hfov_deg"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.start_noise < 0.0 or self.actuator_tau < 0.0:
            raise ValueError("start_noise and actuator_tau must be >= 0")


class EpisodeStatus(str, Enum):
    RUNNING = "running"
    SUCCESS = "success"
    TRUNCATED = "truncated"
    SUBJECT_LOST = "subject_lost"

    @property
    def terminal(self) -> bool:
        return self is not EpisodeStatus.RUNNING


# Observation layout. Deltas are scaled by rough per-step magnitudes so the
# features use the [-1, 1] range; prev-action slots echo the last command
# (Base zeroes the pan/tilt slots). The spec hash guards datasets and
# checkpoints against silently mixing observation definitions.
OBS_FEATURES = (
    "area_rel",
    "frame_x_rel",
    "frame_y_rel",
    "d_area",
    "d_frame_x",
    "d_frame_y",
    "prev_throttle",
    "prev_steering",
    "prev_pan_rate",
    "prev_tilt_rate",
)
OBS_DIM = len(OBS_FEATURES)
_D_AREA_SCALE = 2.0
_D_CX_SCALE = 12.0
_D_CY_SCALE = 8.0

OBS_SPEC = {
    "version": 1,
    "features": OBS_FEATURES,
    "frame": (120.0, 80.0),
    "delta_scales": (_D_AREA_SCALE, _D_CX_SCALE, _D_CY_SCALE),
    "clamp": (-1.0, 1.0),
}


def obs_spec_hash() -> str:
    blob = json.dumps(OBS_SPEC, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _clip1(x: float) -> float:
    return -1.0 if x < -1.0 else (1.0 if x > 1.0 else x)


@dataclass
class SimState:
    """Full simulator state; everything an episode's future depends on."""

    pose: Pose
    camera: CameraState
    subject: SubjectSpec
    step: int
    prev_action: Action
    prev_bbox: BoundingBox
    smoothed_throttle: float
    smoothed_steering: float
    rng: np.random.Generator


@dataclass(frozen=True)
class StepOutcome:
    observation: np.ndarray
    status: EpisodeStatus
    bbox: Optional[BoundingBox]
    deltas: StepDeltas


class FilmingSim:
    """Unicycle filming robot with a pan/tilt camera watching a subject.

    Pose advances by exact closed-form arc integration of the unicycle
    model; throttle and steering pass through a first-order smoothing
    stage (time constant `actuator_tau`) before integration.
    """

    def __init__(self, config: EpisodeConfig):
        config.validate()
        self.config = config
        if config.actuator_tau > 0.0:
            self._alpha = 1.0 - math.exp(-config.dt / config.actuator_tau)
        else:
            self._alpha = 1.0
        self.state: Optional[SimState] = None
        self.status = EpisodeStatus.RUNNING
        self.last_start_id: Optional[str] = None

    # Hooks the perturbed twin environment overrides; the plain simulator
    # is exactly the identity on all three.
    def _step_dt(self, rng: np.random.Generator) -> float:
        return self.config.dt

    def _perturb_start(self, pose: Pose, rng: np.random.Generator) -> Pose:
        return pose

    def _postprocess_obs(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return obs

    def reset(self, seed: int) -> tuple[SimState, np.ndarray]:
        """Start a fresh episode. The seed fixes the start jitter and any
        downstream stochasticity, so equal seeds reproduce exactly."""
        cfg = self.config
        rng = np.random.default_rng(seed)

        start = cfg.start_position
        if isinstance(start, Pose):
            base = start
            self.last_start_id = "custom"
        elif start == "random":
            name = START_POSITION_NAMES[rng.integers(len(START_POSITION_NAMES))]
            base = START_POSITIONS[name]
            self.last_start_id = name
        else:
            base = START_POSITIONS[start]
            self.last_start_id = start

        noise = cfg.start_noise
        camera = CameraState(pan=0.0, tilt=0.0, height=cfg.camera_height)
        # Large jitter can occasionally point the camera off the subject;
        # redraw (deterministically, from the same stream) rather than die.
        bbox = None
        for _ in range(_MAX_START_DRAWS):
            pose = Pose(
                base.x + rng.uniform(-noise, noise),
                base.y + rng.uniform(-noise, noise),
                base.heading + rng.uniform(-noise, noise),
            )
            pose = self._perturb_start(pose, rng)
            bbox = project_subject(pose, camera, cfg.subject, cfg.hfov_deg)
            if bbox is not None and centre_in_frame(bbox):
                break
        else:
            raise ValueError(
                "subject not visible from the configured start pose; "
                "start poses must face the subject"
            )

        self.state = SimState(
            pose=pose,
            camera=camera,
            subject=cfg.subject,
            step=0,
            prev_action=Action.zero(),
            prev_bbox=bbox,
            smoothed_throttle=0.0,
            smoothed_steering=0.0,
            rng=rng,
        )
        self.status = EpisodeStatus.RUNNING
        obs = self._observe(bbox, bbox, Action.zero(), rng)
        return self.state, obs

    def step(self, action: Action) -> StepOutcome:
        """Advance one control period; returns the new observation, the
        episode status, the projected bbox, and the reward deltas."""
        state = self.state
        if state is None:
            raise RuntimeError("reset() must be called before step()")
        if self.status.terminal:
            raise RuntimeError("episode already finished; call reset()")
        cfg = self.config
        if cfg.task == TASK_BASE and (action.pan_rate != 0.0 or action.tilt_rate != 0.0):
            raise ValueError("base task accepts throttle and steering only")

        dt = self._step_dt(state.rng)

        prev_steer_rate = cfg.omega_max * state.smoothed_steering
        state.smoothed_throttle += self._alpha * (action.throttle - state.smoothed_throttle)
        state.smoothed_steering += self._alpha * (action.steering - state.smoothed_steering)

        v = cfg.v_max * state.smoothed_throttle
        omega = cfg.omega_max * state.smoothed_steering
        pose = state.pose
        if abs(omega) < 1e-12:
            x = pose.x + v * math.cos(pose.heading) * dt
            y = pose.y + v * math.sin(pose.heading) * dt
            heading = pose.heading
        else:
            radius = v / omega
            new_heading = pose.heading + omega * dt
            x = pose.x + radius * (math.sin(new_heading) - math.sin(pose.heading))
            y = pose.y - radius * (math.cos(new_heading) - math.cos(pose.heading))
            heading = wrap_angle(new_heading)
        state.pose = Pose(x, y, heading)

        if cfg.task == TASK_FULL:
            cam = state.camera
            cam.pan = _clamp(cam.pan + cfg.pan_rate_max * action.pan_rate * dt, cfg.pan_max)
            cam.tilt = _clamp(cam.tilt + cfg.tilt_rate_max * action.tilt_rate * dt, cfg.tilt_max)

        state.step += 1

        bbox = project_subject(state.pose, state.camera, cfg.subject, cfg.hfov_deg)
        if bbox is None or not centre_in_frame(bbox):
            status = EpisodeStatus.SUBJECT_LOST
        elif bbox.area >= cfg.area_target:
            status = EpisodeStatus.SUCCESS
        elif state.step >= cfg.max_steps:
            status = EpisodeStatus.TRUNCATED
        else:
            status = EpisodeStatus.RUNNING

        new_area = bbox.area if bbox is not None else 0.0
        deltas = StepDeltas(
            d_area=new_area - state.prev_bbox.area,
            d_steer_rate=cfg.omega_max * state.smoothed_steering - prev_steer_rate,
            d_pan_rate=cfg.pan_rate_max * (action.pan_rate - state.prev_action.pan_rate),
            d_tilt_rate=cfg.tilt_rate_max * (action.tilt_rate - state.prev_action.tilt_rate),
        )

        obs = self._observe(bbox, state.prev_bbox, action, state.rng)
        state.prev_action = action
        if bbox is not None:
            state.prev_bbox = bbox
        self.status = status
        return StepOutcome(observation=obs, status=status, bbox=bbox, deltas=deltas)

    def _observe(
        self,
        bbox: Optional[BoundingBox],
        prev_bbox: BoundingBox,
        prev_action: Action,
        rng: np.random.Generator,
    ) -> np.ndarray:
        cfg = self.config
        if bbox is None:
            # Subject behind the camera: freeze the centre, report zero area.
            bbox = BoundingBox(cx=prev_bbox.cx, cy=prev_bbox.cy, area=0.0)
        obs = np.array(
            [
                _clip1(bbox.area / cfg.area_target - 1.0),
                _clip1((bbox.cx - FRAME_CX) / FRAME_CX),
                _clip1((bbox.cy - FRAME_CY) / FRAME_CY),
                _clip1((bbox.area - prev_bbox.area) / _D_AREA_SCALE),
                _clip1((bbox.cx - prev_bbox.cx) / _D_CX_SCALE),
                _clip1((bbox.cy - prev_bbox.cy) / _D_CY_SCALE),
                prev_action.throttle,
                prev_action.steering,
                prev_action.pan_rate,
                prev_action.tilt_rate,
            ]
        )
        return self._postprocess_obs(obs, rng)


def _clamp(value: float, bound: float) -> float:
    return -bound if value < -bound else (bound if value > bound else value)
