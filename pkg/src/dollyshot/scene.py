"""Scene geometry: robot pose, pan/tilt camera, and subject projection.

The virtual camera frame is 120x80 units (3:2), so a perfectly centred
subject sits at (60, 40); frame x grows rightward and frame y downward.
Subject size is reported as percent of total frame area, which makes a
"10 unit" framing target mean 10% frame coverage.

The subject is modelled as an upright billboard that always faces the
camera, so its projected width is independent of viewing direction --
a reasonable stand-in for a person.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

FRAME_W = 120.0
FRAME_H = 80.0
FRAME_CX = FRAME_W / 2.0
FRAME_CY = FRAME_H / 2.0
DEFAULT_HFOV_DEG = 90.0

_MIN_DEPTH = 1e-9


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass
class Pose:
    """Robot pose in the ground plane; heading is wrapped to (-pi, pi]."""

    x: float
    y: float
    heading: float

    def __post_init__(self) -> None:
        if not (
            math.isfinite(self.x)
            and math.isfinite(self.y)
            and math.isfinite(self.heading)
        ):
            raise ValueError("pose components must be finite")
        self.heading = wrap_angle(self.heading)


@dataclass
class CameraState:
    """Camera pan/tilt relative to the robot heading, plus mast height.

    pan > 0 turns the optical axis counter-clockwise (leftward in frame),
    tilt > 0 raises it above the horizon. Limits are enforced by the
    simulator, not here.
    """

    pan: float = 0.0
    tilt: float = 0.0
    height: float = 0.25


@dataclass(frozen=True)
class SubjectSpec:
    """Static subject: an upright width x height billboard footed at (x, y)."""

    x: float = 0.0
    y: float = 0.0
    width: float = 0.5
    height: float = 1.7

    def __post_init__(self) -> None:
        if not (self.width > 0.0 and self.height > 0.0):
            raise ValueError("subject width and height must be positive")


@dataclass(frozen=True)
class BoundingBox:
    """Projected subject box: centre in frame units, area in percent.

    The centre is the raw projected box centre (it can leave the frame);
    the area counts only the portion inside the frame, which is what a
    physical camera actually sees of a subject drifting off-screen.
    """

    cx: float
    cy: float
    area: float


def focal_length(hfov_deg: float = DEFAULT_HFOV_DEG) -> float:
    """Focal length in frame units for a given horizontal field of view."""
    return FRAME_CX / math.tan(math.radians(hfov_deg) / 2.0)


def project_subject(
    pose: Pose,
    camera: CameraState,
    subject: SubjectSpec,
    hfov_deg: float = DEFAULT_HFOV_DEG,
) -> BoundingBox | None:
    """Project the subject billboard through the pan/tilt pinhole camera.

    Returns the axis-aligned box of the four projected billboard corners,
    or None when any corner falls behind the image plane (not visible).
    Area counts the in-frame portion of the box only; without that,
    wide-angle edge stretch would let a subject near the frame boundary
    read larger than one straight ahead at the same distance.
    Pure function: no state is read or mutated beyond the arguments.
    """
    f = focal_length(hfov_deg)

    dx = subject.x - pose.x
    dy = subject.y - pose.y
    flat_dist = math.hypot(dx, dy)
    if flat_dist < _MIN_DEPTH:
        return None
    # Billboard lateral axis: horizontal, perpendicular to the viewing ray.
    nx = -dy / flat_dist
    ny = dx / flat_dist
    half_w = subject.width / 2.0

    yaw = pose.heading + camera.pan
    cos_y, sin_y = math.cos(yaw), math.sin(yaw)
    cos_t, sin_t = math.cos(camera.tilt), math.sin(camera.tilt)
    # Camera basis in world coordinates (z up): forward, right, up.
    fwd = (cos_y * cos_t, sin_y * cos_t, sin_t)
    right = (sin_y, -cos_y)  # always horizontal
    up = (-cos_y * sin_t, -sin_y * sin_t, cos_t)

    u_min = v_min = math.inf
    u_max = v_max = -math.inf
    for lateral, height in (
        (-half_w, 0.0),
        (half_w, 0.0),
        (-half_w, subject.height),
        (half_w, subject.height),
    ):
        wx = dx + lateral * nx
        wy = dy + lateral * ny
        wz = height - camera.height
        depth = wx * fwd[0] + wy * fwd[1] + wz * fwd[2]
        if depth < _MIN_DEPTH:
            return None
        u = FRAME_CX + f * (wx * right[0] + wy * right[1]) / depth
        v = FRAME_CY - f * (wx * up[0] + wy * up[1] + wz * up[2]) / depth
        u_min = min(u_min, u)
        u_max = max(u_max, u)
        v_min = min(v_min, v)
        v_max = max(v_max, v)

    visible_w = max(0.0, min(u_max, FRAME_W) - max(u_min, 0.0))
    visible_h = max(0.0, min(v_max, FRAME_H) - max(v_min, 0.0))
    area = visible_w * visible_h / (FRAME_W * FRAME_H) * 100.0
    return BoundingBox(cx=(u_min + u_max) / 2.0, cy=(v_min + v_max) / 2.0, area=area)


def centre_in_frame(bbox: BoundingBox) -> bool:
    """True while the projected subject centre is inside the frame."""
    return 0.0 <= bbox.cx <= FRAME_W and 0.0 <= bbox.cy <= FRAME_H
