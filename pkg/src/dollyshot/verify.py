"""Self-check suite behind `dollyshot verify`: fast property checks with
independent oracles, runnable on a fresh checkout in well under a minute.

The oracles here are deliberately written along different routes than the
implementations they check (homogeneous-matrix projection vs direct dot
products, double-loop discounted sums vs the GAE recursion, and so on);
the test suite reuses them.
"""

from __future__ import annotations

import math
import os
import tempfile
from typing import Callable

import numpy as np

from .demos import load_dataset, record_scripted_dataset, save_dataset
from .evalkit import spearman
from .nets import Mlp
from .ppo import compute_gae
from .rewards import RewardWeights, StepDeltas, base_reward, full_reward
from .scene import (
    FRAME_H,
    FRAME_W,
    CameraState,
    Pose,
    SubjectSpec,
    focal_length,
    project_subject,
)
from .sim import Action, EpisodeConfig, FilmingSim


# ---------------------------------------------------------------------------
# Independent oracles

def oracle_project_corners(
    pose: Pose, camera: CameraState, subject: SubjectSpec, hfov_deg: float = 90.0
):
    """Per-corner ray projection via an explicit homogeneous matrix
    pipeline (camera-to-world rotation composed from axis rotations, then
    inverted); independent of the dot-product route in scene.py.

    Returns (cx, cy, area) or None if any corner is behind the camera.
    """
    f = focal_length(hfov_deg)

    def rot_z(a):
        return np.array(
            [[math.cos(a), -math.sin(a), 0.0],
             [math.sin(a), math.cos(a), 0.0],
             [0.0, 0.0, 1.0]]
        )

    def rot_y(a):
        return np.array(
            [[math.cos(a), 0.0, math.sin(a)],
             [0.0, 1.0, 0.0],
             [-math.sin(a), 0.0, math.cos(a)]]
        )

    # Canonical camera at yaw 0, tilt 0: right = -y_world, up = +z, fwd = +x.
    cam_to_world0 = np.array(
        [[0.0, 0.0, 1.0],
         [-1.0, 0.0, 0.0],
         [0.0, 1.0, 0.0]]
    )
    yaw = pose.heading + camera.pan
    cam_to_world = rot_z(yaw) @ rot_y(-camera.tilt) @ cam_to_world0
    world_to_cam = cam_to_world.T
    centre = np.array([pose.x, pose.y, camera.height])

    ray = np.array([subject.x - pose.x, subject.y - pose.y])
    dist = float(np.linalg.norm(ray))
    if dist < 1e-9:
        return None
    lateral = np.array([-ray[1], ray[0]]) / dist
    half_w = subject.width / 2.0
    corners = []
    for s in (-1.0, 1.0):
        for z in (0.0, subject.height):
            corners.append(
                np.array(
                    [subject.x + s * half_w * lateral[0],
                     subject.y + s * half_w * lateral[1],
                     z]
                )
            )
    us, vs = [], []
    for corner in corners:
        p_cam = world_to_cam @ (corner - centre)
        if p_cam[2] < 1e-9:
            return None
        us.append(FRAME_W / 2.0 + f * p_cam[0] / p_cam[2])
        vs.append(FRAME_H / 2.0 - f * p_cam[1] / p_cam[2])
    u_min, u_max = min(us), max(us)
    v_min, v_max = min(vs), max(vs)
    w = max(0.0, min(u_max, FRAME_W) - max(u_min, 0.0))
    h = max(0.0, min(v_max, FRAME_H) - max(v_min, 0.0))
    return (
        (u_min + u_max) / 2.0,
        (v_min + v_max) / 2.0,
        w * h / (FRAME_W * FRAME_H) * 100.0,
    )


def oracle_gae_bruteforce(rewards, values, dones, bootstrap, gamma, lam):
    """Double-loop discounted TD-residual sums, cut at episode ends."""
    n = len(rewards)
    vals = list(values) + [bootstrap]
    adv = np.zeros(n)
    for t in range(n):
        total = 0.0
        coef = 1.0
        for k in range(t, n):
            next_v = vals[k + 1] * (1.0 - dones[k])
            delta = rewards[k] + gamma * next_v - vals[k]
            total += coef * delta
            if dones[k]:
                break
            coef *= gamma * lam
        adv[t] = total
    return adv, adv + np.asarray(values)


def finite_diff_grad(loss: Callable[[np.ndarray], float], params: np.ndarray, h: float = 1e-5):
    grad = np.zeros_like(params)
    for i in range(params.size):
        p = params.copy()
        p[i] += h
        up = loss(p)
        p[i] -= 2.0 * h
        grad[i] = (up - loss(p)) / (2.0 * h)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.maximum(np.abs(numeric), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / scale))


# ---------------------------------------------------------------------------
# Named checks

def check_gradients() -> str:
    rng = np.random.default_rng(11)
    shapes = [(10, 64, 64, 2), (10, 64, 64, 1), (12, 64, 64, 1)]
    worst = 0.0
    for sizes in shapes:
        net = Mlp(sizes, rng=rng)
        x = rng.standard_normal((4, sizes[0]))
        w_out = rng.standard_normal((4, sizes[-1]))
        out, cache = net.forward_cached(x)
        grad, _ = net.backward(cache, w_out)
        # Check a random subsample of coordinates to stay fast.
        idx = rng.choice(net.n_params, size=200, replace=False)

        def loss(p, net=net, x=x, w_out=w_out):
            saved = net.params.copy()
            net.params[...] = p
            val = float(np.sum(w_out * net.forward(x)))
            net.params[...] = saved
            return val

        h = 1e-5
        for i in idx:
            p = net.params.copy()
            p[i] += h
            up = loss(p)
            p[i] -= 2.0 * h
            fd = (up - loss(p)) / (2.0 * h)
            rel = abs(grad[i] - fd) / max(abs(fd), 1e-6)
            worst = max(worst, rel)
    if worst >= 1e-4:
        raise AssertionError(f"gradient relative error {worst:.2e} >= 1e-4")
    return f"max relative error {worst:.2e}"


def check_gae_oracle() -> str:
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        n = 20
        rewards = rng.standard_normal(n)
        values = rng.standard_normal(n)
        dones = (rng.random(n) < 0.15).astype(float)
        bootstrap = float(rng.standard_normal())
        adv, ret = compute_gae(rewards, values, dones, bootstrap, 0.99, 0.95)
        o_adv, o_ret = oracle_gae_bruteforce(rewards, values, dones, bootstrap, 0.99, 0.95)
        worst = max(worst, float(np.max(np.abs(adv - o_adv))), float(np.max(np.abs(ret - o_ret))))
    if worst >= 1e-10:
        raise AssertionError(f"GAE differs from brute force by {worst:.2e}")
    return f"max abs deviation {worst:.2e}"


def check_projection_oracle() -> str:
    rng = np.random.default_rng(3)
    subject = SubjectSpec()
    worst = 0.0
    checked = 0
    while checked < 200:
        pose = Pose(rng.uniform(-5, 5), rng.uniform(-6, -1), rng.uniform(-math.pi, math.pi))
        camera = CameraState(
            pan=rng.uniform(-0.5, 0.5), tilt=rng.uniform(-0.4, 0.4),
            height=rng.uniform(0.1, 1.2),
        )
        bbox = project_subject(pose, camera, subject)
        expected = oracle_project_corners(pose, camera, subject)
        if (bbox is None) != (expected is None):
            raise AssertionError("visibility disagreement with the corner oracle")
        if bbox is None:
            continue
        checked += 1
        worst = max(
            worst,
            abs(bbox.cx - expected[0]),
            abs(bbox.cy - expected[1]),
            abs(bbox.area - expected[2]),
        )
    if worst >= 1e-9:
        raise AssertionError(f"projection differs from oracle by {worst:.2e}")
    # On-axis symmetry: subject straight ahead at mid-height => exact centre.
    pose = Pose(0.0, -3.0, math.pi / 2)
    camera = CameraState(pan=0.0, tilt=0.0, height=subject.height / 2.0)
    bbox = project_subject(pose, camera, subject)
    if bbox is None or bbox.cx != 60.0 or bbox.cy != 40.0:
        raise AssertionError(f"on-axis projection not centred: {bbox}")
    return f"{checked} poses, max deviation {worst:.2e}"


def check_reward_formulas() -> str:
    rng = np.random.default_rng(7)
    weights = RewardWeights(
        lambda_area=rng.uniform(0.1, 2.0),
        lambda_steer=rng.uniform(0.1, 2.0),
        lambda_cam=rng.uniform(0.1, 2.0),
    )
    for _ in range(200):
        d = StepDeltas(*rng.standard_normal(4))
        expected_base = weights.lambda_area * d.d_area - weights.lambda_steer * d.d_steer_rate**2
        expected_full = expected_base - weights.lambda_cam * (d.d_pan_rate**2 + d.d_tilt_rate**2)
        if base_reward(d, weights) != expected_base:
            raise AssertionError("base reward does not match direct substitution")
        if full_reward(d, weights) != expected_full:
            raise AssertionError("full reward does not match direct substitution")
        if full_reward(d, weights) > base_reward(d, weights):
            raise AssertionError("full reward exceeded base reward")
    return "200 random inputs match exactly"


def check_spearman_cases() -> str:
    if spearman([1, 2, 3], [10, 20, 30]) != 1.0:
        raise AssertionError("monotone series should give rho = 1")
    if spearman([1, 2, 3], [3, 2, 1]) != -1.0:
        raise AssertionError("anti-monotone series should give rho = -1")
    rho = spearman([1, 2, 3, 4], [1, 3, 2, 4])
    if abs(rho - 0.8) > 1e-12:
        raise AssertionError(f"rank-formula case gave {rho}, expected 0.8")
    if spearman([1.0, 1.0, 1.0], [1, 2, 3]) is not None:
        raise AssertionError("constant series must be undefined, not a number")
    return "unit cases exact"


def check_dataset_roundtrip() -> str:
    env = EpisodeConfig(task="base")
    dataset = record_scripted_dataset(env, "moderate", 3, seed=99)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "check.demos.jsonl")
        save_dataset(dataset, path)
        loaded = load_dataset(path, expect_task="base")
    if len(loaded) != len(dataset):
        raise AssertionError("trajectory count changed in round-trip")
    for a, b in zip(dataset.trajectories, loaded.trajectories):
        if a.terminal_status != b.terminal_status or len(a) != len(b):
            raise AssertionError("trajectory metadata changed in round-trip")
        for ta, tb in zip(a.transitions, b.transitions):
            if not (
                np.array_equal(ta.obs, tb.obs)
                and np.array_equal(ta.action, tb.action)
                and np.array_equal(ta.next_obs, tb.next_obs)
                and ta.reward == tb.reward
                and ta.done == tb.done
            ):
                raise AssertionError("transition arrays changed in round-trip")
    return f"{len(dataset)} trajectories round-trip bit-exactly"


def check_determinism_replay() -> str:
    env = EpisodeConfig(task="full", start_position="P2")
    sim = FilmingSim(env)
    rng = np.random.default_rng(13)
    actions = [
        Action.from_vector(rng.uniform(-1, 1, size=4), "full") for _ in range(40)
    ]
    runs = []
    for _ in range(2):
        _, obs = sim.reset(seed=21)
        trace = [obs]
        for action in actions:
            outcome = sim.step(action)
            trace.append(outcome.observation)
            if outcome.status.terminal:
                break
        runs.append(np.vstack(trace))
    if runs[0].shape != runs[1].shape or not np.array_equal(runs[0], runs[1]):
        raise AssertionError("replay with equal seed and actions diverged")
    return f"{runs[0].shape[0]} observations reproduced bit-exactly"


ALL_CHECKS = (
    ("gradient-exactness", check_gradients),
    ("gae-oracle", check_gae_oracle),
    ("projection-oracle", check_projection_oracle),
    ("reward-formulas", check_reward_formulas),
    ("spearman-cases", check_spearman_cases),
    ("dataset-roundtrip", check_dataset_roundtrip),
    ("determinism-replay", check_determinism_replay),
)


def run_all(printer=print) -> bool:
    """Run every named check; returns True when all pass."""
    ok = True
    for name, fn in ALL_CHECKS:
        try:
            detail = fn()
        except Exception as exc:  # report and keep going
            printer(f"FAIL {name}: {exc}")
            ok = False
        else:
            printer(f"PASS {name}: {detail}")
    return ok
