"""Evaluation kit: framing errors, curve aggregation, and sim-vs-twin
rank correlation.

The "twin" is a deliberately perturbed copy of the simulator standing in
for a real robot: scaled actuator gains, per-step timing jitter, noisy
observations, and offset start poses. Running paired (same-seed) episodes
in sim and twin yields the rank-correlation (SRCC) table.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .nets import GaussianPolicy
from .rewards import RewardWeights, reward_for_task
from .scene import Pose
from .sim import Action, EpisodeConfig, FilmingSim

TRIALS_FORMAT_VERSION = 1

AREA_TARGET = 10.0
X_TARGET = 60.0
Y_TARGET = 40.0

# Canonical evaluation starts (left, centre, right).
CANONICAL_STARTS = {"left": "P1", "centre": "P3", "right": "P5"}

SRCC_LABELS = (
    (0.8, "very strong"),
    (0.6, "strong"),
    (0.4, "moderate"),
    (0.0, "weak"),
)


def spearman(series_a: Sequence[float], series_b: Sequence[float]) -> Optional[float]:
    """Spearman rank correlation with average ranks for ties.

    Returns None (undefined) when either series is constant; raises on
    length mismatch or fewer than two points.
    """
    a = np.asarray(series_a, dtype=np.float64)
    b = np.asarray(series_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("series must be 1-D and of equal length")
    if len(a) < 2:
        raise ValueError("need at least two points")
    if np.all(a == a[0]) or np.all(b == b[0]):
        return None
    ra = _average_ranks(a)
    rb = _average_ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    return float(np.dot(ra, rb) / math.sqrt(np.dot(ra, ra) * np.dot(rb, rb)))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # 1-based average rank
        i = j + 1
    return ranks


def srcc_label(rho: Optional[float]) -> str:
    if rho is None:
        return "undefined"
    if rho <= 0.0:
        return "negative"
    for threshold, label in SRCC_LABELS:
        if rho >= threshold:
            return label
    return "weak"


@dataclass
class TwinConfig:
    """Perturbations applied to a copy of the simulator."""

    gain_scale: float = 0.9  # multiplies all actuator gains
    dt_jitter: float = 0.1  # +/- fraction of dt, drawn per step
    obs_noise: float = 0.01  # gaussian sigma added to observation features
    start_offset: float = 0.05  # gaussian sigma on the start position, metres

    def validate(self) -> None:
        if self.gain_scale <= 0.0:
            raise ValueError("gain_scale must be positive")
        if not 0.0 <= self.dt_jitter < 1.0:
            raise ValueError("dt_jitter must be in [0, 1)")
        if self.obs_noise < 0.0 or self.start_offset < 0.0:
            raise ValueError("noise magnitudes must be >= 0")

    @property
    def is_identity(self) -> bool:
        return (
            self.gain_scale == 1.0
            and self.dt_jitter == 0.0
            and self.obs_noise == 0.0
            and self.start_offset == 0.0
        )


class TwinSim(FilmingSim):
    """Perturbed simulator with the exact interface of `FilmingSim`.

    Twin-specific randomness comes from its own stream, seeded from the
    episode seed, so paired sim/twin episodes share start jitter while the
    twin adds its perturbations deterministically.
    """

    def __init__(self, config: EpisodeConfig, twin: TwinConfig):
        twin.validate()
        scaled = replace(
            config,
            v_max=config.v_max * twin.gain_scale,
            omega_max=config.omega_max * twin.gain_scale,
            pan_rate_max=config.pan_rate_max * twin.gain_scale,
            tilt_rate_max=config.tilt_rate_max * twin.gain_scale,
        )
        super().__init__(scaled)
        self.twin = twin
        self._twin_rng = np.random.default_rng(0)

    def reset(self, seed: int):
        self._twin_rng = np.random.default_rng((seed, 0x7719))
        return super().reset(seed)

    def _step_dt(self, rng: np.random.Generator) -> float:
        jitter = self.twin.dt_jitter
        if jitter == 0.0:
            return self.config.dt
        return self.config.dt * (1.0 + self._twin_rng.uniform(-jitter, jitter))

    def _perturb_start(self, pose: Pose, rng: np.random.Generator) -> Pose:
        sigma = self.twin.start_offset
        if sigma == 0.0:
            return pose
        dx, dy = self._twin_rng.normal(0.0, sigma, size=2)
        return Pose(pose.x + dx, pose.y + dy, pose.heading)

    def _postprocess_obs(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        sigma = self.twin.obs_noise
        if sigma == 0.0:
            return obs
        noisy = obs + self._twin_rng.normal(0.0, sigma, size=obs.shape)
        return np.clip(noisy, -1.0, 1.0)


@dataclass
class TrialRecord:
    policy_id: str
    env_id: str  # "sim" or "twin"
    start_position: str
    seed: int
    cum_reward: float
    final_area: float
    final_cx: float
    final_cy: float
    terminal_status: str
    steps: int
    series_area: list[float] = field(default_factory=list)
    series_cx: list[float] = field(default_factory=list)
    series_cy: list[float] = field(default_factory=list)
    series_reward: list[float] = field(default_factory=list)


def run_trial(
    policy: GaussianPolicy,
    sim: FilmingSim,
    weights: RewardWeights,
    seed: int,
    policy_id: str,
    env_id: str,
    start_position: str,
) -> TrialRecord:
    """One deterministic (mean-action) evaluation episode."""
    cfg = sim.config
    _, obs = sim.reset(seed)
    areas, cxs, cys, rewards = [], [], [], []
    while True:
        action = Action.from_vector(policy.deterministic(obs), cfg.task)
        outcome = sim.step(action)
        reward = reward_for_task(cfg.task, outcome.deltas, weights)
        bbox = outcome.bbox if outcome.bbox is not None else sim.state.prev_bbox
        areas.append(bbox.area)
        cxs.append(bbox.cx)
        cys.append(bbox.cy)
        rewards.append(reward)
        obs = outcome.observation
        if outcome.status.terminal:
            status = outcome.status
            break
    return TrialRecord(
        policy_id=policy_id,
        env_id=env_id,
        start_position=start_position,
        seed=seed,
        cum_reward=float(sum(rewards)),
        final_area=areas[-1],
        final_cx=cxs[-1],
        final_cy=cys[-1],
        terminal_status=status.value,
        steps=len(rewards),
        series_area=areas,
        series_cx=cxs,
        series_cy=cys,
        series_reward=rewards,
    )


def run_trials(
    policy: GaussianPolicy,
    env_cfg: EpisodeConfig,
    weights: RewardWeights,
    starts: Sequence[str],
    episodes_per_start: int,
    base_seed: int,
    policy_id: str = "policy",
    twin_cfg: Optional[TwinConfig] = None,
) -> list[TrialRecord]:
    """Evaluation trials per start position; when a twin config is given,
    every episode is run in both environments with the same seed."""
    records = []
    for start in starts:
        start_id = CANONICAL_STARTS.get(start, start)
        cfg = replace(env_cfg, start_position=start_id)
        sim = FilmingSim(cfg)
        twin = TwinSim(cfg, twin_cfg) if twin_cfg is not None else None
        seed_rng = np.random.default_rng((base_seed, _stable_hash(start_id)))
        for _ in range(episodes_per_start):
            seed = int(seed_rng.integers(2**31 - 1))
            records.append(
                run_trial(policy, sim, weights, seed, policy_id, "sim", start_id)
            )
            if twin is not None:
                records.append(
                    run_trial(policy, twin, weights, seed, policy_id, "twin", start_id)
                )
    return records


METRICS = ("cum_reward", "final_area", "final_cx", "final_cy")
_SERIES_BY_METRIC = {
    "final_area": "series_area",
    "final_cx": "series_cx",
    "final_cy": "series_cy",
}


def srcc_report(trials: Sequence[TrialRecord]) -> list[dict]:
    """Per (policy, start) rows pairing sim and twin outcomes by seed and
    reporting the rank correlation of each metric.

    Cumulative reward is paired per trial (one scalar per episode). The
    framing metrics pair the per-step series of each episode pair,
    truncated to the common length and pooled across the start's
    episodes: for a successful policy every final area sits at the target
    plus one step's worth of crossing overshoot, so per-trial finals
    carry no rankable signal (measured SRCC ~0 against the default twin)
    while the per-step series expose the actual sim/twin alignment.
    """
    rows = []
    keys = sorted({(t.policy_id, t.start_position) for t in trials})
    for policy_id, start in keys:
        sim_trials = {
            t.seed: t for t in trials
            if t.policy_id == policy_id and t.start_position == start and t.env_id == "sim"
        }
        twin_trials = {
            t.seed: t for t in trials
            if t.policy_id == policy_id and t.start_position == start and t.env_id == "twin"
        }
        shared = sorted(set(sim_trials) & set(twin_trials))
        if not shared:
            continue
        row = {"policy_id": policy_id, "start_position": start, "episodes": len(shared)}
        for metric in METRICS:
            sim_vals = [getattr(sim_trials[s], metric) for s in shared]
            twin_vals = [getattr(twin_trials[s], metric) for s in shared]
            row[f"{metric}_sim"] = float(np.mean(sim_vals))
            row[f"{metric}_twin"] = float(np.mean(twin_vals))
            if metric in _SERIES_BY_METRIC:
                attr = _SERIES_BY_METRIC[metric]
                sim_pool: list[float] = []
                twin_pool: list[float] = []
                for s in shared:
                    a = getattr(sim_trials[s], attr)
                    b = getattr(twin_trials[s], attr)
                    n = min(len(a), len(b))
                    sim_pool.extend(a[:n])
                    twin_pool.extend(b[:n])
                rho = spearman(sim_pool, twin_pool) if len(sim_pool) >= 2 else None
            else:
                rho = spearman(sim_vals, twin_vals) if len(shared) >= 2 else None
            row[f"{metric}_srcc"] = rho
            row[f"{metric}_srcc_label"] = srcc_label(rho)
        row["cum_reward_sim_std"] = float(
            np.std([sim_trials[s].cum_reward for s in shared])
        )
        row["cum_reward_twin_std"] = float(
            np.std([twin_trials[s].cum_reward for s in shared])
        )
        rows.append(row)
    return rows


def framing_errors(
    trials: Sequence[TrialRecord],
    targets: tuple[float, float, float] = (AREA_TARGET, X_TARGET, Y_TARGET),
) -> list[dict]:
    """Mean absolute final-framing deviation per (policy, env, start).

    Relative percentages divide by the respective target, following the
    area/10, x/60, y/40 convention.
    """
    if not trials:
        raise ValueError("no trials to report on")
    area_t, x_t, y_t = targets
    rows = []
    keys = sorted({(t.policy_id, t.env_id, t.start_position) for t in trials})
    for policy_id, env_id, start in keys:
        group = [
            t for t in trials
            if (t.policy_id, t.env_id, t.start_position) == (policy_id, env_id, start)
        ]
        area_err = float(np.mean([abs(t.final_area - area_t) for t in group]))
        x_err = float(np.mean([abs(t.final_cx - x_t) for t in group]))
        y_err = float(np.mean([abs(t.final_cy - y_t) for t in group]))
        rows.append(
            {
                "policy_id": policy_id,
                "env_id": env_id,
                "start_position": start,
                "trials": len(group),
                "area_error": area_err,
                "area_error_pct": area_err / area_t * 100.0,
                "x_error": x_err,
                "x_error_pct": x_err / x_t * 100.0,
                "y_error": y_err,
                "y_error_pct": y_err / y_t * 100.0,
                "mean_cum_reward": float(np.mean([t.cum_reward for t in group])),
                "success_rate": float(
                    np.mean([t.terminal_status == "success" for t in group])
                ),
            }
        )
    return rows


def improvement_pct(baseline: float, ours: float) -> Optional[float]:
    """(base - ours) / base * 100; None when the baseline error is zero."""
    if baseline == 0.0:
        return None
    return (baseline - ours) / baseline * 100.0


def add_improvements(rows: list[dict], baseline_rows: list[dict]) -> list[dict]:
    """Attach improvement% columns comparing to a baseline error table."""
    base_by_key = {
        (r["env_id"], r["start_position"]): r for r in baseline_rows
    }
    out = []
    for row in rows:
        row = dict(row)
        base = base_by_key.get((row["env_id"], row["start_position"]))
        if base is not None:
            for metric in ("area_error", "x_error", "y_error"):
                row[f"{metric}_improvement_pct"] = improvement_pct(
                    base[metric], row[metric]
                )
        out.append(row)
    return out


def aggregate_curves(
    seed_curves: Sequence[Sequence[dict]],
    value_key: str = "mean_ep_reward",
    expert_returns: Optional[Sequence[float]] = None,
) -> list[dict]:
    """Mean +/- std learning curve across seeds.

    Seeds whose step grids differ are linearly resampled onto the coarsest
    grid (the one with the fewest rows). The std is the sample standard
    deviation across seeds (ddof=1); zero for a single seed.
    """
    if not seed_curves:
        raise ValueError("need at least one seed curve")
    grids = [np.array([row["step"] for row in curve], dtype=float) for curve in seed_curves]
    vals = [np.array([row[value_key] for row in curve], dtype=float) for curve in seed_curves]
    target = min(grids, key=len)
    resampled = []
    for grid, val in zip(grids, vals):
        if len(grid) == len(target) and np.array_equal(grid, target):
            resampled.append(val)
        else:
            resampled.append(np.interp(target, grid, val))
    stacked = np.stack(resampled)
    means = stacked.mean(axis=0)
    stds = (
        stacked.std(axis=0, ddof=1) if len(seed_curves) > 1 else np.zeros(len(target))
    )
    rows = []
    expert_mean = expert_lo = expert_hi = None
    if expert_returns is not None and len(expert_returns) > 0:
        expert_mean = float(np.mean(expert_returns))
        expert_lo = float(np.min(expert_returns))
        expert_hi = float(np.max(expert_returns))
    for step, mean, std in zip(target, means, stds):
        row = {
            "step": float(step),
            "mean": float(mean),
            "std": float(std),
            "seeds": len(seed_curves),
        }
        if expert_mean is not None:
            row["expert_mean"] = expert_mean
            row["expert_min"] = expert_lo
            row["expert_max"] = expert_hi
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Trial-log persistence (JSONL: header record + one trial per line).

def save_trials(
    trials: Sequence[TrialRecord], path: Union[str, os.PathLike], config: dict
) -> None:
    head = {
        "format_version": TRIALS_FORMAT_VERSION,
        "kind": "trials",
        "config": config,
        "count": len(trials),
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(json.dumps(head) + "\n")
        for t in trials:
            fh.write(json.dumps(vars(t)) + "\n")


def load_trials(path: Union[str, os.PathLike]) -> tuple[list[TrialRecord], dict]:
    with open(path) as fh:
        lines = [line for line in fh.read().splitlines() if line]
    if not lines:
        raise ValueError(f"{path}: empty trial log")
    head = json.loads(lines[0])
    if head.get("format_version") != TRIALS_FORMAT_VERSION or head.get("kind") != "trials":
        raise ValueError(f"{path}: not a trial log of a supported version")
    trials = [TrialRecord(**json.loads(line)) for line in lines[1:]]
    for t in trials:
        recomputed = float(sum(t.series_reward))
        if not math.isclose(recomputed, t.cum_reward, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(
                f"{path}: cumulative reward bookkeeping mismatch for seed {t.seed}"
            )
    return trials, head


def _stable_hash(text: str) -> int:
    value = 0
    for ch in text:
        value = (value * 131 + ord(ch)) % (2**31 - 1)
    return value
