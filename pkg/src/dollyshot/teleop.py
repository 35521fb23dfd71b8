"""Real-time teleoperation service: drive the sim from a browser, record
demonstrations, and replay stored trajectories.

One session owns one simulator. The network receive path only replaces
the "latest action" mailbox; the tick loop is the single place the sim is
stepped, at a fixed simulated dt per tick regardless of wall-clock jitter.
In lockstep mode (headless recording) a tick fires once per fresh action
message instead of on a timer, so scripted clients can record much faster
than real time through the same code path.
"""

from __future__ import annotations

import asyncio
import datetime
import json
import logging
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .config import env_config, resolved_config, reward_weights
from .demos import (
    DatasetError,
    DatasetManifest,
    DemoDataset,
    TrajectoryAccumulator,
    load_dataset,
    save_dataset,
)
from .rewards import reward_for_task
from .sim import Action, EpisodeStatus, FilmingSim, obs_spec_hash

log = logging.getLogger(__name__)

PLACEHOLDER_PAGE = """<!doctype html>
<html><head><title>dollyshot teleop</title></head>
<body><h1>dollyshot teleop service</h1>
<p>No UI bundle found. Build the frontend (<code>npm run build</code> in
<code>frontend/</code>) or connect a WebSocket client to
<code>/ws/teleop</code>.</p></body></html>
"""


class Mode(str, Enum):
    IDLE = "idle"
    LIVE = "live"
    RECORDING = "recording"
    REPLAY = "replay"


@dataclass
class Session:
    """One operator's simulator, mailbox, and recording state."""

    config: dict
    sim: Optional[FilmingSim] = None
    mode: Mode = Mode.IDLE
    tick_count: int = 0
    seq_acked: int = -1
    latest_action: Action = field(default_factory=Action.zero)
    last_action_time: float = 0.0
    actions_seen: bool = False
    last_obs: Optional[np.ndarray] = None
    accumulator: Optional[TrajectoryAccumulator] = None
    pending: bool = False  # a finished recording awaits save/discard
    episode_seed: int = 0
    start_position: str = "P3"
    replay_actions: Optional[list] = None
    replay_index: int = 0

    def apply_action(self, seq: int, action: Action, now: float) -> None:
        # Last-writer-wins: only a strictly newer sequence number lands.
        if seq > self.seq_acked:
            self.seq_acked = seq
            self.latest_action = action
            self.last_action_time = now
            self.actions_seen = True


class TeleopServer:
    """Holds the single active session and the dataset file it appends to."""

    def __init__(self, config: dict, dataset_path: str, lockstep: bool = False):
        self.config = config
        self.dataset_path = dataset_path
        self.lockstep = bool(config["teleop"].get("lockstep", False)) or lockstep
        self.tick_hz = float(config["teleop"]["tick_hz"])
        self.action_timeout = float(config["teleop"]["action_timeout"])
        self.weights = reward_weights(config)
        self.session: Optional[Session] = None

    # -- session lifecycle -------------------------------------------------

    def handle_reset(self, session: Session, msg: dict) -> dict:
        task = msg.get("task", self.config["env"]["task"])
        start = msg.get("start_position", "P3")
        seed = int(msg.get("seed", 0))
        cfg = env_config(self.config, task=task)
        cfg.start_position = start
        cfg.validate()
        session.sim = FilmingSim(cfg)
        _, obs = session.sim.reset(seed)
        session.last_obs = obs
        session.mode = Mode.LIVE
        session.tick_count = 0
        session.latest_action = Action.zero()
        session.seq_acked = -1
        session.actions_seen = False
        session.accumulator = None
        session.pending = False
        session.episode_seed = seed
        session.start_position = start
        return self.state_message(session, reward=0.0)

    def tick(self, session: Session) -> Optional[dict]:
        """Advance the session one simulated control period."""
        if session.mode is Mode.REPLAY:
            return self._tick_replay(session)
        if session.mode not in (Mode.LIVE, Mode.RECORDING) or session.sim is None:
            return None
        sim = session.sim
        action = session.latest_action
        obs_before = session.last_obs
        outcome = sim.step(action)
        reward = reward_for_task(sim.config.task, outcome.deltas, self.weights)
        session.tick_count += 1
        session.last_obs = outcome.observation
        if session.mode is Mode.RECORDING and session.accumulator is not None:
            session.accumulator.add(
                obs_before,
                action.to_vector(sim.config.task),
                outcome.observation,
                outcome.status.terminal,
                reward,
            )
        if outcome.status.terminal:
            if session.mode is Mode.RECORDING:
                session.pending = True  # keep the take for record_stop
            session.mode = Mode.IDLE
        return self.state_message(session, reward=reward)

    def _tick_replay(self, session: Session) -> Optional[dict]:
        if session.replay_actions is None or session.sim is None:
            session.mode = Mode.IDLE
            return None
        if session.replay_index >= len(session.replay_actions):
            session.mode = Mode.IDLE
            return None
        vec = session.replay_actions[session.replay_index]
        session.replay_index += 1
        outcome = session.sim.step(Action.from_vector(vec, session.sim.config.task))
        reward = reward_for_task(session.sim.config.task, outcome.deltas, self.weights)
        session.tick_count += 1
        session.last_obs = outcome.observation
        if outcome.status.terminal:
            session.mode = Mode.IDLE
        return self.state_message(session, reward=reward)

    def start_recording(self, session: Session) -> None:
        if session.mode is not Mode.LIVE or session.sim is None:
            raise ValueError("record_start requires a live session (send reset first)")
        session.accumulator = TrajectoryAccumulator()
        session.pending = False
        session.mode = Mode.RECORDING

    def stop_recording(self, session: Session, save: bool) -> dict:
        if session.mode is not Mode.RECORDING and not session.pending:
            raise ValueError("no recording in progress")
        acc = session.accumulator
        session.accumulator = None
        session.pending = False
        if session.mode is Mode.RECORDING:
            session.mode = Mode.LIVE
        if not save:
            return {"saved": False, "transitions": len(acc.transitions) if acc else 0}
        if acc is None or not acc.transitions:
            raise DatasetError("empty recording; nothing to save")
        sim = session.sim
        terminal = sim.status.value if sim.status.terminal else "incomplete"
        require_success = bool(self.config["demos"]["require_success"])
        if require_success and terminal != EpisodeStatus.SUCCESS.value:
            raise DatasetError(
                f"recording rejected: episode ended {terminal!r}, not success"
            )
        trajectory = acc.seal(
            task=sim.config.task,
            start_position=session.start_position,
            seed=session.episode_seed,
            terminal_status=terminal,
            operator_id="teleop",
        )
        count = self._append_trajectory(trajectory, sim.config.task)
        return {"saved": True, "transitions": len(trajectory), "trajectories": count}

    def start_replay(self, session: Session, msg: dict) -> dict:
        path = msg.get("dataset", self.dataset_path)
        index = int(msg.get("index", 0))
        dataset = load_dataset(path)
        if not 0 <= index < len(dataset):
            raise DatasetError(f"trajectory index {index} out of range")
        trajectory = dataset.trajectories[index]
        cfg = env_config(self.config, task=trajectory.task)
        cfg.start_position = trajectory.start_position
        session.sim = FilmingSim(cfg)
        _, obs = session.sim.reset(trajectory.seed)
        session.last_obs = obs
        session.mode = Mode.REPLAY
        session.tick_count = 0
        session.replay_actions = [t.action for t in trajectory.transitions]
        session.replay_index = 0
        session.start_position = trajectory.start_position
        session.episode_seed = trajectory.seed
        return self.state_message(session, reward=0.0)

    def _append_trajectory(self, trajectory, task: str) -> int:
        if os.path.exists(self.dataset_path):
            dataset = load_dataset(self.dataset_path, expect_task=task)
        else:
            manifest = DatasetManifest(
                task=task,
                diversity="high",
                obs_hash=obs_spec_hash(),
                trajectory_count=0,
                created=datetime.datetime.now(datetime.timezone.utc).isoformat(),
                env_config=dict(self.config["env"]),
            )
            dataset = DemoDataset(manifest=manifest, trajectories=[])
        dataset.trajectories.append(trajectory)
        dataset.manifest.trajectory_count = len(dataset.trajectories)
        # Diversity labels must match the starts present in the data.
        present = set(dataset.start_positions_present())
        if present <= {"P3"}:
            dataset.manifest.diversity = "low"
        elif present <= {"P1", "P3", "P5"}:
            dataset.manifest.diversity = "moderate"
        else:
            dataset.manifest.diversity = "high"
        save_dataset(dataset, self.dataset_path)
        return len(dataset.trajectories)

    def state_message(self, session: Session, reward: float) -> dict:
        sim = session.sim
        state = sim.state
        bbox = state.prev_bbox
        return {
            "type": "state",
            "tick": session.tick_count,
            "seq_acked": session.seq_acked,
            "pose": {
                "x": state.pose.x,
                "y": state.pose.y,
                "heading": state.pose.heading,
            },
            "camera": {
                "pan": state.camera.pan,
                "tilt": state.camera.tilt,
                "height": state.camera.height,
            },
            "bbox": {"cx": bbox.cx, "cy": bbox.cy, "area": bbox.area},
            "reward": reward,
            "done": sim.status.value,
            "mode": session.mode.value,
        }


def create_app(
    config: Optional[dict] = None,
    dataset_path: str = "teleop.demos.jsonl",
    ui_dir: Optional[str] = None,
    lockstep: bool = False,
) -> FastAPI:
    """Build the FastAPI app: WS endpoint, dataset listing, UI static files."""
    if config is None:
        config = resolved_config()
    server = TeleopServer(config, dataset_path, lockstep=lockstep)
    app = FastAPI(title="dollyshot teleop", version=__version__)
    app.state.teleop = server

    @app.get("/datasets")
    def list_datasets() -> JSONResponse:
        directory = os.path.dirname(os.path.abspath(server.dataset_path)) or "."
        rows = []
        for name in sorted(os.listdir(directory)):
            if not name.endswith(".jsonl"):
                continue
            path = os.path.join(directory, name)
            try:
                with open(path) as fh:
                    head = json.loads(fh.readline())
                if head.get("kind") != "demos":
                    continue
                rows.append(
                    {
                        "file": name,
                        "task": head.get("task"),
                        "diversity": head.get("diversity"),
                        "trajectories": head.get("trajectory_count", 0),
                    }
                )
            except (OSError, json.JSONDecodeError):
                continue
        return JSONResponse(rows)

    @app.websocket("/ws/teleop")
    async def teleop_socket(ws: WebSocket) -> None:
        await ws.accept()
        if server.session is not None:
            await ws.send_json(
                {"type": "error", "reason": "another session is active"}
            )
            await ws.close()
            return
        session = Session(config=server.config)
        server.session = session
        send_lock = asyncio.Lock()

        async def send(msg: dict) -> None:
            async with send_lock:
                await ws.send_json(msg)

        async def ticker() -> None:
            period = 1.0 / server.tick_hz if server.tick_hz > 0 else 0.0
            next_ts = time.monotonic()
            while True:
                if period > 0.0:
                    next_ts += period
                    delay = next_ts - time.monotonic()
                    if delay > 0:
                        await asyncio.sleep(delay)
                    else:
                        next_ts = time.monotonic()
                else:
                    await asyncio.sleep(0)
                if session.mode in (Mode.LIVE, Mode.RECORDING):
                    stale = (
                        session.actions_seen
                        and time.monotonic() - session.last_action_time
                        > server.action_timeout
                    )
                    if stale and server.tick_hz > 0:
                        continue  # auto-pause until a fresh action arrives
                msg = server.tick(session)
                if msg is not None:
                    await send(msg)

        tick_task = None
        if not server.lockstep:
            tick_task = asyncio.create_task(ticker())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await send({"type": "error", "reason": "invalid JSON"})
                    continue
                try:
                    reply = _handle_message(server, session, msg)
                except (ValueError, DatasetError) as exc:
                    await send({"type": "error", "reason": str(exc)})
                    continue
                if reply is not None:
                    await send(reply)
                if server.lockstep and msg.get("type") == "action":
                    out = server.tick(session)
                    if out is not None:
                        await send(out)
        except WebSocketDisconnect:
            pass
        finally:
            if tick_task is not None:
                tick_task.cancel()
            server.session = None

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

        @app.get("/")
        def root() -> FileResponse:
            return FileResponse(os.path.join(ui_dir, "index.html"))

    else:

        @app.get("/")
        def root_placeholder() -> HTMLResponse:
            return HTMLResponse(PLACEHOLDER_PAGE)

    return app


def _handle_message(server: TeleopServer, session: Session, msg: dict) -> Optional[dict]:
    kind = msg.get("type")
    if kind == "action":
        action = Action(
            throttle=_clamp_unit(msg.get("throttle", 0.0)),
            steering=_clamp_unit(msg.get("steering", 0.0)),
            pan_rate=_clamp_unit(msg.get("pan", 0.0)),
            tilt_rate=_clamp_unit(msg.get("tilt", 0.0)),
        )
        if session.sim is not None and session.sim.config.task == "base":
            action = Action(action.throttle, action.steering)
        session.apply_action(int(msg.get("seq", 0)), action, time.monotonic())
        return None
    if kind == "reset":
        return server.handle_reset(session, msg)
    if kind == "record_start":
        server.start_recording(session)
        return {"type": "ack", "event": "record_start"}
    if kind == "record_stop":
        result = server.stop_recording(session, save=bool(msg.get("save", False)))
        return {"type": "ack", "event": "record_stop", **result}
    if kind == "replay_start":
        return server.start_replay(session, msg)
    if kind == "replay_stop":
        session.mode = Mode.IDLE
        session.replay_actions = None
        return {"type": "ack", "event": "replay_stop"}
    raise ValueError(f"unknown message type {kind!r}")


def _clamp_unit(value) -> float:
    value = float(value)
    if value != value:  # NaN
        raise ValueError("action components must be finite")
    return max(-1.0, min(1.0, value))


def run_server(
    config: dict,
    dataset_path: str,
    port: Optional[int] = None,
    ui_dir: Optional[str] = None,
    lockstep: bool = False,
) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    app = create_app(config, dataset_path, ui_dir=ui_dir, lockstep=lockstep)
    uvicorn.run(app, host="127.0.0.1", port=port or int(config["teleop"]["port"]))
