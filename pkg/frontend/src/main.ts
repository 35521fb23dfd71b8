// Operator console wiring: canvases, controls, input polling, and the
// WebSocket client. All simulation state comes from the server; the UI
// re-renders identically after a reconnect.

import { InputPoller } from "./input.js";
import { TeleopClient } from "./net.js";
import {
  actionMessage,
  recordStartMessage,
  recordStopMessage,
  replayStartMessage,
  resetMessage,
  type ServerMsg,
} from "./protocol.js";
import {
  DEFAULT_WORLD_GEOMETRY,
  drawCameraPanel,
  drawWorldPanel,
  hudFields,
} from "./render.js";

const TICK_HZ = 30;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const worldCanvas = el<HTMLCanvasElement>("world");
  const cameraCanvas = el<HTMLCanvasElement>("camera");
  const hudTick = el<HTMLSpanElement>("hud-tick");
  const hudReward = el<HTMLSpanElement>("hud-reward");
  const hudArea = el<HTMLSpanElement>("hud-area");
  const hudMode = el<HTMLSpanElement>("hud-mode");
  const hudBanner = el<HTMLDivElement>("hud-banner");
  const recordDot = el<HTMLSpanElement>("record-dot");
  const log = el<HTMLDivElement>("log");
  const datasetList = el<HTMLUListElement>("datasets");
  const scrubber = el<HTMLInputElement>("scrubber");

  const worldCtx = worldCanvas.getContext("2d")!;
  const cameraCtx = cameraCanvas.getContext("2d")!;
  const cameraGeom = { width: cameraCanvas.width, height: cameraCanvas.height };

  const client = new TeleopClient((url) => new WebSocket(url) as never);
  const poller = new InputPoller();
  let cumulativeReward = 0;
  let lastTickSent = 0;
  let lastRenderedTick = -1;

  function logLine(text: string): void {
    const row = document.createElement("div");
    row.textContent = text;
    log.prepend(row);
    while (log.childElementCount > 30) log.lastChild?.remove();
  }

  client.onEvent = (msg: ServerMsg) => {
    if (msg.type === "error") {
      logLine(`error: ${msg.reason}`);
    } else if (msg.type === "ack") {
      logLine(`ack: ${msg.event}${"saved" in msg ? ` saved=${msg.saved}` : ""}`);
      if (msg.event === "record_stop") refreshDatasets();
    } else if (msg.type === "state" && msg.tick === 0) {
      cumulativeReward = 0;
    }
  };

  function wsUrl(): string {
    const proto = location.protocol === "https:" ? "wss" : "ws";
    return `${proto}://${location.host}/ws/teleop`;
  }

  el<HTMLButtonElement>("btn-connect").onclick = () => {
    client.connect(wsUrl());
    logLine("connecting…");
  };
  el<HTMLButtonElement>("btn-reset").onclick = () => {
    const start = el<HTMLSelectElement>("start-pos").value;
    const seed = Number(el<HTMLInputElement>("seed").value) || 0;
    const task = el<HTMLSelectElement>("task").value;
    cumulativeReward = 0;
    client.send(resetMessage(start, seed, task));
  };
  el<HTMLButtonElement>("btn-record").onclick = () => client.send(recordStartMessage());
  el<HTMLButtonElement>("btn-save").onclick = () => client.send(recordStopMessage(true));
  el<HTMLButtonElement>("btn-discard").onclick = () => client.send(recordStopMessage(false));
  el<HTMLButtonElement>("btn-replay").onclick = () => {
    const index = Number(scrubber.value) || 0;
    client.send(replayStartMessage(index));
  };

  window.addEventListener("keydown", (ev) => poller.keyDown(ev.code));
  window.addEventListener("keyup", (ev) => poller.keyUp(ev.code));
  window.addEventListener("blur", () => poller.clearKeys());

  async function refreshDatasets(): Promise<void> {
    try {
      const rows = (await (await fetch("/datasets")).json()) as Array<{
        file: string;
        task: string;
        diversity: string;
        trajectories: number;
      }>;
      datasetList.replaceChildren(
        ...rows.map((row) => {
          const item = document.createElement("li");
          item.textContent = `${row.file} — ${row.task}/${row.diversity}, ${row.trajectories} takes`;
          return item;
        }),
      );
      if (rows.length > 0) {
        scrubber.max = String(Math.max(0, rows[0].trajectories - 1));
      }
    } catch {
      /* service may not be up yet */
    }
  }

  function frame(now: number): void {
    const state = client.latestState();
    const replaying = state?.mode === "replay";

    // one action message per tick period; input polling is disabled in
    // replay mode (the scrubber drives instead)
    if (client.connected && !replaying && now - lastTickSent >= 1000 / TICK_HZ) {
      lastTickSent = now;
      const pads = navigator.getGamepads ? navigator.getGamepads() : [];
      const axes = pads && pads[0] ? Array.from(pads[0].axes) : null;
      const { seq, action } = poller.poll(axes);
      client.send(actionMessage(seq, action));
    }

    if (state && state.tick !== lastRenderedTick) {
      lastRenderedTick = state.tick;
      if (state.tick > 0) cumulativeReward += state.reward;
      drawWorldPanel(worldCtx, state, DEFAULT_WORLD_GEOMETRY);
      drawCameraPanel(cameraCtx, state, cameraGeom, Math.floor(now / 250));
      const hud = hudFields(state, cumulativeReward);
      hudTick.textContent = hud.tick;
      hudReward.textContent = hud.reward;
      hudArea.textContent = hud.area;
      hudMode.textContent = hud.mode;
      hudBanner.textContent = hud.banner;
      recordDot.classList.toggle("on", hud.recording);
      scrubber.disabled = !replaying;
    }
    requestAnimationFrame(frame);
  }

  refreshDatasets();
  requestAnimationFrame(frame);
}

main();
