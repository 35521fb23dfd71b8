// Canvas rendering for the two panels. Everything draws from the latest
// server state only; the client never simulates. The camera panel keeps
// the 120x80 frame's 3:2 aspect, with the crosshair at the (60, 40)
// target centre and a ring sized to the target area.

import type { StateMsg } from "./protocol.js";

export const FRAME_W = 120;
export const FRAME_H = 80;
export const TARGET_CX = 60;
export const TARGET_CY = 40;
export const TARGET_AREA = 10;

// Minimal subset of CanvasRenderingContext2D the panels need; tests pass
// a recording stub instead of a real canvas.
export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export interface CameraPanelGeometry {
  width: number;
  height: number;
}

export function frameToCanvas(
  cx: number,
  cy: number,
  geom: CameraPanelGeometry,
): { x: number; y: number } {
  return { x: (cx / FRAME_W) * geom.width, y: (cy / FRAME_H) * geom.height };
}

// Radius (in frame units) of a circle whose area matches an area given in
// percent-of-frame units.
export function areaRingRadius(areaPct: number): number {
  return Math.sqrt((Math.max(areaPct, 0) / 100) * FRAME_W * FRAME_H / Math.PI);
}

export function bboxCanvasRect(
  bbox: { cx: number; cy: number; area: number },
  geom: CameraPanelGeometry,
): { x: number; y: number; w: number; h: number } {
  // The wire carries centre + area only; draw a 3:8 (subject-shaped) box
  // of matching area centred on the projected centre.
  const areaUnits = (bbox.area / 100) * FRAME_W * FRAME_H;
  const w = Math.sqrt(areaUnits * (3 / 8));
  const h = areaUnits / (w || 1);
  const centre = frameToCanvas(bbox.cx, bbox.cy, geom);
  const sx = geom.width / FRAME_W;
  const sy = geom.height / FRAME_H;
  return {
    x: centre.x - (w * sx) / 2,
    y: centre.y - (h * sy) / 2,
    w: w * sx,
    h: h * sy,
  };
}

export function drawCameraPanel(
  ctx: Ctx2D,
  state: StateMsg,
  geom: CameraPanelGeometry,
  flashPhase = 0,
): void {
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, geom.width, geom.height);

  // target-area ring, flashing on success
  const ring = frameToCanvas(TARGET_CX, TARGET_CY, geom);
  const radius = areaRingRadius(TARGET_AREA) * (geom.width / FRAME_W);
  const flashing = state.done === "success" && flashPhase % 2 === 0;
  ctx.strokeStyle = flashing ? "#ffd34d" : "#3c6e47";
  ctx.lineWidth = flashing ? 3 : 1.5;
  ctx.beginPath();
  ctx.arc(ring.x, ring.y, radius, 0, 2 * Math.PI);
  ctx.stroke();

  // centre crosshair at (60, 40)
  ctx.strokeStyle = "#5a6772";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(ring.x - 8, ring.y);
  ctx.lineTo(ring.x + 8, ring.y);
  ctx.moveTo(ring.x, ring.y - 8);
  ctx.lineTo(ring.x, ring.y + 8);
  ctx.stroke();

  // subject bbox straight from the server state
  const rect = bboxCanvasRect(state.bbox, geom);
  ctx.strokeStyle = state.done === "subject_lost" ? "#d64545" : "#6fc2ff";
  ctx.lineWidth = 2;
  ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);

  if (state.done === "subject_lost") {
    ctx.fillStyle = "#d64545";
    ctx.font = "16px sans-serif";
    ctx.fillText("SUBJECT LOST", geom.width / 2 - 55, geom.height / 2);
  }
}

export interface WorldPanelGeometry {
  width: number;
  height: number;
  // world window, metres
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

export const DEFAULT_WORLD_GEOMETRY: WorldPanelGeometry = {
  width: 360,
  height: 360,
  xMin: -3.2,
  xMax: 3.2,
  yMin: -5.4,
  yMax: 1.0,
};

export function worldToCanvas(
  x: number,
  y: number,
  geom: WorldPanelGeometry,
): { x: number; y: number } {
  return {
    x: ((x - geom.xMin) / (geom.xMax - geom.xMin)) * geom.width,
    // world y up, canvas y down
    y: geom.height - ((y - geom.yMin) / (geom.yMax - geom.yMin)) * geom.height,
  };
}

export const START_MARKERS: ReadonlyArray<{ name: string; x: number; y: number }> = [
  { name: "P1", x: -2.0, y: -4.0 },
  { name: "P2", x: -1.0, y: -4.0 },
  { name: "P3", x: 0.0, y: -4.0 },
  { name: "P4", x: 1.0, y: -4.0 },
  { name: "P5", x: 2.0, y: -4.0 },
];

export function drawWorldPanel(
  ctx: Ctx2D,
  state: StateMsg,
  geom: WorldPanelGeometry = DEFAULT_WORLD_GEOMETRY,
): void {
  ctx.fillStyle = "#0c0f12";
  ctx.fillRect(0, 0, geom.width, geom.height);

  // start-position markers
  ctx.fillStyle = "#4a5560";
  ctx.font = "10px sans-serif";
  for (const marker of START_MARKERS) {
    const p = worldToCanvas(marker.x, marker.y, geom);
    ctx.beginPath();
    ctx.arc(p.x, p.y, 3, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillText(marker.name, p.x + 5, p.y + 3);
  }

  // subject at the origin
  const subject = worldToCanvas(0, 0, geom);
  ctx.fillStyle = "#c9a227";
  ctx.beginPath();
  ctx.arc(subject.x, subject.y, 5, 0, 2 * Math.PI);
  ctx.fill();

  // robot with heading and camera direction
  const robot = worldToCanvas(state.pose.x, state.pose.y, geom);
  ctx.fillStyle = state.mode === "recording" ? "#d64545" : "#6fc2ff";
  ctx.beginPath();
  ctx.arc(robot.x, robot.y, 5, 0, 2 * Math.PI);
  ctx.fill();

  const headingLen = 0.45;
  const tip = worldToCanvas(
    state.pose.x + headingLen * Math.cos(state.pose.heading),
    state.pose.y + headingLen * Math.sin(state.pose.heading),
    geom,
  );
  ctx.strokeStyle = "#9fd0ff";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(robot.x, robot.y);
  ctx.lineTo(tip.x, tip.y);
  ctx.stroke();

  const camYaw = state.pose.heading + state.camera.pan;
  const camTip = worldToCanvas(
    state.pose.x + 0.7 * Math.cos(camYaw),
    state.pose.y + 0.7 * Math.sin(camYaw),
    geom,
  );
  ctx.strokeStyle = "#ffd34d";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(robot.x, robot.y);
  ctx.lineTo(camTip.x, camTip.y);
  ctx.stroke();
}

export interface HudFields {
  tick: string;
  reward: string;
  area: string;
  mode: string;
  recording: boolean;
  banner: string;
}

export function hudFields(state: StateMsg, cumulativeReward: number): HudFields {
  let banner = "";
  if (state.done === "success") banner = "SUCCESS — target size reached";
  else if (state.done === "subject_lost") banner = "SUBJECT LOST";
  else if (state.done === "truncated") banner = "TRUNCATED — step cap reached";
  return {
    tick: String(state.tick),
    reward: cumulativeReward.toFixed(3),
    area: state.bbox.area.toFixed(2) + "%",
    mode: state.mode,
    recording: state.mode === "recording",
    banner,
  };
}
