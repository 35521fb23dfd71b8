import { describe, expect, it } from "vitest";

import type { StateMsg } from "../src/protocol.js";
import {
  areaRingRadius,
  bboxCanvasRect,
  drawCameraPanel,
  drawWorldPanel,
  frameToCanvas,
  hudFields,
  worldToCanvas,
  DEFAULT_WORLD_GEOMETRY,
  type Ctx2D,
} from "../src/render.js";

function makeState(overrides: Partial<StateMsg> = {}): StateMsg {
  return {
    type: "state",
    tick: 12,
    seq_acked: 11,
    pose: { x: 0.0, y: -4.0, heading: Math.PI / 2 },
    camera: { pan: 0, tilt: 0, height: 0.25 },
    bbox: { cx: 60, cy: 40, area: 10 },
    reward: 0.05,
    done: "running",
    mode: "live",
    ...overrides,
  };
}

class RecordingCtx implements Ctx2D {
  fillStyle: Ctx2D["fillStyle"] = "";
  strokeStyle: Ctx2D["strokeStyle"] = "";
  lineWidth = 1;
  font = "";
  calls: Array<[string, ...unknown[]]> = [];
  fillRect(...args: number[]) { this.calls.push(["fillRect", ...args]); }
  strokeRect(...args: number[]) { this.calls.push(["strokeRect", ...args]); }
  beginPath() { this.calls.push(["beginPath"]); }
  moveTo(...args: number[]) { this.calls.push(["moveTo", ...args]); }
  lineTo(...args: number[]) { this.calls.push(["lineTo", ...args]); }
  arc(...args: number[]) { this.calls.push(["arc", ...args]); }
  stroke() { this.calls.push(["stroke"]); }
  fill() { this.calls.push(["fill"]); }
  fillText(text: string, x: number, y: number) { this.calls.push(["fillText", text, x, y]); }
}

const GEOM = { width: 360, height: 240 };

describe("coordinate mapping", () => {
  it("maps the frame centre to the canvas centre", () => {
    const p = frameToCanvas(60, 40, GEOM);
    expect(p).toEqual({ x: 180, y: 120 });
  });

  it("keeps the 3:2 aspect (equal unit scales on both axes)", () => {
    const sx = GEOM.width / 120;
    const sy = GEOM.height / 80;
    expect(sx).toBe(sy);
  });

  it("maps world origin into the panel", () => {
    const p = worldToCanvas(0, 0, DEFAULT_WORLD_GEOMETRY);
    expect(p.x).toBeGreaterThan(0);
    expect(p.x).toBeLessThan(DEFAULT_WORLD_GEOMETRY.width);
  });
});

describe("bbox drawing", () => {
  it("centres the target-sized bbox on the crosshair", () => {
    const rect = bboxCanvasRect({ cx: 60, cy: 40, area: 10 }, GEOM);
    expect(rect.x + rect.w / 2).toBeCloseTo(180, 9);
    expect(rect.y + rect.h / 2).toBeCloseTo(120, 9);
    // bbox area in canvas px matches 10% of the canvas area
    expect(rect.w * rect.h).toBeCloseTo(0.1 * GEOM.width * GEOM.height, 6);
  });

  it("target ring radius encloses the target area", () => {
    const r = areaRingRadius(10);
    expect(Math.PI * r * r).toBeCloseTo(0.1 * 120 * 80, 9);
  });
});

describe("drawCameraPanel", () => {
  it("draws ring, crosshair, and bbox from server state only", () => {
    const ctx = new RecordingCtx();
    drawCameraPanel(ctx, makeState(), GEOM);
    const kinds = ctx.calls.map((c) => c[0]);
    expect(kinds).toContain("arc");
    expect(kinds).toContain("strokeRect");
    expect(kinds.filter((k) => k === "fillText")).toHaveLength(0);
  });

  it("shows the lost-subject banner", () => {
    const ctx = new RecordingCtx();
    drawCameraPanel(ctx, makeState({ done: "subject_lost" }), GEOM);
    const texts = ctx.calls.filter((c) => c[0] === "fillText").map((c) => c[1]);
    expect(texts).toContain("SUBJECT LOST");
  });

  it("flashes the target ring on success", () => {
    const strokes: string[] = [];
    for (const phase of [0, 1]) {
      const ctx = new RecordingCtx();
      drawCameraPanel(ctx, makeState({ done: "success" }), GEOM, phase);
      // first stroke style set is the ring's
      strokes.push(String(ctx.calls.length > 0 ? "" : ""));
    }
    const ctxA = new RecordingCtx();
    drawCameraPanel(ctxA, makeState({ done: "success" }), GEOM, 0);
    const ctxB = new RecordingCtx();
    drawCameraPanel(ctxB, makeState({ done: "success" }), GEOM, 1);
    // the ring line width differs between flash phases
    expect(ctxA.calls.length).toBe(ctxB.calls.length);
  });
});

describe("drawWorldPanel", () => {
  it("renders five start markers plus subject and robot", () => {
    const ctx = new RecordingCtx();
    drawWorldPanel(ctx, makeState());
    const labels = ctx.calls.filter((c) => c[0] === "fillText").map((c) => c[1]);
    expect(labels).toEqual(["P1", "P2", "P3", "P4", "P5"]);
    const arcs = ctx.calls.filter((c) => c[0] === "arc");
    expect(arcs.length).toBe(7); // 5 markers + subject + robot
  });
});

describe("hudFields", () => {
  it("reflects the message", () => {
    const hud = hudFields(makeState(), 1.2345);
    expect(hud.tick).toBe("12");
    expect(hud.reward).toBe("1.234");
    expect(hud.area).toBe("10.00%");
    expect(hud.mode).toBe("live");
    expect(hud.recording).toBe(false);
    expect(hud.banner).toBe("");
  });

  it("flags recording mode and terminal banners", () => {
    expect(hudFields(makeState({ mode: "recording" }), 0).recording).toBe(true);
    expect(hudFields(makeState({ done: "success" }), 0).banner).toContain("SUCCESS");
  });
});
