import { describe, expect, it } from "vitest";

import {
  DEADZONE,
  InputPoller,
  applyDeadzone,
  clampUnit,
  mapGamepadAxes,
  mapKeyboard,
  mergeInputs,
} from "../src/input.js";

describe("applyDeadzone", () => {
  it("zeroes values inside the deadzone", () => {
    expect(applyDeadzone(0)).toBe(0);
    expect(applyDeadzone(0.05)).toBe(0);
    expect(applyDeadzone(-0.08)).toBe(0);
  });

  it("rescales so deadzone edge maps to 0 and full deflection to 1", () => {
    expect(applyDeadzone(1)).toBeCloseTo(1, 12);
    expect(applyDeadzone(-1)).toBeCloseTo(-1, 12);
    const half = applyDeadzone(0.5);
    expect(half).toBeCloseTo((0.5 - DEADZONE) / (1 - DEADZONE), 12);
  });

  it("is odd-symmetric", () => {
    for (const v of [0.1, 0.3, 0.77, 0.99]) {
      expect(applyDeadzone(-v)).toBeCloseTo(-applyDeadzone(v), 12);
    }
  });

  it("clamps out-of-range input first", () => {
    expect(applyDeadzone(2.5)).toBe(1);
    expect(clampUnit(-7)).toBe(-1);
  });
});

describe("mapGamepadAxes", () => {
  it("returns zero action for a centred stick", () => {
    const action = mapGamepadAxes([0, 0, 0, 0]);
    expect(action).toEqual({ throttle: 0, steering: 0, pan: 0, tilt: 0 });
  });

  it("pushes forward for negative stick Y", () => {
    const action = mapGamepadAxes([0, -1, 0, 0]);
    expect(action.throttle).toBeCloseTo(1, 12);
  });

  it("tolerates missing axes", () => {
    expect(mapGamepadAxes([0.5]).throttle).toBe(0);
  });
});

describe("mapKeyboard", () => {
  const keys = (codes: string[]) => new Set(codes);

  it("maps arrows to drive and WASD-equivalents to camera", () => {
    const action = mapKeyboard(keys(["ArrowUp", "KeyA"]));
    expect(action.throttle).toBe(1);
    expect(action.pan).toBe(1);
    expect(action.tilt).toBe(0);
  });

  it("opposing keys cancel", () => {
    const action = mapKeyboard(keys(["ArrowUp", "ArrowDown"]));
    expect(action.throttle).toBe(0);
  });
});

describe("mergeInputs", () => {
  it("prefers an active gamepad axis over keys", () => {
    const merged = mergeInputs(
      { throttle: 0.4, steering: 0, pan: 0, tilt: 0 },
      { throttle: 1, steering: -1, pan: 0, tilt: 0 },
    );
    expect(merged.throttle).toBe(0.4);
    expect(merged.steering).toBe(-1);
  });

  it("falls back to keyboard with no gamepad", () => {
    const kb = { throttle: 1, steering: 0, pan: 0, tilt: -1 };
    expect(mergeInputs(null, kb)).toEqual(kb);
  });
});

describe("InputPoller", () => {
  it("produces the zero action with no gamepad and no keys", () => {
    const poller = new InputPoller();
    const { action } = poller.poll(null);
    expect(action).toEqual({ throttle: 0, steering: 0, pan: 0, tilt: 0 });
  });

  it("sequence numbers strictly increase across 1000 polls", () => {
    const poller = new InputPoller();
    let prev = -1;
    for (let i = 0; i < 1000; i++) {
      const { seq } = poller.poll(null);
      expect(seq).toBeGreaterThan(prev);
      prev = seq;
    }
  });

  it("tracks key presses and releases", () => {
    const poller = new InputPoller();
    poller.keyDown("ArrowUp");
    expect(poller.poll(null).action.throttle).toBe(1);
    poller.keyUp("ArrowUp");
    expect(poller.poll(null).action.throttle).toBe(0);
  });
});
