// Gamepad and keyboard capture. Axes pass through a deadzone before an
// affine rescale, so the deadzone edge maps to 0 and full deflection to
// exactly 1; everything is clamped into [-1, 1].

import type { ActionValues } from "./protocol.js";

export const DEADZONE = 0.08;

export function clampUnit(value: number): number {
  return value < -1 ? -1 : value > 1 ? 1 : value;
}

export function applyDeadzone(value: number, deadzone: number = DEADZONE): number {
  const v = clampUnit(value);
  const mag = Math.abs(v);
  if (mag <= deadzone) return 0;
  const rescaled = (mag - deadzone) / (1 - deadzone);
  return Math.sign(v) * rescaled;
}

// Standard-mapping gamepad: left stick drives, right stick aims.
// Stick Y axes point down, hence the sign flips for throttle and tilt.
export function mapGamepadAxes(
  axes: ReadonlyArray<number>,
  deadzone: number = DEADZONE,
): ActionValues {
  const axis = (i: number) => applyDeadzone(axes[i] ?? 0, deadzone);
  const flip = (v: number) => (v === 0 ? 0 : -v); // avoid -0
  return {
    throttle: flip(axis(1)),
    steering: flip(axis(0)),
    pan: flip(axis(2)),
    tilt: flip(axis(3)),
  };
}

export interface KeyState {
  has(code: string): boolean;
}

// Keyboard fallback: arrows drive, A/D pan, W/S tilt.
export function mapKeyboard(keys: KeyState): ActionValues {
  const pair = (pos: string, neg: string) =>
    (keys.has(pos) ? 1 : 0) - (keys.has(neg) ? 1 : 0);
  return {
    throttle: pair("ArrowUp", "ArrowDown"),
    steering: pair("ArrowLeft", "ArrowRight"),
    pan: pair("KeyA", "KeyD"),
    tilt: pair("KeyW", "KeyS"),
  };
}

export function mergeInputs(gamepad: ActionValues | null, keyboard: ActionValues): ActionValues {
  if (gamepad === null) return keyboard;
  const pick = (g: number, k: number) => (g !== 0 ? g : k);
  return {
    throttle: clampUnit(pick(gamepad.throttle, keyboard.throttle)),
    steering: clampUnit(pick(gamepad.steering, keyboard.steering)),
    pan: clampUnit(pick(gamepad.pan, keyboard.pan)),
    tilt: clampUnit(pick(gamepad.tilt, keyboard.tilt)),
  };
}

export const ZERO_ACTION: ActionValues = { throttle: 0, steering: 0, pan: 0, tilt: 0 };

// Polls inputs once per animation frame; every emitted action carries a
// strictly increasing sequence number.
export class InputPoller {
  private seq = 0;
  private keys = new Set<string>();

  keyDown(code: string): void {
    this.keys.add(code);
  }

  keyUp(code: string): void {
    this.keys.delete(code);
  }

  clearKeys(): void {
    this.keys.clear();
  }

  nextSeq(): number {
    return this.seq++;
  }

  poll(gamepadAxes: ReadonlyArray<number> | null): { seq: number; action: ActionValues } {
    const gamepad = gamepadAxes ? mapGamepadAxes(gamepadAxes) : null;
    const action = mergeInputs(gamepad, mapKeyboard(this.keys));
    return { seq: this.nextSeq(), action };
  }
}
