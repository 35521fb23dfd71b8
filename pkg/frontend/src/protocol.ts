// Wire schema for the teleop WebSocket. Field names must match the
// service exactly; the server emits one state message per simulator tick.

export interface PoseMsg {
  x: number;
  y: number;
  heading: number;
}

export interface CameraMsg {
  pan: number;
  tilt: number;
  height: number;
}

export interface BboxMsg {
  cx: number;
  cy: number;
  area: number;
}

export type DoneStatus = "running" | "success" | "truncated" | "subject_lost";
export type Mode = "idle" | "live" | "recording" | "replay";

export interface StateMsg {
  type: "state";
  tick: number;
  seq_acked: number;
  pose: PoseMsg;
  camera: CameraMsg;
  bbox: BboxMsg;
  reward: number;
  done: DoneStatus;
  mode: Mode;
}

export interface AckMsg {
  type: "ack";
  event: string;
  [key: string]: unknown;
}

export interface ErrorMsg {
  type: "error";
  reason: string;
}

export type ServerMsg = StateMsg | AckMsg | ErrorMsg;

export interface ActionValues {
  throttle: number;
  steering: number;
  pan: number;
  tilt: number;
}

export function actionMessage(seq: number, action: ActionValues): string {
  return JSON.stringify({
    type: "action",
    seq,
    throttle: action.throttle,
    steering: action.steering,
    pan: action.pan,
    tilt: action.tilt,
  });
}

export function resetMessage(startPosition: string, seed: number, task: string): string {
  return JSON.stringify({ type: "reset", start_position: startPosition, seed, task });
}

export function recordStartMessage(): string {
  return JSON.stringify({ type: "record_start" });
}

export function recordStopMessage(save: boolean): string {
  return JSON.stringify({ type: "record_stop", save });
}

export function replayStartMessage(index: number): string {
  return JSON.stringify({ type: "replay_start", index });
}

export function parseServerMessage(raw: string): ServerMsg | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const type = (doc as { type?: unknown }).type;
  if (type === "state" || type === "ack" || type === "error") {
    return doc as ServerMsg;
  }
  return null;
}
