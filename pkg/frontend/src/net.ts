// WebSocket client with a latest-state mailbox: the render loop reads the
// most recent state at its own pace, decoupled from message arrival.

import { parseServerMessage, type ServerMsg, type StateMsg } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: string }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export class TeleopClient {
  private socket: SocketLike | null = null;
  private latest: StateMsg | null = null;
  connected = false;
  onEvent: ((msg: ServerMsg) => void) | null = null;

  constructor(private makeSocket: SocketFactory) {}

  connect(url: string): void {
    this.socket = this.makeSocket(url);
    this.socket.onopen = () => {
      this.connected = true;
    };
    this.socket.onclose = () => {
      this.connected = false;
      this.latest = null;
    };
    this.socket.onmessage = (ev) => {
      const msg = parseServerMessage(ev.data);
      if (msg === null) return;
      if (msg.type === "state") {
        this.latest = msg;
      }
      if (this.onEvent) this.onEvent(msg);
    };
  }

  disconnect(): void {
    this.socket?.close();
    this.socket = null;
    this.connected = false;
    this.latest = null;
  }

  latestState(): StateMsg | null {
    return this.latest;
  }

  send(payload: string): void {
    if (this.socket && this.connected) {
      this.socket.send(payload);
    }
  }
}
