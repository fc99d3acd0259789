// Session socket: forwards frames both ways, tracks round-trip latency, and
// reconnects with the service's render snapshot restoring the view.

import type { KeyEventFrame, ServerFrame } from "./protocol.js";
import { parseServerFrame } from "./protocol.js";

export interface SocketCallbacks {
  onFrame(frame: ServerFrame): void;
  onStatus(status: "connecting" | "connected" | "disconnected"): void;
  onLatency?(rttMs: number): void;
}

export class SessionSocket {
  private socket: WebSocket | null = null;
  private lastSentAt: number | null = null;
  private closed = false;

  constructor(private readonly url: string, private readonly callbacks: SocketCallbacks) {}

  connect(): void {
    this.closed = false;
    this.callbacks.onStatus("connecting");
    this.socket = new WebSocket(this.url);
    this.socket.onopen = () => this.callbacks.onStatus("connected");
    this.socket.onmessage = (event) => {
      let data: unknown;
      try {
        data = JSON.parse(String(event.data));
      } catch {
        return;
      }
      const frame = parseServerFrame(data);
      if (frame === null) return;
      if (this.lastSentAt !== null && this.callbacks.onLatency) {
        this.callbacks.onLatency(performance.now() - this.lastSentAt);
        this.lastSentAt = null;
      }
      this.callbacks.onFrame(frame);
    };
    this.socket.onclose = () => {
      this.callbacks.onStatus("disconnected");
      this.socket = null;
      if (!this.closed) {
        setTimeout(() => this.connect(), 1000);
      }
    };
  }

  send(frame: KeyEventFrame): boolean {
    if (this.socket === null || this.socket.readyState !== WebSocket.OPEN) {
      return false;
    }
    this.lastSentAt = performance.now();
    this.socket.send(JSON.stringify(frame));
    return true;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
