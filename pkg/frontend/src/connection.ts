import { websocketUrl } from "./gatewayClient.js";
import type { FrameEvent } from "./types.js";

export type ConnectionPhase = "disconnected" | "connecting" | "connected" | "lost";

// The slice of the WebSocket surface the channel needs; tests substitute fakes.
export interface FrameSocket {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => FrameSocket;

export interface ChannelEvents {
  onPhase?: (phase: ConnectionPhase, notice?: string) => void;
  onFrame?: (frame: FrameEvent) => void;
}

/**
 * Frame push channel with the connection state machine:
 * Disconnected -> Connecting -> Connected -> (link drops) -> Lost.
 * Lost is only ever entered from Connected, and exactly one notice is
 * emitted on that edge; a failed connect falls back to Disconnected.
 */
export class FrameChannel {
  phase: ConnectionPhase = "disconnected";
  lastFrame: FrameEvent | null = null;
  private socket: FrameSocket | null = null;
  private events: ChannelEvents;
  private closing = false;

  constructor(
    private factory: SocketFactory,
    events: ChannelEvents = {}
  ) {
    this.events = events;
  }

  private setPhase(phase: ConnectionPhase, notice?: string): void {
    this.phase = phase;
    this.events.onPhase?.(phase, notice);
  }

  connect(gatewayUrl: string): void {
    if (this.phase === "connecting" || this.phase === "connected") return;
    this.closing = false;
    this.setPhase("connecting");
    let socket: FrameSocket;
    try {
      socket = this.factory(websocketUrl(gatewayUrl));
    } catch (err) {
      this.setPhase("disconnected", `cannot reach gateway: ${String(err)}`);
      return;
    }
    this.socket = socket;
    socket.onopen = () => this.setPhase("connected");
    socket.onmessage = (ev) => {
      const frame = JSON.parse(ev.data) as FrameEvent;
      // the live view always shows the highest frame id received
      if (!this.lastFrame || frame.frame_id > this.lastFrame.frame_id) {
        this.lastFrame = frame;
        this.events.onFrame?.(frame);
      }
    };
    const dropped = () => {
      if (this.closing) return;
      if (this.phase === "connected") {
        this.setPhase("lost", "connection to the gateway was lost");
      } else if (this.phase === "connecting") {
        this.setPhase("disconnected", "cannot reach gateway");
      }
    };
    socket.onclose = dropped;
    socket.onerror = dropped;
  }

  disconnect(): void {
    this.closing = true;
    this.socket?.close();
    this.socket = null;
    this.setPhase("disconnected");
  }
}
