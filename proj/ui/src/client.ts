import { type ClientMessage, hello, parseServerMessage } from "./protocol.js";
import type { ViewState } from "./view.js";
import type { CuePlayer } from "./cues.js";

/// The subset of WebSocket used here; the browser class and `ws` both fit.
export interface SocketLike {
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
}

const OPEN = 1;

/// Network side of the client. Callbacks only write into the view state.
export class OperatorClient {
  socket: SocketLike | null = null;
  reconnectMs = 1000;
  onSnapshot: (() => void) | null = null;
  private closing = false;
  private retry: ReturnType<typeof setTimeout> | null = null;

  constructor(
    public url: string,
    private open: (url: string) => SocketLike,
    private view: ViewState,
    private cues: CuePlayer | null = null,
    private now: () => number = () => performance.now(),
  ) {}

  connect(): void {
    this.closing = false;
    this.view.connection = "connecting";
    const ws = this.open(this.url);
    this.socket = ws;
    ws.onopen = () => {
      this.view.connection = "open";
      ws.send(JSON.stringify(hello()));
    };
    ws.onmessage = (ev) => this.receive(String(ev.data));
    ws.onerror = () => {};
    ws.onclose = () => {
      if (this.socket !== ws) return;
      this.view.connection = "closed";
      this.socket = null;
      if (!this.closing) this.retry = setTimeout(() => this.connect(), this.reconnectMs);
    };
  }

  disconnect(): void {
    this.closing = true;
    if (this.retry) clearTimeout(this.retry);
    this.socket?.close();
  }

  send(m: ClientMessage): boolean {
    if (!this.socket || this.socket.readyState !== OPEN) return false;
    this.socket.send(JSON.stringify(m));
    return true;
  }

  receive(text: string): void {
    const parsed = parseServerMessage(text);
    if (!parsed.ok) {
      this.view.lastError = parsed.error;
      return;
    }
    const m = parsed.message;
    switch (m.type) {
      case "scene":
        this.view.scene = m;
        break;
      case "snapshot":
        this.view.snapshot = m;
        this.view.receivedAt = this.now();
        this.cues?.handle(m.cues);
        this.onSnapshot?.();
        break;
      case "trial_end":
        this.view.lastTrial = m;
        break;
      case "reject":
        this.view.lastError = m.reason;
        break;
      default:
        break;
    }
  }
}
