/**
 * WebSocket lifecycle: connect, parse, reconnect.
 *
 * The socket constructor is injected so tests (and the node e2e driver) can
 * supply the `ws` package or a fake; browsers pass the global WebSocket.
 */

import type { ControllerSample, Mode, ServerMessage } from './protocol.js';
import { SCHEMA_VERSION, controllerInput, parseServer, reset, setMode, setTask } from './protocol.js';

/** The slice of the WebSocket API we rely on (browser and `ws` both fit). */
export interface SocketLike {
  send(data: string): void;
  close(code?: number): void;
  // eslint-disable-next-line @typescript-eslint/no-explicit-any
  onopen: ((ev?: any) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: { code?: number; reason?: string }) => void) | null;
  // eslint-disable-next-line @typescript-eslint/no-explicit-any
  onerror: ((ev?: any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface WireEvents {
  onMessage: (msg: ServerMessage) => void;
  onStatus?: (connected: boolean, note: string) => void;
  /** Protocol-level dead end (e.g. schema mismatch); no reconnect follows. */
  onFatal?: (reason: string) => void;
}

export const RETRY_MS = 1000;
const CLOSE_VERSION_MISMATCH = 4003;

export class Wire {
  private sock: SocketLike | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  private tickNo = 0;
  connected = false;

  constructor(
    private url: string,
    private makeSocket: SocketFactory,
    private ev: WireEvents,
  ) {}

  start(): void {
    this.stopped = false;
    this.open();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.sock?.close();
    this.sock = null;
  }

  private open(): void {
    const sep = this.url.includes('?') ? '&' : '?';
    const sock = this.makeSocket(`${this.url}${sep}schema_version=${SCHEMA_VERSION}`);
    this.sock = sock;
    sock.onopen = () => {
      this.connected = true;
      this.ev.onStatus?.(true, 'connected');
    };
    sock.onmessage = (e) => {
      const raw = typeof e.data === 'string' ? e.data : String(e.data);
      const r = parseServer(raw);
      if (!r.ok) {
        if (r.versionMismatch) this.fatal(r.reason);
        return; // unknown chatter: ignore, the server polices its own side
      }
      this.ev.onMessage(r.message);
    };
    sock.onclose = (e) => {
      const wasConnected = this.connected;
      this.connected = false;
      if (this.stopped) return;
      if (e.code === CLOSE_VERSION_MISMATCH) {
        this.fatal(`server rejected protocol version (close ${e.code})`);
        return;
      }
      this.ev.onStatus?.(false, wasConnected ? 'connection lost' : 'connect failed');
      this.timer = setTimeout(() => {
        this.timer = null;
        this.open();
      }, RETRY_MS);
    };
    sock.onerror = () => {
      /* close always follows; reconnect is handled there */
    };
  }

  private fatal(reason: string): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.ev.onStatus?.(false, reason);
    this.ev.onFatal?.(reason);
  }

  private push(payload: string): boolean {
    if (!this.connected || this.sock === null) return false;
    this.sock.send(payload);
    return true;
  }

  sendInput(sample: ControllerSample): boolean {
    return this.push(controllerInput(sample, this.tickNo++));
  }

  sendMode(mode: Mode): boolean {
    return this.push(setMode(mode, this.tickNo++));
  }

  sendTask(task: string): boolean {
    return this.push(setTask(task, this.tickNo++));
  }

  sendReset(seed?: number): boolean {
    return this.push(reset(this.tickNo++, seed));
  }
}
