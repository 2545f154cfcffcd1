import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import type { SocketLike } from '../src/net';
import { RETRY_MS, Wire } from '../src/net';
import type { ServerMessage } from '../src/protocol';

class FakeSocket implements SocketLike {
  static all: FakeSocket[] = [];
  sent: string[] = [];
  closedWith: number | undefined;
  onopen: SocketLike['onopen'] = null;
  onmessage: SocketLike['onmessage'] = null;
  onclose: SocketLike['onclose'] = null;
  onerror: SocketLike['onerror'] = null;

  constructor(public url: string) {
    FakeSocket.all.push(this);
  }
  send(d: string): void {
    this.sent.push(d);
  }
  close(code?: number): void {
    this.closedWith = code ?? 1000;
  }
  // --- test-side controls ---
  open(): void {
    this.onopen?.();
  }
  feed(obj: unknown): void {
    this.onmessage?.({ data: typeof obj === 'string' ? obj : JSON.stringify(obj) });
  }
  drop(code = 1006): void {
    this.onclose?.({ code });
  }
}

const frame = (over: Record<string, unknown> = {}) => ({
  type: 'behavior_update',
  schema_version: 1,
  tick: 1,
  behaviors: { left: 0, right: 2 },
  mode: 'm3',
  ...over,
});

let got: ServerMessage[];
let status: Array<[boolean, string]>;
let fatal: string[];
let wire: Wire;

function makeWire(url = 'ws://h:1/ws'): Wire {
  return new Wire(url, (u) => new FakeSocket(u), {
    onMessage: (m) => got.push(m),
    onStatus: (c, note) => status.push([c, note]),
    onFatal: (r) => fatal.push(r),
  });
}

beforeEach(() => {
  vi.useFakeTimers();
  FakeSocket.all = [];
  got = [];
  status = [];
  fatal = [];
  wire = makeWire();
});

afterEach(() => {
  wire.stop();
  vi.useRealTimers();
});

describe('connection lifecycle', () => {
  it('pins schema_version in the connect URL', () => {
    wire.start();
    expect(FakeSocket.all[0]?.url).toBe('ws://h:1/ws?schema_version=1');
    wire.stop();
    const w2 = makeWire('ws://h:1/ws?x=1');
    w2.start();
    expect(FakeSocket.all[1]?.url).toBe('ws://h:1/ws?x=1&schema_version=1');
    w2.stop();
  });

  it('reports status transitions', () => {
    wire.start();
    FakeSocket.all[0]!.open();
    expect(wire.connected).toBe(true);
    expect(status).toEqual([[true, 'connected']]);
    FakeSocket.all[0]!.drop();
    expect(wire.connected).toBe(false);
    expect(status[1]).toEqual([false, 'connection lost']);
  });

  it('reconnects after RETRY_MS, repeatedly', () => {
    wire.start();
    expect(FakeSocket.all).toHaveLength(1);
    FakeSocket.all[0]!.drop();
    expect(FakeSocket.all).toHaveLength(1);
    vi.advanceTimersByTime(RETRY_MS - 1);
    expect(FakeSocket.all).toHaveLength(1);
    vi.advanceTimersByTime(2);
    expect(FakeSocket.all).toHaveLength(2);
    FakeSocket.all[1]!.drop();
    vi.advanceTimersByTime(RETRY_MS + 1);
    expect(FakeSocket.all).toHaveLength(3);
  });

  it('stop() cancels the pending retry', () => {
    wire.start();
    FakeSocket.all[0]!.drop();
    wire.stop();
    vi.advanceTimersByTime(RETRY_MS * 5);
    expect(FakeSocket.all).toHaveLength(1);
  });

  it('a 4003 close is terminal: no retry, onFatal fires', () => {
    wire.start();
    FakeSocket.all[0]!.open();
    FakeSocket.all[0]!.drop(4003);
    expect(fatal).toHaveLength(1);
    expect(fatal[0]).toContain('4003');
    vi.advanceTimersByTime(RETRY_MS * 5);
    expect(FakeSocket.all).toHaveLength(1);
  });

  it('a mid-stream version-mismatch frame is also terminal', () => {
    wire.start();
    FakeSocket.all[0]!.open();
    FakeSocket.all[0]!.feed(frame({ schema_version: 99 }));
    expect(fatal).toHaveLength(1);
    expect(got).toHaveLength(0);
  });
});

describe('message plumbing', () => {
  it('parses frames and hands them over; junk is dropped silently', () => {
    wire.start();
    const s = FakeSocket.all[0]!;
    s.open();
    s.feed(frame());
    s.feed('{nope');
    s.feed(frame({ type: 'who_knows' }));
    expect(got).toHaveLength(1);
    expect(got[0]?.type).toBe('behavior_update');
    expect(fatal).toHaveLength(0);
  });

  it('outgoing helpers stamp monotone ticks and fail cleanly when offline', () => {
    wire.start();
    const s = FakeSocket.all[0]!;
    expect(wire.sendMode('m2')).toBe(false); // not open yet
    s.open();
    expect(
      wire.sendInput({ hand: 'right', pose: [0, 0, 0, 1, 0, 0, 0], grasp_button: false, finger_open: false }),
    ).toBe(true);
    expect(wire.sendMode('m1')).toBe(true);
    expect(wire.sendTask('arch')).toBe(true);
    expect(wire.sendReset(9)).toBe(true);
    const ticks = s.sent.map((d) => JSON.parse(d).tick);
    expect(ticks).toEqual([1, 2, 3, 4]); // tick 0 was burned by the offline attempt
    const types = s.sent.map((d) => JSON.parse(d).type);
    expect(types).toEqual(['controller_input', 'set_mode', 'set_task', 'reset']);
  });
});
