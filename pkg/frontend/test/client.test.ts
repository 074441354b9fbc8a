import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { FeedClient, WsLike } from "../src/client.js";
import type { ServerMessage } from "../src/protocol.js";

class FakeWs implements WsLike {
  sent: string[] = [];
  closedByClient = false;
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;

  constructor(public url: string) {}

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closedByClient = true;
  }

  serverOpen(): void {
    this.onopen?.();
  }

  serverSend(msg: object): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }

  serverClose(): void {
    this.onclose?.();
  }
}

function makeClient(received: ServerMessage[], statuses: string[]) {
  const sockets: FakeWs[] = [];
  const client = new FeedClient("ws://x/sessions/s1/feed", {
    onMessage: (m) => received.push(m),
    onStatus: (s) => statuses.push(s),
    factory: (url) => {
      const ws = new FakeWs(url);
      sockets.push(ws);
      return ws;
    },
    backoffBaseMs: 100,
  });
  return { client, sockets };
}

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
});

describe("feed client", () => {
  it("tracks seq and resumes from the last ack on reconnect", () => {
    const received: ServerMessage[] = [];
    const statuses: string[] = [];
    const { client, sockets } = makeClient(received, statuses);
    client.connect();
    const ws = sockets[0];
    expect(ws.url).not.toContain("from_seq");
    ws.serverOpen();
    ws.serverSend({ type: "hello", schema: 1, seq: 0, session_id: "s1", mode: "Adaptive", total_us: 1 });
    ws.serverSend({ type: "state_update", seq: 7, state: "HighAttention", probs: [1, 0, 0, 0, 0], window_end_us: 5 });
    expect(client.lastSeq).toBe(7);

    ws.serverClose();
    vi.advanceTimersByTime(100);
    expect(sockets.length).toBe(2);
    expect(sockets[1].url).toContain("from_seq=8");
    expect(statuses).toContain("reconnecting");
  });

  it("backs off exponentially across repeated drops", () => {
    const { client, sockets } = makeClient([], []);
    client.connect();
    sockets[0].serverClose();
    vi.advanceTimersByTime(99);
    expect(sockets.length).toBe(1);
    vi.advanceTimersByTime(1);
    expect(sockets.length).toBe(2);
    sockets[1].serverClose();
    vi.advanceTimersByTime(199);
    expect(sockets.length).toBe(2);
    vi.advanceTimersByTime(1);
    expect(sockets.length).toBe(3);
  });

  it("filters stale seqs after resume so messages never reorder", () => {
    const received: ServerMessage[] = [];
    const { client, sockets } = makeClient(received, []);
    client.connect();
    const ws = sockets[0];
    ws.serverOpen();
    ws.serverSend({ type: "state_update", seq: 4, state: "HighAttention", probs: [1, 0, 0, 0, 0], window_end_us: 5 });
    ws.serverSend({ type: "state_update", seq: 3, state: "Distraction", probs: [0, 0, 0, 0, 1], window_end_us: 4 });
    ws.serverSend({ type: "state_update", seq: 5, state: "StableAttention", probs: [0, 1, 0, 0, 0], window_end_us: 6 });
    const seqs = received.map((m) => ("seq" in m ? m.seq : -1));
    expect(seqs).toEqual([4, 5]);
  });

  it("sends operator and participant messages in the wire schema", () => {
    const { client, sockets } = makeClient([], []);
    client.connect();
    const ws = sockets[0];
    ws.serverOpen();
    client.sendUserMessage("hello there");
    client.sendProbeResponse(31_000_000, 4);
    client.sendSteer("Distraction");
    client.sendPause();
    client.sendResume();
    expect(ws.sent.map((s) => JSON.parse(s))).toEqual([
      { type: "user_msg", content: "hello there" },
      { type: "probe_response", probe_ts_us: 31_000_000, rating: 4 },
      { type: "steer", profile: "Distraction" },
      { type: "pause" },
      { type: "resume" },
    ]);
  });

  it("stops reconnecting once closed by the user", () => {
    const { client, sockets } = makeClient([], []);
    client.connect();
    client.close();
    sockets[0].serverClose();
    vi.advanceTimersByTime(60_000);
    expect(sockets.length).toBe(1);
  });

  it("ignores frames that are not valid schema messages", () => {
    const received: ServerMessage[] = [];
    const { client, sockets } = makeClient(received, []);
    client.connect();
    const ws = sockets[0];
    ws.serverOpen();
    ws.onmessage?.({ data: "not json" });
    ws.serverSend({ type: "martian", seq: 1 });
    expect(received).toEqual([]);
  });
});
