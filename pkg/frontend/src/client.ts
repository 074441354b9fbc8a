// Feed client: one websocket, exponential-backoff reconnect, and resume
// from the last acknowledged seq so nothing is replayed or lost across
// drops. The socket factory and timer hooks are injectable for tests.

import type { AttentionState, ClientMessage, ServerMessage } from "./protocol.js";
import { parseServerMessage } from "./protocol.js";
import type { ConnStatus } from "./store.js";

export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export interface FeedClientOptions {
  onMessage: (msg: ServerMessage) => void;
  onStatus?: (status: ConnStatus) => void;
  factory?: WsFactory;
  backoffBaseMs?: number;
  backoffCapMs?: number;
  schedule?: (fn: () => void, ms: number) => unknown;
}

export class FeedClient {
  private ws: WsLike | null = null;
  private attempts = 0;
  private closed = false;
  lastSeq = -1;

  constructor(
    private readonly feedUrl: string,
    private readonly opts: FeedClientOptions,
  ) {}

  private get factory(): WsFactory {
    return this.opts.factory ?? ((url) => new WebSocket(url) as unknown as WsLike);
  }

  connect(): void {
    const sep = this.feedUrl.includes("?") ? "&" : "?";
    const url =
      this.lastSeq >= 0 ? `${this.feedUrl}${sep}from_seq=${this.lastSeq + 1}` : this.feedUrl;
    this.opts.onStatus?.(this.attempts === 0 ? "connecting" : "reconnecting");
    const ws = this.factory(url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.opts.onStatus?.("open");
    };
    ws.onmessage = (ev) => {
      const msg = parseServerMessage(ev.data);
      if (!msg) return;
      if ("seq" in msg && typeof msg.seq === "number") {
        if (msg.seq <= this.lastSeq && msg.type !== "hello") return; // stale replay
        this.lastSeq = Math.max(this.lastSeq, msg.seq);
      }
      this.opts.onMessage(msg);
    };
    ws.onclose = () => {
      if (this.closed) return;
      this.opts.onStatus?.("reconnecting");
      const base = this.opts.backoffBaseMs ?? 500;
      const cap = this.opts.backoffCapMs ?? 30_000;
      const delay = Math.min(base * 2 ** this.attempts, cap);
      this.attempts += 1;
      const schedule = this.opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
      schedule(() => {
        if (!this.closed) this.connect();
      }, delay);
    };
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
    this.opts.onStatus?.("closed");
  }

  private send(msg: ClientMessage): void {
    this.ws?.send(JSON.stringify(msg));
  }

  sendUserMessage(content: string): void {
    if (content) this.send({ type: "user_msg", content });
  }

  sendProbeResponse(probeTsUs: number, rating: number): void {
    this.send({ type: "probe_response", probe_ts_us: probeTsUs, rating });
  }

  sendSteer(profile: AttentionState): void {
    this.send({ type: "steer", profile });
  }

  sendPause(): void {
    this.send({ type: "pause" });
  }

  sendResume(): void {
    this.send({ type: "resume" });
  }
}
