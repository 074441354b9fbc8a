// The dashboard state is a pure fold over the ordered feed: replaying the
// same message log (plus clock ticks) always lands in the same model, which
// is what makes session archives renderable after the fact.

import type {
  AttentionState,
  ServerMessage,
  VisualFeedback,
} from "./protocol.js";
import { themeFor, UiTheme } from "./themes.js";

export const PROBE_MODAL_MAX_MS = 3000;
export const SERIES_LIMIT = 120;
export const CHAT_LIMIT = 200;

// index of the engagement entry in the feature vector's fixed order
const ENGAGEMENT_INDEX = 3;

export type ConnStatus = "connecting" | "open" | "reconnecting" | "closed";

export interface ChatEntry {
  role: "user" | "assistant";
  content: string;
  state: AttentionState;
  failed: boolean;
  tsUs: number;
}

export interface ProbeModal {
  tsUs: number;
  deadlineUs: number;
  shownAtMs: number;
  rated: boolean;
}

export interface StatePoint {
  tsUs: number;
  state: AttentionState;
  probs: number[];
}

export interface UiModel {
  connection: ConnStatus;
  sessionId: string | null;
  mode: string | null;
  theme: UiTheme;
  directiveState: AttentionState | null;
  strategy: string | null;
  current: StatePoint | null;
  stateHistory: StatePoint[];
  engagementSeries: number[];
  qualitySeries: number[];
  chat: ChatEntry[];
  probe: ProbeModal | null;
  lastProbeAck: { probeTsUs: number; expired: boolean } | null;
  paused: boolean;
  ended: boolean;
  droppedCount: number;
  lastSeq: number;
  nowUs: number;
  lastError: string | null;
  themeChanges: number;
}

export function initialModel(): UiModel {
  return {
    connection: "connecting",
    sessionId: null,
    mode: null,
    theme: themeFor("Default"),
    directiveState: null,
    strategy: null,
    current: null,
    stateHistory: [],
    engagementSeries: [],
    qualitySeries: [],
    chat: [],
    probe: null,
    lastProbeAck: null,
    paused: false,
    ended: false,
    droppedCount: 0,
    lastSeq: -1,
    nowUs: 0,
    lastError: null,
    themeChanges: 0,
  };
}

export type Action =
  | { kind: "message"; msg: ServerMessage; atMs: number }
  | { kind: "tick"; atMs: number }
  | { kind: "status"; status: ConnStatus }
  | { kind: "local_pause"; paused: boolean };

function bounded<T>(xs: T[], limit: number): T[] {
  return xs.length > limit ? xs.slice(xs.length - limit) : xs;
}

function expireProbe(model: UiModel, atMs: number): UiModel {
  if (!model.probe) return model;
  const wallUp = atMs - model.probe.shownAtMs >= PROBE_MODAL_MAX_MS;
  const deadlinePassed = model.nowUs >= model.probe.deadlineUs;
  if (wallUp || deadlinePassed || model.probe.rated) {
    return { ...model, probe: null };
  }
  return model;
}

export function reduce(model: UiModel, action: Action): UiModel {
  switch (action.kind) {
    case "status":
      return { ...model, connection: action.status };
    case "local_pause":
      return { ...model, paused: action.paused };
    case "tick":
      return expireProbe(model, action.atMs);
    case "message":
      return expireProbe(applyMessage(model, action.msg, action.atMs), action.atMs);
  }
}

function applyMessage(model: UiModel, msg: ServerMessage, atMs: number): UiModel {
  const seq = "seq" in msg && typeof msg.seq === "number" ? msg.seq : model.lastSeq;
  const tsUs = "ts_us" in msg && typeof msg.ts_us === "number" ? msg.ts_us : 0;
  const next: UiModel = {
    ...model,
    lastSeq: Math.max(model.lastSeq, seq),
    nowUs: Math.max(model.nowUs, tsUs),
  };
  switch (msg.type) {
    case "hello":
      return { ...next, sessionId: msg.session_id, mode: msg.mode, connection: "open" };
    case "state_update": {
      const point: StatePoint = {
        tsUs: msg.window_end_us,
        state: msg.state,
        probs: msg.probs,
      };
      return {
        ...next,
        nowUs: Math.max(next.nowUs, msg.window_end_us),
        current: point,
        stateHistory: bounded([...model.stateHistory, point], SERIES_LIMIT),
      };
    }
    case "directive": {
      const theme = themeFor(msg.visual as VisualFeedback);
      return {
        ...next,
        theme,
        directiveState: msg.state,
        strategy: msg.strategy,
        themeChanges:
          model.theme.id === theme.id ? model.themeChanges : model.themeChanges + 1,
      };
    }
    case "chat":
      return {
        ...next,
        chat: bounded(
          [
            ...model.chat,
            {
              role: msg.role,
              content: msg.content,
              state: msg.state,
              failed: msg.failed,
              tsUs: msg.ts_us,
            },
          ],
          CHAT_LIMIT,
        ),
      };
    case "probe":
      return {
        ...next,
        probe: { tsUs: msg.ts_us, deadlineUs: msg.deadline_us, shownAtMs: atMs, rated: false },
      };
    case "probe_ack":
      return {
        ...next,
        lastProbeAck: { probeTsUs: msg.probe_ts_us, expired: msg.expired },
        probe:
          model.probe && model.probe.tsUs === msg.probe_ts_us
            ? { ...model.probe, rated: true }
            : model.probe,
      };
    case "features":
      if (model.paused) return next; // sparklines freeze while paused
      return {
        ...next,
        engagementSeries: bounded(
          [...model.engagementSeries, msg.vector[ENGAGEMENT_INDEX] ?? 0],
          SERIES_LIMIT,
        ),
        qualitySeries: bounded([...model.qualitySeries, msg.quality], SERIES_LIMIT),
      };
    case "quality":
      return next;
    case "dropped":
      return { ...next, droppedCount: model.droppedCount + msg.count };
    case "bye":
      return { ...next, ended: true };
    case "error":
      return { ...next, lastError: msg.error };
  }
}

/** Mark the visible probe as rated locally (optimistic, before the ack). */
export function probeRated(model: UiModel): UiModel {
  if (!model.probe) return model;
  return { ...model, probe: { ...model.probe, rated: true } };
}
