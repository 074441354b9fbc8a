// Wire schema of the session feed (schema version 1). Mirrors the server's
// websocket messages verbatim; this file is the only place names appear.

export type AttentionState =
  | "HighAttention"
  | "StableAttention"
  | "DroppingAttention"
  | "CognitiveOverload"
  | "Distraction";

export type VisualFeedback =
  | "FocusMode"
  | "Default"
  | "HighlightCues"
  | "SoftenedUI"
  | "AnimatedCues";

export const ALL_STATES: AttentionState[] = [
  "HighAttention",
  "StableAttention",
  "DroppingAttention",
  "CognitiveOverload",
  "Distraction",
];

export interface HelloMsg {
  type: "hello";
  schema: number;
  seq: number;
  session_id: string;
  mode: string;
  total_us: number;
}

export interface StateUpdateMsg {
  type: "state_update";
  seq: number;
  state: AttentionState;
  probs: number[];
  window_end_us: number;
}

export interface DirectiveMsg {
  type: "directive";
  seq: number;
  state: AttentionState;
  visual: VisualFeedback;
  style: string;
  structure: string;
  strategy: string;
  ts_us: number;
}

export interface ChatMsg {
  type: "chat";
  seq: number;
  role: "user" | "assistant";
  content: string;
  state: AttentionState;
  failed: boolean;
  ts_us: number;
}

export interface ProbeMsg {
  type: "probe";
  seq: number;
  ts_us: number;
  deadline_us: number;
}

export interface ProbeAckMsg {
  type: "probe_ack";
  seq: number;
  probe_ts_us: number;
  rating: number;
  expired: boolean;
}

export interface FeaturesMsg {
  type: "features";
  seq: number;
  ts_us: number;
  vector: number[];
  quality: number;
}

export interface QualityMsg {
  type: "quality";
  seq: number;
  ts_us: number;
  kind: string;
  [extra: string]: unknown;
}

export interface DroppedMsg {
  type: "dropped";
  count: number;
}

export interface ByeMsg {
  type: "bye";
  seq: number;
}

export interface ErrorMsg {
  type: "error";
  error: string;
}

export type ServerMessage =
  | HelloMsg
  | StateUpdateMsg
  | DirectiveMsg
  | ChatMsg
  | ProbeMsg
  | ProbeAckMsg
  | FeaturesMsg
  | QualityMsg
  | DroppedMsg
  | ByeMsg
  | ErrorMsg;

export type ClientMessage =
  | { type: "user_msg"; content: string }
  | { type: "probe_response"; probe_ts_us: number; rating: number }
  | { type: "steer"; profile: AttentionState }
  | { type: "pause" }
  | { type: "resume" };

const KNOWN_TYPES = new Set([
  "hello",
  "state_update",
  "directive",
  "chat",
  "probe",
  "probe_ack",
  "features",
  "quality",
  "dropped",
  "bye",
  "error",
]);

/** Parse one feed frame; unknown or malformed frames yield null. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const t = (obj as { type?: unknown }).type;
  if (typeof t !== "string" || !KNOWN_TYPES.has(t)) return null;
  return obj as ServerMessage;
}
