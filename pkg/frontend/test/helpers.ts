// Shared message builders for the dashboard tests.

import type { ServerMessage } from "../src/protocol.js";
import { Action, reduce, UiModel } from "../src/store.js";

export const STATE_ORDER = [
  "HighAttention",
  "StableAttention",
  "DroppingAttention",
  "CognitiveOverload",
  "Distraction",
];

export const hello: ServerMessage = {
  type: "hello",
  schema: 1,
  seq: 0,
  session_id: "s1",
  mode: "Adaptive",
  total_us: 420_000_000,
};

export function feed(model: UiModel, msgs: ServerMessage[], atMs = 0): UiModel {
  return msgs.reduce((m, msg) => reduce(m, { kind: "message", msg, atMs }), model);
}

export function stateUpdate(
  seq: number,
  state = "HighAttention",
  tUs = 5_000_000,
): ServerMessage {
  const probs = [0.1, 0.1, 0.1, 0.1, 0.1];
  probs[STATE_ORDER.indexOf(state)] = 0.6;
  return { type: "state_update", seq, state: state as never, probs, window_end_us: tUs };
}

export function directive(
  seq: number,
  visual = "HighlightCues",
  state = "DroppingAttention",
): ServerMessage {
  return {
    type: "directive",
    seq,
    state: state as never,
    visual: visual as never,
    style: "s",
    structure: "st",
    strategy: "x",
    ts_us: 6_000_000,
  };
}
