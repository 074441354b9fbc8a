// Browser wiring: feed -> reducer -> innerHTML, with delegated input
// handlers. Everything interesting lives in the pure modules; this file is
// the only one that touches the DOM or the clock.

import { FeedClient } from "./client.js";
import type { AttentionState } from "./protocol.js";
import { render } from "./render.js";
import { Action, initialModel, probeRated, reduce, UiModel } from "./store.js";

const TICK_MS = 250;

function feedUrl(): string {
  const params = new URLSearchParams(location.search);
  const session = params.get("session");
  if (!session) throw new Error("add ?session=<id> to the URL");
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const host = params.get("host") ?? location.host;
  return `${proto}://${host}/sessions/${session}/feed`;
}

function start(): void {
  const app = document.getElementById("app");
  if (!app) throw new Error("missing #app container");

  let model: UiModel = initialModel();
  const apply = (action: Action) => {
    const next = reduce(model, action);
    if (next !== model) {
      model = next;
      app.innerHTML = render(model);
      const input = document.getElementById("chat-input") as HTMLInputElement | null;
      if (input && pendingDraft) {
        input.value = pendingDraft;
        input.focus();
      }
    }
  };

  const client = new FeedClient(feedUrl(), {
    onMessage: (msg) => apply({ kind: "message", msg, atMs: Date.now() }),
    onStatus: (status) => apply({ kind: "status", status }),
  });
  client.connect();
  setInterval(() => apply({ kind: "tick", atMs: Date.now() }), TICK_MS);

  let pendingDraft = "";
  document.addEventListener("input", (ev) => {
    const el = ev.target as HTMLInputElement;
    if (el.id === "chat-input") pendingDraft = el.value;
  });

  document.addEventListener("submit", (ev) => {
    const form = ev.target as HTMLElement;
    if (form.id !== "chat-form") return;
    ev.preventDefault();
    const input = document.getElementById("chat-input") as HTMLInputElement | null;
    const text = input?.value.trim() ?? "";
    if (text) {
      client.sendUserMessage(text);
      pendingDraft = "";
      if (input) input.value = "";
    }
  });

  document.addEventListener("click", (ev) => {
    const el = ev.target as HTMLElement;
    if (el.classList.contains("probe-rate")) {
      const rating = Number(el.dataset.rating);
      const probeTs = Number(el.dataset.probe);
      client.sendProbeResponse(probeTs, rating);
      model = probeRated(model);
      app.innerHTML = render(model);
    } else if (el.id === "steer-apply") {
      const select = document.getElementById("steer-select") as HTMLSelectElement | null;
      if (select) client.sendSteer(select.value as AttentionState);
    } else if (el.id === "pause-toggle" || el.id === "review-pause") {
      if (model.paused) {
        client.sendResume();
      } else {
        client.sendPause();
      }
      apply({ kind: "local_pause", paused: !model.paused });
    }
  });
}

start();
