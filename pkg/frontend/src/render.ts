// Pure model -> HTML. No timers, no network, no globals: rendering an
// archived session's final model gives the final screen, byte for byte.

import { ALL_STATES } from "./protocol.js";
import { sparklinePoints } from "./sparkline.js";
import type { UiModel } from "./store.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Minimal emphasis: **key point** becomes <strong>key point</strong>. */
export function renderContent(text: string): string {
  return escapeHtml(text).replace(/\*\*([^*]+)\*\*/g, "<strong>$1</strong>");
}

function stateStrip(model: UiModel): string {
  const cells = ALL_STATES.map((state) => {
    const active = model.current?.state === state ? " active" : "";
    const p = model.current ? model.current.probs[ALL_STATES.indexOf(state)] : 0;
    const pct = Math.round((p ?? 0) * 100);
    return (
      `<div class="state-cell${active}" data-state="${state}">` +
      `<span class="state-name">${state}</span>` +
      `<div class="prob-bar"><div class="prob-fill" style="width:${pct}%"></div></div>` +
      `<span class="prob-num">${pct}%</span></div>`
    );
  });
  return `<div id="state-strip">${cells.join("")}</div>`;
}

function sparklines(model: UiModel): string {
  const frozen = model.paused ? " frozen" : "";
  return (
    `<div id="sparklines" class="panel${frozen}">` +
    `<div class="spark"><label>engagement</label>` +
    `<svg viewBox="0 0 240 40"><polyline points="${sparklinePoints(model.engagementSeries)}"/></svg></div>` +
    `<div class="spark"><label>eye quality</label>` +
    `<svg viewBox="0 0 240 40"><polyline points="${sparklinePoints(model.qualitySeries)}"/></svg></div>` +
    `</div>`
  );
}

function chatLog(model: UiModel): string {
  const turns = model.chat
    .map((t) => {
      const failed = t.failed ? " failed" : "";
      const body = t.failed ? "(backend unavailable, try again)" : renderContent(t.content);
      return `<div class="turn ${t.role}${failed}" data-state="${t.state}">${body}</div>`;
    })
    .join("");
  return `<div id="chat-log">${turns}</div>`;
}

function probeModal(model: UiModel): string {
  if (!model.probe) return "";
  const remainingUs = Math.max(0, model.probe.deadlineUs - model.nowUs);
  const seconds = Math.ceil(remainingUs / 1_000_000);
  const buttons = [1, 2, 3, 4, 5]
    .map((r) => `<button class="probe-rate" data-rating="${r}" data-probe="${model.probe!.tsUs}">${r}</button>`)
    .join("");
  return (
    `<div id="probe-modal" role="dialog">` +
    `<p>How focused were you just now? (1 = fully distracted, 5 = fully focused)</p>` +
    `<div class="probe-buttons">${buttons}</div>` +
    `<span class="probe-countdown">${seconds}s</span></div>`
  );
}

function controls(model: UiModel): string {
  const options = ALL_STATES.map((s) => `<option value="${s}">${s}</option>`).join("");
  const pauseLabel = model.paused ? "Resume" : "Pause";
  const extraPause = model.theme.pauseControl
    ? `<button id="review-pause" class="prominent">${pauseLabel} &amp; review</button>`
    : "";
  return (
    `<div id="operator" class="panel">` +
    `<select id="steer-select">${options}</select>` +
    `<button id="steer-apply">Steer source</button>` +
    `<button id="pause-toggle">${pauseLabel}</button>${extraPause}</div>`
  );
}

function statusBar(model: UiModel): string {
  const bits = [
    `session ${model.sessionId ?? "-"}`,
    model.mode ?? "",
    `conn ${model.connection}`,
    model.paused ? "paused" : "live",
    model.ended ? "ended" : "",
    model.droppedCount ? `dropped ${model.droppedCount}` : "",
    model.lastError ? `error: ${escapeHtml(model.lastError)}` : "",
  ].filter(Boolean);
  return `<div id="status-bar">${bits.join(" | ")}</div>`;
}

export function render(model: UiModel): string {
  const t = model.theme;
  const classes = [
    t.rootClass,
    t.chromeHidden ? "chrome-hidden" : "",
    t.softened ? "softened" : "",
    t.highlightKeyPoints ? "highlight-keys" : "",
    t.animatedCues ? "animated-cues" : "",
  ]
    .filter(Boolean)
    .join(" ");
  const chrome = t.chromeHidden
    ? ""
    : `<header id="chrome"><h1>focusloop</h1>${statusBar(model)}</header>`;
  return (
    `<div id="root" class="${classes}" style="--accent:${t.accent}">` +
    chrome +
    stateStrip(model) +
    sparklines(model) +
    chatLog(model) +
    `<form id="chat-form"><input id="chat-input" type="text" ` +
    `placeholder="Ask something" autocomplete="off"/><button type="submit">Send</button></form>` +
    controls(model) +
    probeModal(model) +
    `</div>`
  );
}
