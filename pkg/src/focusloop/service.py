"""Session orchestration: the source -> window -> features -> classifier ->
adaptation pipeline behind an append-only event log.

One SessionRuntime is the single windowing context; it is driven forward in
session time by advance_to() and never sees wall clocks (the server maps
wall time to session time, applying acceleration and pauses). Everything
observable is an event on the record: samples, windows, feature vectors,
classifications, state changes, directives, chat turns, probes, quality
flags. Replaying the recorded samples through a fresh pipeline with the
same model file reproduces the derived events bit for bit; that replay
lives here too and shares the exact tick engine with the live path.

Ordering contract: seq is a strict total order; derived (non-sample) events
are non-decreasing in ts. Sample events sit in arrival order inside their
1 s chunk, so their timestamps may interleave across streams by up to the
delivery jitter bound, exactly as a real recording's would.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from . import kernels
from .adapt import (
    AdaptationDirective,
    BackendRequest,
    ChatTurn,
    DirectiveSet,
    StateTracker,
    compose_prompt,
)
from .errors import ArchiveIntegrityError
from .mlp import MlpModel, model_fingerprint
from .pipeline import WindowProcessor
from .simulate import (
    ProbeEvent,
    ScenarioScript,
    ScenarioSource,
    StateSignalProfile,
    default_profiles,
    parse_scenario,
    probe_schedule,
)
from .states import AttentionState
from .streams import (
    AlignedWindow,
    HOP_US,
    StreamMerger,
    StreamStalled,
    TimestampedSample,
    eeg_descriptor,
    eye_descriptor,
    resolve_window_label,
)

SCHEMA_VERSION = 1
MODE_ADAPTIVE = "Adaptive"
MODE_BASELINE = "Baseline"

# event kinds whose payloads must reproduce exactly under replay
DERIVED_KINDS = ("window", "features", "classification", "state_change", "directive", "quality")


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    ts_us: int
    kind: str
    data: dict


class SessionRecord:
    """Append-only, seq-ordered session log with a JSON-lines archive form."""

    def __init__(self, header: dict):
        self.header = header
        self.events: list[SessionEvent] = []
        self._last_derived_ts = -1

    def append(self, kind: str, ts_us: int, data: dict) -> SessionEvent:
        if kind != "sample":
            if ts_us < self._last_derived_ts:
                raise ValueError(
                    f"event {kind} at {ts_us} regresses behind {self._last_derived_ts}"
                )
            self._last_derived_ts = ts_us
        ev = SessionEvent(seq=len(self.events), ts_us=ts_us, kind=kind, data=data)
        self.events.append(ev)
        return ev

    def events_since(self, seq: int) -> list[SessionEvent]:
        return self.events[seq:]


@dataclass
class SessionConfig:
    mode: str = MODE_ADAPTIVE
    tracker_k: int = 2
    history_limit: int = 20
    include_fixation_count: bool = False
    record_samples: bool = True

    def __post_init__(self):
        if self.mode not in (MODE_ADAPTIVE, MODE_BASELINE):
            raise ValueError(f"unknown mode {self.mode!r}")


class SensingPipeline:
    """The deterministic tick engine shared by live sessions and replay:
    push samples, extract at 1 Hz, classify, track, emit derived events."""

    def __init__(self, script: ScenarioScript, model: MlpModel, directives: DirectiveSet,
                 config: SessionConfig, record: SessionRecord):
        self.config = config
        self.directives = directives
        self.record = record
        self.merger = StreamMerger()
        self.handles = {
            "eeg": self.merger.open_stream(eeg_descriptor()),
            "eye": self.merger.open_stream(eye_descriptor()),
        }
        segments = script.segments()
        self.merger.labeler = lambda s, e: resolve_window_label(segments, s, e)
        self.processor = WindowProcessor(
            model, include_fixation_count=config.include_fixation_count
        )
        self.tracker = StateTracker(k=config.tracker_k)
        if config.mode == MODE_ADAPTIVE:
            self.emit_directive(0)

    def active_directive(self) -> AdaptationDirective:
        if self.config.mode == MODE_BASELINE:
            return self.directives.for_state(AttentionState.STABLE_ATTENTION)
        return self.directives.for_state(self.tracker.current)

    def emit_directive(self, ts_us: int) -> None:
        d = self.active_directive()
        self.record.append(
            "directive", ts_us,
            {
                "state": d.state.wire_name,
                "style": d.interaction_style,
                "structure": d.info_structure,
                "visual": d.visual_feedback.value,
                "strategy": d.engagement_strategy,
            },
        )

    def push(self, name: str, sample: TimestampedSample) -> None:
        self.handles[name].push(sample)
        if self.config.record_samples:
            self.record.append(
                "sample", sample.ts_us, {"stream": name, "values": list(sample.values)}
            )

    def run_tick(self, at_us: int) -> None:
        result = self.merger.extract_window(at_us)
        if isinstance(result, StreamStalled):
            self.tracker.mark_degraded()
            self.record.append(
                "quality", at_us,
                {"kind": "stalled", "stream": result.stream,
                 "newest_ts_us": result.newest_ts_us},
            )
            return
        if not isinstance(result, AlignedWindow):
            return  # NotReady: normal cold start
        processed = self.processor.process(result)
        self.record.append(
            "window", at_us,
            {
                "start_us": result.start_us,
                "end_us": result.end_us,
                "n_eeg": len(result.eeg),
                "n_eye": len(result.eye),
                "label": result.label.wire_name if result.label else None,
            },
        )
        if processed.missing:
            self.tracker.mark_degraded()
            self.record.append(
                "quality", at_us,
                {"kind": "missing_features", "reason": processed.features.reason},
            )
            return
        if processed.clean.low_quality:
            self.record.append(
                "quality", at_us,
                {"kind": "low_quality", "quality": processed.clean.quality},
            )
        fv = processed.features
        self.record.append(
            "features", at_us,
            {
                "vector": [float(v) for v in fv.to_array()],
                "fixation_count": int(fv.fixation_count),
                "fixation_mean_ms": fv.fixation_mean_ms,
                "quality": processed.clean.quality,
            },
        )
        c = processed.classification
        self.record.append(
            "classification", at_us,
            {
                "state": c.state.wire_name,
                "probs": list(c.probs),
                "latency_us": c.latency_us,
                "pipeline_us": processed.total_us,
            },
        )
        before = self.tracker.current
        emitted, changed = self.tracker.update(c)
        if changed:
            self.record.append(
                "state_change", at_us,
                {"from": before.wire_name, "to": emitted.wire_name},
            )
            if self.config.mode == MODE_ADAPTIVE:
                self.emit_directive(at_us)


def scenario_to_text(script: ScenarioScript) -> str:
    lines = [f"seed {script.seed}", f"jitter_ms {script.jitter_ms:g}"]
    lines += [f"block {b.state.wire_name} {b.duration_s:g}" for b in script.blocks]
    return "\n".join(lines) + "\n"


class SessionRuntime:
    """Deterministic session engine advanced in session time.

    Not thread-safe; the hosting layer holds one lock per session. Chat
    backends are called outside this class so a slow completion never
    blocks the sensing pipeline.
    """

    def __init__(self, session_id: str, script: ScenarioScript, model: MlpModel,
                 directives: Optional[DirectiveSet] = None,
                 config: Optional[SessionConfig] = None,
                 profiles: Optional[dict[AttentionState, StateSignalProfile]] = None,
                 backend_name: str = "stub"):
        self.config = config or SessionConfig()
        self.script = script
        self.profiles = profiles or default_profiles()
        self.record = SessionRecord(
            header={
                "kind": "header",
                "schema": SCHEMA_VERSION,
                "session_id": session_id,
                "mode": self.config.mode,
                "scenario": scenario_to_text(script),
                "backend": backend_name,
                "model_fingerprint": model_fingerprint(model),
                "kernel_backend": kernels.BACKEND,
                "tracker_k": self.config.tracker_k,
                "fixation_count_feature": self.config.include_fixation_count,
            }
        )
        self.pipeline = SensingPipeline(
            script, model, directives or DirectiveSet.load(), self.config, self.record
        )
        self.source = ScenarioSource(script, self.profiles)
        self.probes: list[ProbeEvent] = probe_schedule(script)
        self.turns: list[ChatTurn] = []
        self.session_us = 0
        self.total_us = int(script.total_duration_s * 1e6)
        self.ended = False
        self._next_tick_us = HOP_US
        self._next_probe_idx = 0

    @property
    def tracker(self) -> StateTracker:
        return self.pipeline.tracker

    def active_directive(self) -> AdaptationDirective:
        return self.pipeline.active_directive()

    def advance_to(self, target_us: int) -> None:
        """Run every 1 Hz extraction tick and probe emission up to target."""
        target_us = min(int(target_us), self.total_us)
        while True:
            next_probe = (
                self.probes[self._next_probe_idx].ts_us
                if self._next_probe_idx < len(self.probes)
                else None
            )
            candidates = []
            if self._next_tick_us <= target_us:
                candidates.append((self._next_tick_us, 1, "tick"))
            if next_probe is not None and next_probe <= target_us:
                candidates.append((next_probe, 0, "probe"))  # probe first on ties
            if not candidates:
                break
            _, _, what = min(candidates)
            if what == "probe":
                probe = self.probes[self._next_probe_idx]
                self.record.append("probe", probe.ts_us, {"deadline_us": probe.deadline_us})
                self._next_probe_idx += 1
            else:
                at_us = self._next_tick_us
                for name, sample in self.source.advance(at_us):
                    self.pipeline.push(name, sample)
                self.pipeline.run_tick(at_us)
                self._next_tick_us += HOP_US
        self.session_us = max(self.session_us, target_us)

    # -- interactive inputs -------------------------------------------------

    def begin_user_turn(self, text: str, ts_us: int) -> BackendRequest:
        if not text:
            raise ValueError("empty user message")
        state = self.tracker.current
        turn = ChatTurn(role="user", content=text, ts_us=ts_us, state_at_send=state)
        self.turns.append(turn)
        self.record.append(
            "chat", ts_us,
            {"role": "user", "content": text, "state_at_send": state.wire_name},
        )
        return compose_prompt(
            self.active_directive(), self.turns[:-1], text, self.config.history_limit
        )

    def finish_assistant_turn(self, content: Optional[str], ts_us: int,
                              failed: bool = False) -> None:
        state = self.tracker.current
        if failed:
            self.record.append(
                "chat", ts_us,
                {"role": "assistant", "content": "", "state_at_send": state.wire_name,
                 "failed": True},
            )
            return
        self.turns.append(
            ChatTurn(role="assistant", content=content, ts_us=ts_us, state_at_send=state)
        )
        self.record.append(
            "chat", ts_us,
            {"role": "assistant", "content": content, "state_at_send": state.wire_name},
        )

    def probe_response(self, probe_ts_us: int, rating: int, ts_us: int) -> dict:
        """Acknowledge a probe answer; late answers stay in the log but are
        marked expired and never attached to the probe itself."""
        if not 1 <= rating <= 5:
            raise ValueError("rating must be 1..5")
        probe = next((p for p in self.probes if p.ts_us == probe_ts_us), None)
        if probe is None:
            raise ValueError(f"unknown probe {probe_ts_us}")
        expired = ts_us > probe.deadline_us
        if not expired and probe.response is None:
            probe.response = rating
            probe.response_ts_us = ts_us
        elif expired:
            probe.expired = True
        self.record.append(
            "probe_response", ts_us,
            {"probe_ts_us": probe_ts_us, "rating": rating, "expired": expired},
        )
        return {"probe_ts_us": probe_ts_us, "accepted": not expired, "expired": expired}

    def steer(self, state: AttentionState, ts_us: int) -> None:
        """Operator override: pin the signal source to a state's profile."""
        self.source.set_override(self.profiles[state], ts_us)
        self.record.append("steer", ts_us, {"profile": state.wire_name})

    def note_pause(self, ts_us: int) -> None:
        self.record.append("pause", ts_us, {})

    def note_resume(self, ts_us: int) -> None:
        self.record.append("resume", ts_us, {})

    def end(self) -> None:
        if not self.ended:
            self.record.append("session_end", self.session_us, {})
            self.ended = True

    @property
    def done(self) -> bool:
        return self.session_us >= self.total_us


# -- metrics -------------------------------------------------------------------


@dataclass
class EngagementMetrics:
    time_on_task_s: float
    followup_prompt_count: int
    clarification_count: int
    fixation_count: int
    mean_fixation_ms: float

    def to_dict(self) -> dict:
        return {
            "time_on_task_s": self.time_on_task_s,
            "followup_prompt_count": self.followup_prompt_count,
            "clarification_count": self.clarification_count,
            "fixation_count": self.fixation_count,
            "mean_fixation_ms": self.mean_fixation_ms,
        }


def compute_metrics(record: SessionRecord) -> EngagementMetrics:
    """Recompute the behavioral metrics purely from the log, so the live
    endpoint and an archived session always agree.

    Follow-up prompts are user turns inside a task block after that block's
    first assistant reply; the ones containing a question mark count as
    clarification queries. Fixation counts aggregate the per-window values
    of the features events (windows overlap, and so do their counts).
    """
    script = parse_scenario(record.header["scenario"])
    blocks = [seg for seg in script.segments() if seg[2] is not None]
    end_us = max((ev.ts_us for ev in record.events), default=0)

    time_on_task_us = sum(max(0, min(end, end_us) - start) for start, end, _ in blocks)

    def block_index(ts_us: int) -> Optional[int]:
        for i, (start, end, _) in enumerate(blocks):
            if start <= ts_us < end:
                return i
        return None

    assistant_seen: dict[int, bool] = {}
    followups = 0
    clarifications = 0
    fixation_count = 0
    fixation_ms_weighted = 0.0
    for ev in record.events:
        if ev.kind == "chat":
            seg = block_index(ev.ts_us)
            if seg is None:
                continue
            if ev.data["role"] == "assistant" and not ev.data.get("failed"):
                assistant_seen[seg] = True
            elif ev.data["role"] == "user" and assistant_seen.get(seg):
                followups += 1
                if "?" in ev.data["content"]:
                    clarifications += 1
        elif ev.kind == "features":
            n = int(ev.data.get("fixation_count", 0))
            fixation_count += n
            fixation_ms_weighted += n * float(ev.data.get("fixation_mean_ms", 0.0))

    return EngagementMetrics(
        time_on_task_s=time_on_task_us / 1e6,
        followup_prompt_count=followups,
        clarification_count=clarifications,
        fixation_count=fixation_count,
        mean_fixation_ms=(fixation_ms_weighted / fixation_count) if fixation_count else 0.0,
    )


# -- archive persist / replay ----------------------------------------------------


def archive_lines(record: SessionRecord):
    yield json.dumps(record.header)
    for ev in record.events:
        yield json.dumps({"seq": ev.seq, "ts_us": ev.ts_us, "kind": ev.kind, "data": ev.data})


def persist_session(record: SessionRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in archive_lines(record):
            fh.write(line + "\n")


def load_archive(path) -> tuple[dict, list[SessionEvent]]:
    """Parse an archive; integrity problems name the offending line."""
    header: Optional[dict] = None
    events: list[SessionEvent] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                raise ArchiveIntegrityError(line_no, "not valid JSON") from None
            if line_no == 1:
                if obj.get("kind") != "header":
                    raise ArchiveIntegrityError(line_no, "first line must be the header")
                if obj.get("schema") != SCHEMA_VERSION:
                    raise ArchiveIntegrityError(line_no, f"unsupported schema {obj.get('schema')}")
                header = obj
                continue
            try:
                events.append(
                    SessionEvent(seq=int(obj["seq"]), ts_us=int(obj["ts_us"]),
                                 kind=str(obj["kind"]), data=obj["data"])
                )
            except (KeyError, TypeError, ValueError):
                raise ArchiveIntegrityError(line_no, "malformed event line") from None
    if header is None:
        raise ArchiveIntegrityError(1, "archive is empty")
    for i, ev in enumerate(events):
        if ev.seq != i:
            raise ArchiveIntegrityError(i + 2, f"seq gap: expected {i}, found {ev.seq}")
    return header, events


def record_from_archive(header: dict, events: list[SessionEvent]) -> SessionRecord:
    """Rehydrate a record (for metrics recomputation on archived sessions)."""
    record = SessionRecord(header=header)
    record.events = list(events)
    return record


def _strip_timing(kind: str, data: dict) -> dict:
    if kind == "classification":
        return {k: v for k, v in data.items() if k not in ("latency_us", "pipeline_us")}
    return data


@dataclass
class ReplayResult:
    match: bool
    compared: int
    first_divergence: Optional[dict] = None
    record: Optional[SessionRecord] = None


def replay_archive(header: dict, events: list[SessionEvent], model: MlpModel,
                   directives: Optional[DirectiveSet] = None) -> ReplayResult:
    """Push the archived raw samples through a fresh pipeline and compare
    every derived event against the archive. Timing fields are measurement
    metadata and excluded from the comparison."""
    script = parse_scenario(header["scenario"])
    config = SessionConfig(
        mode=header["mode"],
        tracker_k=header.get("tracker_k", 2),
        include_fixation_count=header.get("fixation_count_feature", False),
    )
    record = SessionRecord(header=dict(header))
    pipeline = SensingPipeline(script, model, directives or DirectiveSet.load(), config, record)

    end_ts = next((ev.ts_us for ev in events if ev.kind == "session_end"), None)
    if end_ts is None:
        end_ts = max((ev.ts_us for ev in events), default=0)
    final_tick = (end_ts // HOP_US) * HOP_US

    next_tick = HOP_US
    for ev in events:
        if ev.kind != "sample":
            continue
        while next_tick <= final_tick and ev.ts_us >= next_tick:
            pipeline.run_tick(next_tick)
            next_tick += HOP_US
        pipeline.push(ev.data["stream"], TimestampedSample(ev.ts_us, tuple(ev.data["values"])))
    while next_tick <= final_tick:
        pipeline.run_tick(next_tick)
        next_tick += HOP_US

    archived = [ev for ev in events if ev.kind in DERIVED_KINDS]
    replayed = [ev for ev in record.events if ev.kind in DERIVED_KINDS]
    compared = 0
    for i in range(max(len(archived), len(replayed))):
        a = archived[i] if i < len(archived) else None
        b = replayed[i] if i < len(replayed) else None
        if (
            a is None or b is None
            or a.kind != b.kind or a.ts_us != b.ts_us
            or _strip_timing(a.kind, a.data) != _strip_timing(b.kind, b.data)
        ):
            return ReplayResult(
                match=False,
                compared=compared,
                first_divergence={
                    "index": i,
                    "archived": None if a is None else
                    {"ts_us": a.ts_us, "kind": a.kind, "data": a.data},
                    "replayed": None if b is None else
                    {"ts_us": b.ts_us, "kind": b.kind, "data": b.data},
                },
                record=record,
            )
        compared += 1
    return ReplayResult(match=True, compared=compared, record=record)
