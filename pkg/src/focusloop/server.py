"""HTTP + websocket boundary over the session runtime.

Endpoints: POST /sessions, GET /sessions/{id}, GET /sessions/{id}/metrics,
GET /sessions/{id}/archive, POST /sessions/{id}/stop, GET /healthz and the
feed at WS /sessions/{id}/feed (append ?from_seq=N to resume after a drop;
every message carries its seq).

Each session owns a driver thread mapping wall time to session time with
the configured acceleration; all runtime access is serialized by one lock
per session. Slow feed consumers get a bounded backlog: oldest non-chat
messages are dropped first and the drop is announced in-band.
"""

from __future__ import annotations

import threading
import time
import uuid
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from .adapt import DirectiveSet, EchoBackend, HttpChatBackend
from .errors import BackendUnavailable, ScenarioParseError, TemplateError
from .mlp import MlpModel
from .service import (
    SessionConfig,
    SessionEvent,
    SessionRuntime,
    archive_lines,
    compute_metrics,
)
from .simulate import default_script, parse_scenario
from .states import AttentionState

SCHEMA = 1
FEED_QUEUE_LIMIT = 512
DRIVER_POLL_S = 0.02


def event_to_message(ev: SessionEvent) -> Optional[dict]:
    """Map an internal event to its wire form; None for non-feed events."""
    d = ev.data
    if ev.kind == "classification":
        return {
            "type": "state_update",
            "seq": ev.seq,
            "state": d["state"],
            "probs": d["probs"],
            "window_end_us": ev.ts_us,
        }
    if ev.kind == "directive":
        return {
            "type": "directive",
            "seq": ev.seq,
            "state": d["state"],
            "visual": d["visual"],
            "style": d["style"],
            "structure": d["structure"],
            "strategy": d["strategy"],
            "ts_us": ev.ts_us,
        }
    if ev.kind == "chat":
        return {
            "type": "chat",
            "seq": ev.seq,
            "role": d["role"],
            "content": d["content"],
            "state": d["state_at_send"],
            "failed": bool(d.get("failed", False)),
            "ts_us": ev.ts_us,
        }
    if ev.kind == "probe":
        return {"type": "probe", "seq": ev.seq, "ts_us": ev.ts_us,
                "deadline_us": d["deadline_us"]}
    if ev.kind == "probe_response":
        return {"type": "probe_ack", "seq": ev.seq, "probe_ts_us": d["probe_ts_us"],
                "rating": d["rating"], "expired": d["expired"]}
    if ev.kind == "quality":
        return {"type": "quality", "seq": ev.seq, "ts_us": ev.ts_us, **d}
    if ev.kind == "features":
        return {
            "type": "features",
            "seq": ev.seq,
            "ts_us": ev.ts_us,
            "vector": d["vector"],
            "quality": d["quality"],
        }
    return None


def prune_backlog(messages: list[dict], limit: int = FEED_QUEUE_LIMIT) -> tuple[list[dict], int]:
    """Bound a feed backlog: chat messages are never dropped, everything
    else goes oldest-first."""
    if len(messages) <= limit:
        return messages, 0
    overflow = len(messages) - limit
    kept: list[dict] = []
    dropped = 0
    for msg in messages:
        if dropped < overflow and msg.get("type") != "chat":
            dropped += 1
            continue
        kept.append(msg)
    return kept, dropped


class SessionHost:
    """One live session: runtime + wall-clock driver thread + chat backend."""

    def __init__(self, runtime: SessionRuntime, backend, accel: float = 1.0):
        if accel <= 0:
            raise ValueError("accel must be positive")
        self.runtime = runtime
        self.backend = backend
        self.accel = accel
        self.lock = threading.RLock()
        self._t0 = time.monotonic()
        self._paused = False
        self._paused_at = 0.0
        self._paused_total = 0.0
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._drive, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def session_now_us(self) -> int:
        if self._paused:
            elapsed = self._paused_at - self._t0 - self._paused_total
        else:
            elapsed = time.monotonic() - self._t0 - self._paused_total
        return int(elapsed * self.accel * 1e6)

    def _drive(self) -> None:
        while not self._stop.is_set():
            if not self._paused:
                with self.lock:
                    self.runtime.advance_to(self.session_now_us())
                    if self.runtime.done:
                        self.runtime.end()
                        break
            time.sleep(DRIVER_POLL_S)

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=10)
        with self.lock:
            self.runtime.end()

    @property
    def stopped(self) -> bool:
        return self.runtime.ended

    def _sync_now(self) -> int:
        """Catch the pipeline up to the live clock and return the processed
        session time; client-originated events are stamped with this so the
        log stays a total order even when the driver poll is mid-stride."""
        self.runtime.advance_to(self.session_now_us())
        return self.runtime.session_us

    def pause(self) -> None:
        with self.lock:
            if not self._paused:
                self._paused_at = time.monotonic()
                self._paused = True
                self.runtime.note_pause(self._sync_now())

    def resume(self) -> None:
        with self.lock:
            if self._paused:
                self._paused_total += time.monotonic() - self._paused_at
                self._paused = False
                self.runtime.note_resume(self._sync_now())

    def user_chat(self, text: str) -> dict:
        with self.lock:
            request = self.runtime.begin_user_turn(text, self._sync_now())
        try:
            reply = self.backend.complete(request)
        except BackendUnavailable as exc:
            with self.lock:
                self.runtime.finish_assistant_turn(None, self._sync_now(), failed=True)
            return {"ok": False, "error": str(exc)}
        with self.lock:
            self.runtime.finish_assistant_turn(reply, self._sync_now())
        return {"ok": True, "reply": reply}

    def probe_response(self, probe_ts_us: int, rating: int) -> dict:
        with self.lock:
            return self.runtime.probe_response(probe_ts_us, rating, self._sync_now())

    def steer(self, profile: str) -> None:
        state = AttentionState.from_wire(profile)
        with self.lock:
            self.runtime.steer(state, self._sync_now())

    def events_since(self, seq: int) -> list[SessionEvent]:
        with self.lock:
            return list(self.runtime.record.events_since(seq))

    def status(self) -> dict:
        with self.lock:
            return {
                "session_id": self.runtime.record.header["session_id"],
                "mode": self.runtime.config.mode,
                "session_us": self.runtime.session_us,
                "total_us": self.runtime.total_us,
                "paused": self._paused,
                "done": self.runtime.done,
                "stopped": self.stopped,
                "state": self.runtime.tracker.current.wire_name,
            }


class ServiceState:
    """Process-wide state shared by the endpoints."""

    def __init__(self, model: MlpModel, directives: Optional[DirectiveSet] = None,
                 backend_config: Optional[dict] = None):
        self.model = model
        self.directives = directives or DirectiveSet.load()
        self.backend_config = backend_config or {}
        self.sessions: dict[str, SessionHost] = {}

    def make_backend(self, name: str):
        if name == "stub":
            return EchoBackend()
        if name == "http":
            endpoint = self.backend_config.get("endpoint")
            if not endpoint:
                raise BackendUnavailable("http backend selected but no endpoint configured")
            return HttpChatBackend(
                endpoint=endpoint,
                model=self.backend_config.get("model", "default"),
                timeout_s=float(self.backend_config.get("timeout_s", 30.0)),
                retries=int(self.backend_config.get("retries", 1)),
            )
        raise ValueError(f"unknown backend {name!r}")

    def shutdown(self) -> None:
        for host in self.sessions.values():
            host.stop()


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="focusloop", version="0.1.0")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "sessions": len(state.sessions)}

    @app.post("/sessions", status_code=201)
    def start_session(body: dict):
        mode = body.get("mode", "Adaptive")
        accel = float(body.get("accel", 1.0))
        backend_name = body.get("backend", "stub")
        try:
            if body.get("scenario"):
                script = parse_scenario(body["scenario"])
            else:
                script = default_script(seed=int(body.get("seed", 7)))
            backend = state.make_backend(backend_name)
            backend.healthcheck()
            config = SessionConfig(
                mode=mode,
                record_samples=bool(body.get("record_samples", True)),
            )
        except ScenarioParseError as exc:
            raise HTTPException(status_code=422, detail=f"scenario: {exc}")
        except (BackendUnavailable, TemplateError) as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session_id = uuid.uuid4().hex[:12]
        runtime = SessionRuntime(
            session_id, script, state.model,
            directives=state.directives, config=config, backend_name=backend_name,
        )
        host = SessionHost(runtime, backend, accel=accel)
        state.sessions[session_id] = host
        host.start()
        return {"session_id": session_id, "mode": mode,
                "total_s": script.total_duration_s, "accel": accel}

    def _host(session_id: str) -> SessionHost:
        host = state.sessions.get(session_id)
        if host is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return host

    @app.get("/sessions/{session_id}")
    def session_status(session_id: str):
        return _host(session_id).status()

    @app.get("/sessions/{session_id}/metrics")
    def session_metrics(session_id: str):
        host = _host(session_id)
        with host.lock:
            return compute_metrics(host.runtime.record).to_dict()

    @app.get("/sessions/{session_id}/archive")
    def session_archive(session_id: str):
        host = _host(session_id)
        with host.lock:
            text = "\n".join(archive_lines(host.runtime.record)) + "\n"
        return PlainTextResponse(text, media_type="application/x-ndjson")

    @app.post("/sessions/{session_id}/stop")
    def session_stop(session_id: str):
        host = _host(session_id)
        host.stop()
        return host.status()

    @app.websocket("/sessions/{session_id}/feed")
    async def session_feed(ws: WebSocket, session_id: str):
        import asyncio
        import json as _json

        from starlette.concurrency import run_in_threadpool

        host = state.sessions.get(session_id)
        if host is None:
            await ws.close(code=4404)
            return
        await ws.accept()
        cursor = int(ws.query_params.get("from_seq", 0))
        await ws.send_text(_json.dumps({
            "type": "hello", "schema": SCHEMA, "seq": cursor,
            **host.status(),
        }))

        async def pump_events():
            nonlocal cursor
            while True:
                events = host.events_since(cursor)
                if events:
                    cursor = events[-1].seq + 1
                    msgs = [m for m in (event_to_message(ev) for ev in events) if m]
                    msgs, dropped = prune_backlog(msgs)
                    if dropped:
                        await ws.send_text(_json.dumps({"type": "dropped", "count": dropped}))
                    for msg in msgs:
                        await ws.send_text(_json.dumps(msg))
                if host.stopped and not host.events_since(cursor):
                    await ws.send_text(_json.dumps({"type": "bye", "seq": cursor}))
                    break
                await asyncio.sleep(DRIVER_POLL_S)

        pump = asyncio.create_task(pump_events())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = _json.loads(raw)
                except ValueError:
                    await ws.send_text(_json.dumps({"type": "error", "error": "bad json"}))
                    continue
                mtype = msg.get("type")
                try:
                    if mtype == "user_msg":
                        result = await run_in_threadpool(host.user_chat, msg.get("content", ""))
                        if not result.get("ok"):
                            await ws.send_text(_json.dumps(
                                {"type": "error", "error": result.get("error", "backend failed")}
                            ))
                    elif mtype == "probe_response":
                        await run_in_threadpool(
                            host.probe_response,
                            int(msg["probe_ts_us"]), int(msg["rating"]),
                        )
                    elif mtype == "steer":
                        host.steer(msg["profile"])
                    elif mtype == "pause":
                        host.pause()
                    elif mtype == "resume":
                        host.resume()
                    else:
                        await ws.send_text(_json.dumps(
                            {"type": "error", "error": f"unknown type {mtype!r}"}
                        ))
                except (ValueError, KeyError) as exc:
                    await ws.send_text(_json.dumps({"type": "error", "error": str(exc)}))
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()

    return app
