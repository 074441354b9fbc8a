"""State-to-directive mapping, hysteresis tracking and prompt composition.

Raw 1 Hz classifications flap; the tracker only commits a state change
after k identical consecutive classifications (default 2, i.e. at most 2 s
of switching lag). Each committed state selects one AdaptationDirective
loaded from an editable INI template file, whose system prompt steers the
pluggable chat backend.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Optional

import configparser

import requests

from .errors import BackendUnavailable, TemplateError
from .mlp import Classification
from .states import ALL_STATES, AttentionState

HISTORY_LIMIT = 20  # conversation turns forwarded to the backend
DEFAULT_TRACKER_K = 2


class VisualFeedback(Enum):
    FOCUS_MODE = "FocusMode"
    DEFAULT = "Default"
    HIGHLIGHT_CUES = "HighlightCues"
    SOFTENED_UI = "SoftenedUI"
    ANIMATED_CUES = "AnimatedCues"


@dataclass(frozen=True)
class AdaptationDirective:
    state: AttentionState
    interaction_style: str
    info_structure: str
    visual_feedback: VisualFeedback
    engagement_strategy: str
    system_prompt: str


class DirectiveSet:
    """The total state -> directive mapping, validated at load time.

    A missing or malformed section is a TemplateError immediately, never a
    runtime surprise.
    """

    REQUIRED_FIELDS = ("style", "structure", "visual", "strategy", "system_prompt")

    def __init__(self, directives: dict[AttentionState, AdaptationDirective]):
        missing = [s.wire_name for s in ALL_STATES if s not in directives]
        if missing:
            raise TemplateError(f"template file lacks sections for: {', '.join(missing)}")
        self._directives = dict(directives)

    def for_state(self, state: AttentionState) -> AdaptationDirective:
        return self._directives[state]

    @classmethod
    def parse(cls, text: str) -> "DirectiveSet":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise TemplateError(f"template file is not valid INI: {exc}") from None
        directives = {}
        for state in ALL_STATES:
            section = state.wire_name
            if not parser.has_section(section):
                continue
            sec = parser[section]
            for fieldname in cls.REQUIRED_FIELDS:
                if fieldname not in sec:
                    raise TemplateError(f"[{section}] is missing field {fieldname!r}")
            try:
                visual = VisualFeedback(sec["visual"].strip())
            except ValueError:
                raise TemplateError(
                    f"[{section}] has unknown visual feedback {sec['visual']!r}"
                ) from None
            directives[state] = AdaptationDirective(
                state=state,
                interaction_style=sec["style"].strip(),
                info_structure=sec["structure"].strip(),
                visual_feedback=visual,
                engagement_strategy=sec["strategy"].strip(),
                system_prompt=sec["system_prompt"].strip(),
            )
        return cls(directives)

    @classmethod
    def load(cls, path=None) -> "DirectiveSet":
        """Load from a template file; default is the packaged one."""
        if path is None:
            text = resources.files("focusloop").joinpath("data/directives.ini").read_text("utf-8")
        else:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        return cls.parse(text)


def directive_for(state: AttentionState, directives: Optional[DirectiveSet] = None) -> AdaptationDirective:
    """Convenience lookup against the packaged defaults."""
    return (directives or _default_set()).for_state(state)


_DEFAULT_SET: Optional[DirectiveSet] = None


def _default_set() -> DirectiveSet:
    global _DEFAULT_SET
    if _DEFAULT_SET is None:
        _DEFAULT_SET = DirectiveSet.load()
    return _DEFAULT_SET


class StateTracker:
    """Hysteresis over the classification stream.

    The emitted state changes only after ``k`` identical consecutive
    classifications that differ from the current state; degraded windows
    (stalled stream, missing features) freeze the tracker entirely and
    flag reduced confidence instead of moving it.
    """

    def __init__(self, k: int = DEFAULT_TRACKER_K,
                 initial: AttentionState = AttentionState.STABLE_ATTENTION,
                 history_size: int = 10):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.current = initial
        self.candidate: Optional[AttentionState] = None
        self.streak = 0
        self.confidence_degraded = False
        self.history: deque[Classification] = deque(maxlen=history_size)

    def update(self, c: Classification) -> tuple[AttentionState, bool]:
        """Feed one classification; returns (emitted_state, changed)."""
        self.history.append(c)
        self.confidence_degraded = False
        if c.state == self.current:
            self.candidate = None
            self.streak = 0
            return self.current, False
        if c.state == self.candidate:
            self.streak += 1
        else:
            self.candidate = c.state
            self.streak = 1
        if self.streak >= self.k:
            self.current = c.state
            self.candidate = None
            self.streak = 0
            return self.current, True
        return self.current, False

    def mark_degraded(self) -> AttentionState:
        """Hold the last state through a degraded window (no streak update)."""
        self.confidence_degraded = True
        return self.current


@dataclass(frozen=True)
class ChatTurn:
    role: str  # "user" | "assistant" | "system"
    content: str
    ts_us: int
    state_at_send: AttentionState

    def __post_init__(self):
        if self.role not in ("user", "assistant", "system"):
            raise ValueError(f"bad role {self.role!r}")
        if self.role in ("user", "assistant") and not self.content:
            raise ValueError("user/assistant turns need content")


@dataclass(frozen=True)
class BackendRequest:
    system_prompt: str
    messages: tuple[tuple[str, str], ...]  # (role, content), oldest first
    directive_state: AttentionState


def compose_prompt(directive: AdaptationDirective, conversation: list[ChatTurn],
                   user_msg: str, history_limit: int = HISTORY_LIMIT) -> BackendRequest:
    """Directive prompt + bounded history + the new message."""
    if not user_msg:
        raise ValueError("empty user message")
    recent = [t for t in conversation if t.role in ("user", "assistant")][-history_limit:]
    messages = tuple((t.role, t.content) for t in recent) + (("user", user_msg),)
    return BackendRequest(
        system_prompt=directive.system_prompt,
        messages=messages,
        directive_state=directive.state,
    )


class EchoBackend:
    """Deterministic stub for tests and offline runs: reflects the active
    directive id and the user message."""

    name = "stub"

    def complete(self, request: BackendRequest) -> str:
        marker = request.directive_state.name.lower()
        last_user = next((c for r, c in reversed(request.messages) if r == "user"), "")
        return f"[{marker}] {last_user}"

    def healthcheck(self) -> None:
        pass


class HttpChatBackend:
    """Chat-completions client over HTTP: configurable endpoint, 30 s
    timeout, one retry, then BackendUnavailable (the session survives)."""

    name = "http"

    def __init__(self, endpoint: str, model: str = "default",
                 timeout_s: float = 30.0, retries: int = 1):
        self.endpoint = endpoint
        self.model = model
        self.timeout_s = timeout_s
        self.retries = retries

    def complete(self, request: BackendRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "system", "content": request.system_prompt}]
            + [{"role": r, "content": c} for r, c in request.messages],
        }
        last_err: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = requests.post(self.endpoint, json=payload, timeout=self.timeout_s)
                resp.raise_for_status()
                doc = resp.json()
                return doc["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError,
                    TypeError, json.JSONDecodeError) as exc:
                last_err = exc
        raise BackendUnavailable(f"chat backend failed after retry: {last_err}")

    def healthcheck(self) -> None:
        """Reachability probe at session start; any HTTP status counts as
        reachable, connection-level failures do not."""
        try:
            requests.get(self.endpoint, timeout=5)
        except requests.RequestException as exc:
            raise BackendUnavailable(f"chat backend unreachable: {exc}") from None
