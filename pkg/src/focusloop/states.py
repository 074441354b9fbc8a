"""The five attention states and their stable file encoding."""

from __future__ import annotations

from enum import Enum


class AttentionState(Enum):
    """Attention categories emitted by the classifier.

    Integer values are the on-disk encoding (dataset label column, model
    files, archives) and must never be reordered.
    """

    HIGH_ATTENTION = 0
    STABLE_ATTENTION = 1
    DROPPING_ATTENTION = 2
    COGNITIVE_OVERLOAD = 3
    DISTRACTION = 4

    @property
    def wire_name(self) -> str:
        """CamelCase name used in wire messages and scenario files."""
        return _WIRE_NAMES[self]

    @classmethod
    def from_wire(cls, name: str) -> "AttentionState":
        try:
            return _FROM_WIRE[name]
        except KeyError:
            raise ValueError(f"unknown attention state {name!r}") from None

    @classmethod
    def from_index(cls, idx: int) -> "AttentionState":
        return cls(int(idx))


_WIRE_NAMES = {
    AttentionState.HIGH_ATTENTION: "HighAttention",
    AttentionState.STABLE_ATTENTION: "StableAttention",
    AttentionState.DROPPING_ATTENTION: "DroppingAttention",
    AttentionState.COGNITIVE_OVERLOAD: "CognitiveOverload",
    AttentionState.DISTRACTION: "Distraction",
}
_FROM_WIRE = {v: k for k, v in _WIRE_NAMES.items()}

ALL_STATES = tuple(AttentionState)
N_STATES = len(ALL_STATES)
