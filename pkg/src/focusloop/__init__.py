"""focusloop: closed-loop attention-adaptive chat.

Simulated EEG (250 Hz) and eye-tracking (60 Hz) streams are merged on a
shared microsecond clock, cut into overlapping 5 s windows every second,
reduced to a 9-dimensional feature vector, classified into one of five
attention states by a small MLP, and mapped to adaptation directives that
steer a pluggable chat backend and the dashboard UI.
"""

from .states import AttentionState

__version__ = "0.1.0"

__all__ = ["AttentionState", "__version__"]
