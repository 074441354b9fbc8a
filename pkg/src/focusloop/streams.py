"""Timestamped multi-rate stream transport and aligned sliding windows.

All samples live on one session-monotonic microsecond clock and are stamped
at the source; delivery order across streams is irrelevant because windows
are cut by timestamp, not arrival. Per-stream timestamps must be strictly
increasing (late duplicates are dropped and counted). A 5 s ring buffer per
stream backs the 1 Hz extraction of overlapping [at-5s, at) windows.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from .errors import DescriptorMismatch, DuplicateStream
from .states import AttentionState

WINDOW_US = 5_000_000
HOP_US = 1_000_000
EEG_RATE = 250.0
EYE_RATE = 60.0

# eye channel layout, fixed across the whole pipeline
EYE_CHANNELS = (
    "gaze_x_norm",
    "gaze_y_norm",
    "pupil_left_mm",
    "pupil_right_mm",
    "validity_flag",
    "blink_flag",
)


class StreamKind(Enum):
    EEG = "EEG"
    EYE = "EYE"
    MARKER = "MARKER"
    PROBE = "PROBE"


@dataclass(frozen=True)
class StreamDescriptor:
    name: str
    kind: StreamKind
    nominal_rate: float  # samples/s; 0 sentinel for irregular MARKER/PROBE
    channel_count: int
    channel_labels: tuple[str, ...]

    def __post_init__(self):
        if self.kind in (StreamKind.EEG, StreamKind.EYE):
            if self.nominal_rate <= 0:
                raise DescriptorMismatch(f"{self.name}: {self.kind.value} streams need a positive rate")
        elif self.nominal_rate != 0:
            raise DescriptorMismatch(f"{self.name}: irregular streams use rate 0")
        if self.channel_count <= 0:
            raise DescriptorMismatch(f"{self.name}: channel_count must be positive")
        if len(self.channel_labels) != self.channel_count:
            raise DescriptorMismatch(
                f"{self.name}: {len(self.channel_labels)} labels for {self.channel_count} channels"
            )

    @property
    def period_us(self) -> int:
        return 0 if self.nominal_rate == 0 else int(round(1_000_000 / self.nominal_rate))


def eeg_descriptor(name: str = "eeg") -> StreamDescriptor:
    return StreamDescriptor(name, StreamKind.EEG, EEG_RATE, 1, ("eeg_uv",))


def eye_descriptor(name: str = "eye") -> StreamDescriptor:
    return StreamDescriptor(name, StreamKind.EYE, EYE_RATE, len(EYE_CHANNELS), EYE_CHANNELS)


def probe_descriptor(name: str = "probe") -> StreamDescriptor:
    return StreamDescriptor(name, StreamKind.PROBE, 0, 1, ("rating",))


@dataclass(frozen=True)
class TimestampedSample:
    ts_us: int
    values: tuple[float, ...]


class RingBuffer:
    """Bounded FIFO keeping the trailing ``capacity_us`` of one stream.

    Appending past capacity evicts oldest-first, so the span newest-oldest
    never exceeds capacity. Callers must extract a window before pushing
    more than capacity past its start or the head samples are gone.
    """

    def __init__(self, stream: StreamDescriptor, capacity_us: int = WINDOW_US):
        self.stream = stream
        self.capacity_us = capacity_us
        self._buf: deque[TimestampedSample] = deque()

    def __len__(self) -> int:
        return len(self._buf)

    @property
    def oldest(self) -> Optional[TimestampedSample]:
        return self._buf[0] if self._buf else None

    @property
    def newest(self) -> Optional[TimestampedSample]:
        return self._buf[-1] if self._buf else None

    def append(self, sample: TimestampedSample) -> None:
        self._buf.append(sample)
        while self._buf[-1].ts_us - self._buf[0].ts_us > self.capacity_us:
            self._buf.popleft()

    def slice(self, start_us: int, end_us: int) -> list[TimestampedSample]:
        return [s for s in self._buf if start_us <= s.ts_us < end_us]


class StreamHandle:
    """Push endpoint for one registered stream."""

    def __init__(self, buffer: RingBuffer):
        self.buffer = buffer
        self.dropped_out_of_order = 0
        self._last_ts: Optional[int] = None

    @property
    def descriptor(self) -> StreamDescriptor:
        return self.buffer.stream

    def push(self, sample: TimestampedSample) -> bool:
        """Buffer one sample; returns False (and counts) on stale timestamps."""
        if len(sample.values) != self.descriptor.channel_count:
            raise DescriptorMismatch(
                f"{self.descriptor.name}: sample has {len(sample.values)} values"
            )
        if self._last_ts is not None and sample.ts_us <= self._last_ts:
            self.dropped_out_of_order += 1
            return False
        self._last_ts = sample.ts_us
        self.buffer.append(sample)
        return True


@dataclass(frozen=True)
class NotReady:
    """Cold-start result: buffers do not span a full window yet."""

    reason: str


@dataclass(frozen=True)
class StreamStalled:
    """Degraded-mode signal: a stream stopped delivering for over a second."""

    stream: str
    newest_ts_us: int


@dataclass
class AlignedWindow:
    """One 5 s cut of both modalities, co-registered by timestamp."""

    start_us: int
    end_us: int
    eeg: list[TimestampedSample]
    eye: list[TimestampedSample]
    label: Optional[AttentionState] = None
    probe_responses: list[tuple[int, int]] = field(default_factory=list)

    def eeg_values(self) -> np.ndarray:
        return np.array([s.values[0] for s in self.eeg], dtype=np.float64)

    def eeg_ts(self) -> np.ndarray:
        return np.array([s.ts_us for s in self.eeg], dtype=np.int64)

    def eye_values(self) -> np.ndarray:
        return np.array([s.values for s in self.eye], dtype=np.float64)

    def eye_ts(self) -> np.ndarray:
        return np.array([s.ts_us for s in self.eye], dtype=np.int64)


# (segment_start_us, segment_end_us, label) with half-open segments
LabelIntervals = list[tuple[int, int, Optional[AttentionState]]]


def resolve_window_label(
    intervals: LabelIntervals, start_us: int, end_us: int
) -> Optional[AttentionState]:
    """Label covering at least half the window; exact ties go to the later
    segment. Returns None when no segment reaches half coverage (e.g. rest
    gaps, which carry a None label and can win the majority themselves)."""
    best_cov = 0
    best_label: Optional[AttentionState] = None
    for seg_start, seg_end, label in intervals:
        cov = min(seg_end, end_us) - max(seg_start, start_us)
        if cov >= best_cov and cov > 0:  # >= keeps the later segment on ties
            best_cov = cov
            best_label = label
    if 2 * best_cov >= (end_us - start_us):
        return best_label
    return None


class StreamMerger:
    """Owns the per-stream buffers and cuts aligned windows.

    Not thread-safe: the session runtime is the single windowing context
    and serializes pushes/extractions (sources deliver via its inbox).
    """

    def __init__(self):
        self._handles: dict[str, StreamHandle] = {}
        self._probe_buf: deque[TimestampedSample] = deque()
        self.labeler: Optional[Callable[[int, int], Optional[AttentionState]]] = None

    def open_stream(self, desc: StreamDescriptor) -> StreamHandle:
        if desc.name in self._handles:
            raise DuplicateStream(desc.name)
        handle = StreamHandle(RingBuffer(desc))
        self._handles[desc.name] = handle
        return handle

    def handle(self, name: str) -> StreamHandle:
        return self._handles[name]

    def push_probe_response(self, ts_us: int, rating: int) -> None:
        self._probe_buf.append(TimestampedSample(ts_us, (float(rating),)))
        while self._probe_buf and ts_us - self._probe_buf[0].ts_us > WINDOW_US:
            self._probe_buf.popleft()

    def _required(self) -> tuple[StreamHandle, StreamHandle]:
        eeg = [h for h in self._handles.values() if h.descriptor.kind is StreamKind.EEG]
        eye = [h for h in self._handles.values() if h.descriptor.kind is StreamKind.EYE]
        if len(eeg) != 1 or len(eye) != 1:
            raise DescriptorMismatch("window extraction needs exactly one EEG and one EYE stream")
        return eeg[0], eye[0]

    def extract_window(self, at_us: int):
        """Window covering [at_us - 5 s, at_us), or NotReady / StreamStalled.

        Cold start (buffers not spanning 5 s yet) is a normal NotReady, not
        an error; a stream whose newest sample is more than 1 s stale gets
        flagged StreamStalled so the consumer can degrade.
        """
        eeg_h, eye_h = self._required()
        start_us = at_us - WINDOW_US
        for h in (eeg_h, eye_h):
            if h.buffer.newest is None:
                return NotReady(f"{h.descriptor.name}: no data")
        for h in (eeg_h, eye_h):
            newest = h.buffer.newest.ts_us
            if newest < at_us - HOP_US - h.descriptor.period_us:
                return StreamStalled(h.descriptor.name, newest)
        for h in (eeg_h, eye_h):
            if h.buffer.oldest.ts_us > start_us:
                return NotReady(f"{h.descriptor.name}: buffer spans less than the window")
        label = self.labeler(start_us, at_us) if self.labeler else None
        probes = [
            (s.ts_us, int(s.values[0]))
            for s in self._probe_buf
            if start_us <= s.ts_us < at_us
        ]
        return AlignedWindow(
            start_us=start_us,
            end_us=at_us,
            eeg=eeg_h.buffer.slice(start_us, at_us),
            eye=eye_h.buffer.slice(start_us, at_us),
            label=label,
            probe_responses=probes,
        )


def write_ndjson(path, samples: Iterable[tuple[str, TimestampedSample]]) -> int:
    """Record samples as one {"stream", "ts_us", "values"} object per line.

    json round-trips floats exactly, so record -> replay is bit-exact.
    """
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for name, sample in samples:
            fh.write(
                json.dumps(
                    {"stream": name, "ts_us": sample.ts_us, "values": list(sample.values)}
                )
                + "\n"
            )
            n += 1
    return n


def read_ndjson(path) -> Iterator[tuple[str, TimestampedSample]]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            yield obj["stream"], TimestampedSample(int(obj["ts_us"]), tuple(obj["values"]))
