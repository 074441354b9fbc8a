"""Per-window EEG conditioning and eye-sample validity screening.

The EEG path is: blink-artifact interpolation (events come from the
synchronized eye stream), per-window mean subtraction standing in for the
0.25 Hz high-pass (a true FIR at that corner needs multi-second group
delay), then a 101-tap windowed-sinc low-pass at 48 Hz. The eye path drops
invalid/blink/non-finite samples and reports the retained fraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from . import kernels
from .errors import WindowUnderfull
from .streams import AlignedWindow, EYE_RATE, TimestampedSample

LOWPASS_CUTOFF_HZ = 48.0
LOWPASS_NUM_TAPS = 101
MIN_WINDOW_SAMPLES = 1248
BLINK_PRE_US = 50_000
BLINK_POST_US = 300_000


def design_lowpass(cutoff_hz: float = LOWPASS_CUTOFF_HZ, rate: float = 250.0,
                   num_taps: int = LOWPASS_NUM_TAPS) -> np.ndarray:
    """Hamming-windowed sinc taps, unity DC gain.

    The windowed-sinc response sits at about -6 dB at the design cutoff;
    with 101 taps at 250 Hz the transition band is ~8 Hz wide, so 60 Hz is
    already deep in the stop band.
    """
    if num_taps % 2 != 1:
        raise ValueError("num_taps must be odd for a type-I linear-phase FIR")
    mid = (num_taps - 1) / 2
    n = np.arange(num_taps)
    fc = cutoff_hz / rate
    taps = 2 * fc * np.sinc(2 * fc * (n - mid)) * np.hamming(num_taps)
    return taps / taps.sum()


_TAPS_CACHE: dict[tuple[float, float, int], np.ndarray] = {}


def lowpass_taps(rate: float = 250.0) -> np.ndarray:
    key = (LOWPASS_CUTOFF_HZ, rate, LOWPASS_NUM_TAPS)
    if key not in _TAPS_CACHE:
        _TAPS_CACHE[key] = design_lowpass(rate=rate)
    return _TAPS_CACHE[key]


def dump_taps(path, rate: float = 250.0) -> None:
    """One tap per line, full float precision, for outside verification."""
    np.savetxt(path, lowpass_taps(rate), fmt="%.17g")


def filter_eeg(values: np.ndarray, rate: float = 250.0) -> np.ndarray:
    """Mean subtraction (high-pass surrogate) then the 48 Hz FIR low-pass.

    Output has the input's length: reflect padding absorbs the edges and
    the centred convolution cancels the 200 ms group delay, so sample i
    keeps its timestamp.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size < MIN_WINDOW_SAMPLES:
        raise WindowUnderfull(f"{values.size} samples, need >= {MIN_WINDOW_SAMPLES}")
    centered = values - values.mean()
    return kernels.fir_filter(centered, lowpass_taps(rate))


def merge_spans(spans: list[tuple[int, int]]) -> list[tuple[int, int]]:
    if not spans:
        return []
    spans = sorted(spans)
    merged = [spans[0]]
    for start, end in spans[1:]:
        if start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def remove_blink_artifacts(
    values: np.ndarray, ts_us: np.ndarray, blink_onsets_us: list[int]
) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Replace [onset - 50 ms, onset + 300 ms] with a line between the
    samples just outside the span. Overlapping spans merge; spans are
    clipped to the window; nothing outside a recorded span is touched."""
    values = np.asarray(values, dtype=np.float64)
    ts_us = np.asarray(ts_us, dtype=np.int64)
    if values.size == 0 or not blink_onsets_us:
        return values.copy(), []
    lo, hi = int(ts_us[0]), int(ts_us[-1])
    spans = []
    for onset in blink_onsets_us:
        start = max(onset - BLINK_PRE_US, lo)
        end = min(onset + BLINK_POST_US, hi)
        if start <= end:
            spans.append((start, end))
    spans = merge_spans(spans)
    out = values.copy()
    for start, end in spans:
        i0 = int(np.searchsorted(ts_us, start, side="left"))
        i1 = int(np.searchsorted(ts_us, end, side="right")) - 1
        if i1 < i0:
            continue
        left = i0 - 1
        right = i1 + 1
        if left < 0 and right >= values.size:
            continue  # span swallows the whole window: nothing to anchor on
        if left < 0:
            out[i0 : i1 + 1] = values[right]
            continue
        if right >= values.size:
            out[i0 : i1 + 1] = values[left]
            continue
        t0, t1 = float(ts_us[left]), float(ts_us[right])
        frac = (ts_us[i0 : i1 + 1] - t0) / (t1 - t0)
        out[i0 : i1 + 1] = values[left] + frac * (values[right] - values[left])
    return out, spans


def detect_blink_onsets(eye: list[TimestampedSample]) -> list[int]:
    """Rising edges of the eye stream's blink flag; a window that opens
    mid-blink counts its first sample as the onset."""
    onsets = []
    prev = 0.0
    for s in eye:
        flag = s.values[5]
        if flag == 1.0 and prev == 0.0:
            onsets.append(s.ts_us)
        prev = flag
    return onsets


def screen_eye(eye: list[TimestampedSample]) -> tuple[list[TimestampedSample], int]:
    """Drop samples with validity 0, blink flag 1, or any non-finite value."""
    valid = []
    for s in eye:
        if s.values[4] != 1.0 or s.values[5] != 0.0:
            continue
        if not all(math.isfinite(v) for v in s.values):
            continue
        valid.append(s)
    return valid, len(eye) - len(valid)


@dataclass
class CleanWindow:
    """A window after artifact handling, ready for feature extraction."""

    window: AlignedWindow
    eeg_filtered: np.ndarray
    eeg_ts_us: np.ndarray
    eye_valid: list[TimestampedSample]
    rejected_eye_count: int
    artifact_spans: list[tuple[int, int]]
    blink_onsets_us: list[int]
    quality: float
    low_quality: bool


def clean_window(window: AlignedWindow, rate: float = 250.0,
                 eye_rate: float = EYE_RATE) -> CleanWindow:
    """Full preprocessing for one aligned window."""
    eeg = window.eeg_values()
    ts = window.eeg_ts()
    onsets = detect_blink_onsets(window.eye)
    deblinked, spans = remove_blink_artifacts(eeg, ts, onsets)
    filtered = filter_eeg(deblinked, rate)
    eye_valid, rejected = screen_eye(window.eye)
    window_s = (window.end_us - window.start_us) / 1e6
    quality = min(1.0, (len(eye_valid) / eye_rate) / window_s)
    total = len(window.eye)
    low_quality = total > 0 and rejected > 0.5 * total
    return CleanWindow(
        window=window,
        eeg_filtered=filtered,
        eeg_ts_us=ts,
        eye_valid=eye_valid,
        rejected_eye_count=rejected,
        artifact_spans=spans,
        blink_onsets_us=onsets,
        quality=quality,
        low_quality=low_quality,
    )
