"""Deterministic, seedable EEG + eye-tracking generators.

The desk-scale stand-in for a wired-up participant: five per-state signal
profiles drive tone amplitudes, blink/saccade statistics and pupil dynamics
so that the downstream feature extractor separates the states. Blink events
are shared between modalities (an eyelid transient in the EEG channel is
time-coincident with the eye stream's blink flag), which is what makes the
artifact-removal path testable end to end.

Determinism contract: a (script, seed) pair fully determines every emitted
sample for the fixed 1 Hz cadence used by run_scenario and the CLI. The
live source used by interactive sessions is deterministic per seed for a
fixed call pattern; interactive replays rely on recorded samples instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ScenarioParseError
from .states import ALL_STATES, AttentionState
from .streams import (
    EEG_RATE,
    EYE_RATE,
    HOP_US,
    AlignedWindow,
    LabelIntervals,
    StreamMerger,
    StreamStalled,
    TimestampedSample,
    eeg_descriptor,
    eye_descriptor,
    resolve_window_label,
)

# analysis-band tones; synthesis inverts the band-power feature model
THETA_TONE_HZ = 6.0
ALPHA_TONE_HZ = 10.0
BETA_TONE_HZ = 20.0

BLINK_EEG_SPAN_US = 300_000  # artifact transient in the EEG channel
BLINK_EEG_AMP_UV = 100.0
BLINK_EYE_SPAN_US = 150_000  # eye-closed span: flags set, pupil zeroed
BLINK_REFRACTORY_US = 350_000  # eyelids cannot re-blink mid-blink

PROBE_GAP_RANGE_S = (30.0, 60.0)
PROBE_DEADLINE_US = 3_000_000
REST_S = 30.0


@dataclass(frozen=True)
class StateSignalProfile:
    """Free parameters that make one attention state look like itself."""

    theta_amp: float
    alpha_amp: float
    beta_amp: float
    noise_sigma: float = 1.0
    blink_rate_hz: float = 0.2
    saccade_rate_hz: float = 3.0
    fixation_mean_ms: float = 300.0
    pupil_mean_mm: float = 4.0
    pupil_sigma_mm: float = 0.2
    gaze_dispersion_scale: float = 0.08
    band_noise: bool = False  # band-limited noise instead of pure tones

    def __post_init__(self):
        for name in ("theta_amp", "alpha_amp", "beta_amp", "noise_sigma",
                     "blink_rate_hz", "saccade_rate_hz", "fixation_mean_ms",
                     "pupil_sigma_mm", "gaze_dispersion_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 2.0 <= self.pupil_mean_mm <= 8.0:
            raise ValueError("pupil_mean_mm outside the plausible 2-8 mm range")

    def dwell_mean_us(self) -> float:
        """Mean fixation dwell; fixation_mean_ms is primary, the saccade
        rate is only consulted when no dwell mean is given."""
        if self.fixation_mean_ms > 0:
            return self.fixation_mean_ms * 1000.0
        if self.saccade_rate_hz > 0:
            return 1e6 / self.saccade_rate_hz
        return float("inf")


def default_profiles() -> dict[AttentionState, StateSignalProfile]:
    """Per-state defaults. Band amplitudes in uV; fixation dwell and saccade
    rate are kept mutually consistent (rate ~ 1/(dwell + one sample))."""
    return {
        AttentionState.HIGH_ATTENTION: StateSignalProfile(
            theta_amp=0.5, alpha_amp=0.5, beta_amp=2.0,
            blink_rate_hz=0.1, saccade_rate_hz=2.4, fixation_mean_ms=400.0,
            gaze_dispersion_scale=0.03,
        ),
        AttentionState.STABLE_ATTENTION: StateSignalProfile(
            theta_amp=0.5, alpha_amp=1.0, beta_amp=1.0,
            blink_rate_hz=0.2, saccade_rate_hz=3.2, fixation_mean_ms=300.0,
            gaze_dispersion_scale=0.08,
        ),
        AttentionState.DROPPING_ATTENTION: StateSignalProfile(
            theta_amp=1.0, alpha_amp=1.5, beta_amp=0.5,
            blink_rate_hz=0.3, saccade_rate_hz=3.7, fixation_mean_ms=250.0,
            gaze_dispersion_scale=0.10,
        ),
        AttentionState.COGNITIVE_OVERLOAD: StateSignalProfile(
            theta_amp=2.0, alpha_amp=1.0, beta_amp=1.0,
            blink_rate_hz=0.25, saccade_rate_hz=3.3, fixation_mean_ms=280.0,
            pupil_sigma_mm=0.6, gaze_dispersion_scale=0.06,
        ),
        AttentionState.DISTRACTION: StateSignalProfile(
            theta_amp=1.0, alpha_amp=1.0, beta_amp=1.0,
            blink_rate_hz=0.8, saccade_rate_hz=3.0, fixation_mean_ms=316.0,
            gaze_dispersion_scale=0.25,
        ),
    }


def rest_profile() -> StateSignalProfile:
    """Rests reuse the stable-state physiology but stay unlabeled."""
    return default_profiles()[AttentionState.STABLE_ATTENTION]


@dataclass
class ProbeEvent:
    """One on-screen self-report request with a 3 s answer deadline."""

    ts_us: int
    deadline_us: int
    response: Optional[int] = None  # rating 1..5
    response_ts_us: Optional[int] = None
    expired: bool = False


class SignalSource:
    """Streams both modalities with live profile switching.

    All randomness comes from independent child generators of one seed,
    each consumed in time order, so a fixed call pattern replays exactly.
    """

    def __init__(self, seed: int, profile: StateSignalProfile,
                 eeg_rate: float = EEG_RATE, eye_rate: float = EYE_RATE):
        children = np.random.SeedSequence(seed).spawn(5)
        self._rng_phase = np.random.default_rng(children[0])
        self._rng_noise = np.random.default_rng(children[1])
        self._rng_blink = np.random.default_rng(children[2])
        self._rng_fix = np.random.default_rng(children[3])
        self._rng_pupil = np.random.default_rng(children[4])
        self.profile = profile
        self.eeg_rate = int(round(eeg_rate))
        self.eye_rate = int(round(eye_rate))
        self._phases = self._rng_phase.uniform(0.0, 2.0 * np.pi, size=3)
        self._band_noise_phases = self._rng_phase.uniform(0.0, 2.0 * np.pi, size=64)
        self._eeg_i = 0
        self._eye_i = 0
        self._next_blink_us = self._draw_blink_gap(0.0)
        self._blink_onsets_us: list[int] = []
        self._fix_point = (0.5, 0.5)
        self._fix_end_us = -1.0  # forces a fixation draw on the first sample

    def _draw_blink_gap(self, from_us: float) -> float:
        """Refractory + shifted-exponential gap: the mean stays exactly
        1/rate (for rates below ~2.8 Hz) while onsets never overlap, so
        every blink is a visible rising edge on the eye stream."""
        rate = self.profile.blink_rate_hz
        if rate <= 0:
            return float("inf")
        tail = max(1e6 / rate - BLINK_REFRACTORY_US, 1.0)
        return from_us + BLINK_REFRACTORY_US + self._rng_blink.exponential(tail)

    def set_profile(self, profile: StateSignalProfile, at_us: int) -> None:
        self.profile = profile
        self._next_blink_us = self._draw_blink_gap(float(at_us))

    def _eeg_ts(self, i: int) -> int:
        return i * 1_000_000 // self.eeg_rate

    def _eye_ts(self, i: int) -> int:
        return i * 1_000_000 // self.eye_rate

    def _schedule_blinks(self, until_us: int) -> None:
        while self._next_blink_us < until_us:
            self._blink_onsets_us.append(int(self._next_blink_us))
            self._next_blink_us = self._draw_blink_gap(self._next_blink_us)
        # drop onsets too old to touch anything still to be generated
        horizon = min(self._eeg_ts(self._eeg_i), self._eye_ts(self._eye_i)) - 2_000_000
        self._blink_onsets_us = [b for b in self._blink_onsets_us if b >= horizon]

    def blink_onsets_us(self) -> list[int]:
        return list(self._blink_onsets_us)

    def _pending_ts(self, i0: int, rate: int, until_us: int) -> np.ndarray:
        hi = until_us * rate // 1_000_000 + 2
        idx = np.arange(i0, max(i0, hi), dtype=np.int64)
        ts = idx * 1_000_000 // rate
        return ts[ts < until_us]

    def _tones(self, t_s: np.ndarray) -> np.ndarray:
        p = self.profile
        if not p.band_noise:
            return (
                p.theta_amp * np.sin(2 * np.pi * THETA_TONE_HZ * t_s + self._phases[0])
                + p.alpha_amp * np.sin(2 * np.pi * ALPHA_TONE_HZ * t_s + self._phases[1])
                + p.beta_amp * np.sin(2 * np.pi * BETA_TONE_HZ * t_s + self._phases[2])
            )
        out = np.zeros_like(t_s)
        k = 0
        for amp, lo, hi in ((p.theta_amp, 4, 7), (p.alpha_amp, 8, 12), (p.beta_amp, 13, 30)):
            n_comp = hi - lo + 1
            comp_amp = amp / np.sqrt(n_comp)
            for f in range(lo, hi + 1):
                out += comp_amp * np.sin(2 * np.pi * f * t_s + self._band_noise_phases[k])
                k += 1
        return out

    def advance_eeg(self, until_us: int) -> list[TimestampedSample]:
        """EEG samples with ts < until_us (tones + noise + blink transients)."""
        self._schedule_blinks(until_us)
        ts = self._pending_ts(self._eeg_i, self.eeg_rate, until_us)
        if ts.size == 0:
            return []
        values = self._tones(ts * 1e-6)
        noise = self._rng_noise.standard_normal(ts.size)
        if self.profile.noise_sigma > 0:
            values = values + self.profile.noise_sigma * noise
        for onset in self._blink_onsets_us:
            dt = ts - onset
            mask = (dt >= 0) & (dt < BLINK_EEG_SPAN_US)
            if mask.any():
                values[mask] += BLINK_EEG_AMP_UV * np.sin(
                    np.pi * dt[mask] / BLINK_EEG_SPAN_US
                )
        self._eeg_i += ts.size
        return [TimestampedSample(int(t), (float(v),)) for t, v in zip(ts, values)]

    def advance_eye(self, until_us: int) -> list[TimestampedSample]:
        """Eye samples with ts < until_us: piecewise-constant fixations with
        single-interval jumps, Gaussian pupil, blink flags for 150 ms."""
        self._schedule_blinks(until_us)
        p = self.profile
        ts_arr = self._pending_ts(self._eye_i, self.eye_rate, until_us)
        if ts_arr.size == 0:
            return []
        pupils = self._rng_pupil.normal(p.pupil_mean_mm, p.pupil_sigma_mm, size=ts_arr.size)
        out = []
        for ts, pupil in zip(ts_arr, pupils):
            ts = int(ts)
            if ts > self._fix_end_us:
                offset = self._rng_fix.normal(0.0, 1.0, size=2) * p.gaze_dispersion_scale
                point = np.clip(0.5 + offset, 0.0, 1.0)
                self._fix_point = (float(point[0]), float(point[1]))
                self._fix_end_us = ts + self._rng_fix.exponential(p.dwell_mean_us())
            blinking = any(
                0 <= ts - onset < BLINK_EYE_SPAN_US for onset in self._blink_onsets_us
            )
            if blinking:
                values = (*self._fix_point, 0.0, 0.0, 0.0, 1.0)
            else:
                values = (*self._fix_point, float(pupil), float(pupil), 1.0, 0.0)
            out.append(TimestampedSample(ts, values))
        self._eye_i += ts_arr.size
        return out


def generate_eeg(profile: StateSignalProfile, duration_s: float,
                 rate: float = EEG_RATE, seed: int = 0) -> np.ndarray:
    """Standalone EEG segment as a value array."""
    src = SignalSource(seed, profile, eeg_rate=rate)
    return np.array([s.values[0] for s in src.advance_eeg(int(duration_s * 1e6))])


def generate_eye(profile: StateSignalProfile, duration_s: float,
                 rate: float = EYE_RATE, seed: int = 0) -> list[TimestampedSample]:
    src = SignalSource(seed, profile, eye_rate=rate)
    return src.advance_eye(int(duration_s * 1e6))


@dataclass(frozen=True)
class ScenarioBlock:
    state: AttentionState
    duration_s: float

    def __post_init__(self):
        if not 60.0 <= self.duration_s <= 180.0:
            raise ValueError("block duration must be 60-180 s")


@dataclass(frozen=True)
class ScenarioScript:
    """Ordered task blocks separated by fixed 30 s rests."""

    blocks: tuple[ScenarioBlock, ...]
    seed: int = 7
    jitter_ms: float = 0.0
    rest_after_s: float = REST_S

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("scenario needs at least one block")
        if self.rest_after_s != REST_S:
            raise ValueError("rest intervals are fixed at 30 s")
        if not 0.0 <= self.jitter_ms <= 2.0:
            raise ValueError("jitter_ms must be within 0-2 ms")

    @property
    def total_duration_s(self) -> float:
        return sum(b.duration_s for b in self.blocks) + self.rest_after_s * (len(self.blocks) - 1)

    def segments(self) -> LabelIntervals:
        """(start_us, end_us, label) for blocks and the None-labeled rests."""
        out: LabelIntervals = []
        t = 0
        for i, block in enumerate(self.blocks):
            end = t + int(block.duration_s * 1e6)
            out.append((t, end, block.state))
            t = end
            if i < len(self.blocks) - 1:
                end = t + int(self.rest_after_s * 1e6)
                out.append((t, end, None))
                t = end
        return out

    def profile_at(self, ts_us: int,
                   profiles: dict[AttentionState, StateSignalProfile]) -> StateSignalProfile:
        for start, end, label in self.segments():
            if start <= ts_us < end:
                return profiles[label] if label is not None else rest_profile()
        return rest_profile()


def default_script(seed: int = 7, block_s: float = 90.0, jitter_ms: float = 0.0) -> ScenarioScript:
    """One block per state in encoding order."""
    return ScenarioScript(
        blocks=tuple(ScenarioBlock(state, block_s) for state in ALL_STATES),
        seed=seed,
        jitter_ms=jitter_ms,
    )


def parse_scenario(text: str) -> ScenarioScript:
    """Parse the plain-text scenario format:

        seed 7
        jitter_ms 0.5
        block HighAttention 90
        block StableAttention 90

    Rests are implicit between blocks. Raises ScenarioParseError with the
    offending line number.
    """
    seed = 7
    jitter_ms = 0.0
    blocks: list[ScenarioBlock] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "seed" and len(parts) == 2:
                seed = int(parts[1])
            elif parts[0] == "jitter_ms" and len(parts) == 2:
                jitter_ms = float(parts[1])
            elif parts[0] == "block" and len(parts) == 3:
                blocks.append(ScenarioBlock(AttentionState.from_wire(parts[1]), float(parts[2])))
            else:
                raise ValueError(f"unrecognized directive {parts[0]!r}")
        except ValueError as exc:
            raise ScenarioParseError(line_no, str(exc)) from None
    if not blocks:
        raise ScenarioParseError(max(len(text.splitlines()), 1), "scenario has no blocks")
    try:
        return ScenarioScript(blocks=tuple(blocks), seed=seed, jitter_ms=jitter_ms)
    except ValueError as exc:
        raise ScenarioParseError(1, str(exc)) from None


def load_scenario(path) -> ScenarioScript:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def probe_schedule(script: ScenarioScript) -> list[ProbeEvent]:
    """Probe times at seeded pseudo-random 30-60 s gaps over the session."""
    rng = np.random.default_rng(np.random.SeedSequence(script.seed).spawn(7)[6])
    total_us = int(script.total_duration_s * 1e6)
    out = []
    t = rng.uniform(*PROBE_GAP_RANGE_S) * 1e6
    while t < total_us:
        out.append(ProbeEvent(ts_us=int(t), deadline_us=int(t) + PROBE_DEADLINE_US))
        t += rng.uniform(*PROBE_GAP_RANGE_S) * 1e6
    return out


class ScenarioSource:
    """Drives a SignalSource through a script's profile schedule and models
    bounded per-stream delivery jitter. Timestamps stay device-stamped; only
    cross-stream arrival order is perturbed, which is exactly the disorder
    the timestamp-binned windower has to absorb."""

    def __init__(self, script: ScenarioScript,
                 profiles: Optional[dict[AttentionState, StateSignalProfile]] = None):
        self.script = script
        self.profiles = profiles or default_profiles()
        self.source = SignalSource(script.seed, script.profile_at(0, self.profiles))
        self._boundaries = sorted(seg[0] for seg in script.segments()[1:])
        self._rng_jitter = np.random.default_rng(np.random.SeedSequence(script.seed).spawn(8)[7])
        self._arrival_floor = {"eeg": -1.0, "eye": -1.0}
        self._cursor_us = 0
        self.override_profile: Optional[StateSignalProfile] = None

    def set_override(self, profile: StateSignalProfile, at_us: int) -> None:
        """Operator steering: pin the source to one profile, disabling the
        script's profile schedule (labels stay script-derived)."""
        self.override_profile = profile
        self.source.set_profile(profile, at_us)

    def _advance_plain(self, until_us: int) -> list[tuple[str, TimestampedSample]]:
        out: list[tuple[str, TimestampedSample]] = []
        t = self._cursor_us
        while t < until_us:
            stop = min([b for b in self._boundaries if b > t] + [until_us])
            out.extend(("eeg", s) for s in self.source.advance_eeg(stop))
            out.extend(("eye", s) for s in self.source.advance_eye(stop))
            if stop in self._boundaries and self.override_profile is None:
                self.source.set_profile(self.script.profile_at(stop, self.profiles), stop)
            t = stop
        self._cursor_us = max(self._cursor_us, until_us)
        return out

    def advance(self, until_us: int) -> list[tuple[str, TimestampedSample]]:
        """Samples with ts < until_us in simulated arrival order."""
        plain = self._advance_plain(until_us)
        if self.script.jitter_ms <= 0:
            plain.sort(key=lambda p: (p[1].ts_us, p[0]))
            return plain
        j_us = self.script.jitter_ms * 1000.0
        tagged = []
        for name, sample in plain:
            arrival = sample.ts_us + self._rng_jitter.uniform(-j_us, j_us)
            # FIFO transport per stream: a sample never overtakes its predecessor
            arrival = max(arrival, self._arrival_floor[name] + 1e-3)
            self._arrival_floor[name] = arrival
            tagged.append((arrival, name, sample))
        tagged.sort(key=lambda t: t[0])
        return [(name, sample) for _, name, sample in tagged]


@dataclass
class ScenarioRun:
    script: ScenarioScript
    windows: list[AlignedWindow]
    probes: list[ProbeEvent]
    raw_samples: Optional[list[tuple[str, TimestampedSample]]] = None
    stalled_events: list = field(default_factory=list)


def run_scenario(script: ScenarioScript,
                 profiles: Optional[dict[AttentionState, StateSignalProfile]] = None,
                 keep_raw: bool = False) -> ScenarioRun:
    """Accelerated synchronous run: push both streams through a merger and
    extract one window per second. Ground-truth labels ride on the windows."""
    merger = StreamMerger()
    handles = {
        "eeg": merger.open_stream(eeg_descriptor()),
        "eye": merger.open_stream(eye_descriptor()),
    }
    segments = script.segments()
    merger.labeler = lambda s, e: resolve_window_label(segments, s, e)
    source = ScenarioSource(script, profiles)

    windows: list[AlignedWindow] = []
    stalled: list[tuple[int, StreamStalled]] = []
    raw: Optional[list] = [] if keep_raw else None
    for k in range(1, int(script.total_duration_s) + 1):
        at_us = k * HOP_US
        chunk = source.advance(at_us)
        if raw is not None:
            raw.extend(chunk)
        for name, sample in chunk:
            handles[name].push(sample)
        result = merger.extract_window(at_us)
        if isinstance(result, AlignedWindow):
            windows.append(result)
        elif isinstance(result, StreamStalled):
            stalled.append((at_us, result))
    return ScenarioRun(script=script, windows=windows, probes=probe_schedule(script),
                       raw_samples=raw, stalled_events=stalled)
