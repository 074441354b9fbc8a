"""Spectral and oculomotor features of one clean window, fused into the
fixed-order vector the classifier is trained on.

EEG side: Welch band powers (1 s Hann segments, 50% overlap) for theta
4-7 Hz, alpha 8-12 Hz, beta 13-30 Hz, normalized so the one-sided spectrum
integrates to the signal variance, plus the beta/(alpha+theta) engagement
index. Eye side: velocity-threshold fixation/saccade segmentation (I-VT,
30 deg/s, 100 ms minimum fixation) over screen-geometry visual angles,
gaze dispersion, blink rate and pupil variability.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import FusionError
from .preprocess import CleanWindow
from .streams import TimestampedSample

BANDS = (("theta", 4.0, 7.0), ("alpha", 8.0, 12.0), ("beta", 13.0, 30.0))
WELCH_SEGMENT_S = 1.0
ENGAGEMENT_EPS = 1e-12
ENGAGEMENT_CAP = 1e6  # sentinel when alpha + theta underflows

IVT_VELOCITY_DEG_S = 30.0
MIN_FIXATION_MS = 100.0

FEATURE_NAMES = (
    "theta",
    "alpha",
    "beta",
    "engagement",
    "fixation_mean_ms",
    "gaze_dispersion",
    "saccade_rate",
    "blink_rate",
    "pupil_variability",
)
OPTIONAL_FEATURE = "fixation_count"


@dataclass(frozen=True)
class ScreenGeometry:
    """Display metrics for converting normalized gaze to visual angle.

    Defaults model a desktop monitor viewed from 60 cm.
    """

    width_mm: float = 530.0
    height_mm: float = 300.0
    distance_mm: float = 600.0


@dataclass(frozen=True)
class BandPower:
    theta: float
    alpha: float
    beta: float

    def __post_init__(self):
        if self.theta < 0 or self.alpha < 0 or self.beta < 0:
            raise ValueError("band powers cannot be negative")


def hann_window(n: int) -> np.ndarray:
    # periodic form: a bin-centred tone leaks one bin either side, no further
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def band_powers(eeg_filtered: np.ndarray, rate: float = 250.0) -> BandPower:
    """Welch band powers in uV^2 (see module docstring for the estimator)."""
    x = np.asarray(eeg_filtered, dtype=np.float64)
    nseg = int(round(rate * WELCH_SEGMENT_S))
    hop = nseg // 2
    df = rate / nseg
    kmin = math.ceil(BANDS[0][1] / df)
    kmax = math.floor(BANDS[-1][2] / df)
    bins = kernels.welch_bin_powers(x, hann_window(nseg), hop, kmin, kmax)
    out = {}
    for name, lo, hi in BANDS:
        k0 = max(math.ceil(lo / df), kmin)
        k1 = min(math.floor(hi / df), kmax)
        out[name] = float(bins[k0 - kmin : k1 - kmin + 1].sum()) if k1 >= k0 else 0.0
    return BandPower(**out)


def total_power(eeg_filtered: np.ndarray, rate: float = 250.0) -> float:
    """Sum of the one-sided spectrum above DC; Parseval companion for tests."""
    x = np.asarray(eeg_filtered, dtype=np.float64)
    nseg = int(round(rate * WELCH_SEGMENT_S))
    bins = kernels.welch_bin_powers(x, hann_window(nseg), nseg // 2, 1, nseg // 2)
    return float(bins.sum())


def engagement_index(bp: BandPower) -> float:
    """beta / (alpha + theta), capped at the sentinel when the denominator
    underflows (see engagement_saturated)."""
    denom = bp.alpha + bp.theta
    if denom < ENGAGEMENT_EPS:
        return ENGAGEMENT_CAP
    return bp.beta / denom


def engagement_saturated(bp: BandPower) -> bool:
    return bp.alpha + bp.theta < ENGAGEMENT_EPS


@dataclass(frozen=True)
class Fixation:
    start_us: int
    end_us: int
    x: float
    y: float

    @property
    def duration_ms(self) -> float:
        return (self.end_us - self.start_us) / 1000.0


@dataclass(frozen=True)
class Saccade:
    start_us: int
    end_us: int
    amplitude_deg: float


def gaze_angles_deg(gaze_xy: np.ndarray, geometry: ScreenGeometry) -> np.ndarray:
    """Angle between consecutive gaze directions, eye at the screen centre
    normal at the viewing distance."""
    pos = np.empty((len(gaze_xy), 3))
    pos[:, 0] = (gaze_xy[:, 0] - 0.5) * geometry.width_mm
    pos[:, 1] = (gaze_xy[:, 1] - 0.5) * geometry.height_mm
    pos[:, 2] = geometry.distance_mm
    norms = np.linalg.norm(pos, axis=1)
    dots = np.sum(pos[:-1] * pos[1:], axis=1) / (norms[:-1] * norms[1:])
    return np.degrees(np.arccos(np.clip(dots, -1.0, 1.0)))


def detect_fixations_saccades(
    eye_valid: list[TimestampedSample],
    geometry: Optional[ScreenGeometry] = None,
) -> tuple[list[Fixation], list[Saccade]]:
    """I-VT over the screened samples.

    Works on consecutive-sample pairs: a pair whose angular velocity
    exceeds the threshold is saccadic; maximal runs of saccadic pairs
    merge into single saccades and maximal non-saccadic runs of at least
    100 ms become fixations. Pair-symmetric, so time-reversing a window
    yields the same event counts.
    """
    geometry = geometry or ScreenGeometry()
    n = len(eye_valid)
    if n < 2:
        return [], []
    ts = np.array([s.ts_us for s in eye_valid], dtype=np.int64)
    gaze = np.array([(s.values[0], s.values[1]) for s in eye_valid], dtype=np.float64)
    angles = gaze_angles_deg(gaze, geometry)
    dt_s = np.diff(ts) / 1e6
    velocity = angles / np.maximum(dt_s, 1e-9)
    saccadic = velocity > IVT_VELOCITY_DEG_S

    fixations: list[Fixation] = []
    saccades: list[Saccade] = []
    i = 0
    while i < len(saccadic):
        j = i
        while j + 1 < len(saccadic) and saccadic[j + 1] == saccadic[i]:
            j += 1
        left, right = i, j + 1  # sample span covered by pairs i..j
        if saccadic[i]:
            saccades.append(
                Saccade(int(ts[left]), int(ts[right]), float(angles[i : j + 1].sum()))
            )
        else:
            duration_ms = (ts[right] - ts[left]) / 1000.0
            if duration_ms >= MIN_FIXATION_MS:
                span = gaze[left : right + 1]
                fixations.append(
                    Fixation(int(ts[left]), int(ts[right]),
                             float(span[:, 0].mean()), float(span[:, 1].mean()))
                )
        i = j + 1
    return fixations, saccades


@dataclass(frozen=True)
class EyeFeatures:
    fixation_mean_ms: float
    gaze_dispersion: float
    saccade_rate: float
    blink_rate: float
    pupil_variability: float
    fixation_count: int


@dataclass(frozen=True)
class MissingFeatures:
    """Window skipped downstream: no usable eye samples survived screening."""

    reason: str


def eye_features(
    eye_valid: list[TimestampedSample],
    fixations: list[Fixation],
    saccades: list[Saccade],
    blink_count: int,
    quality: float,
    window_s: float = 5.0,
):
    """Aggregate oculomotor features; rates use the quality-adjusted
    (retained) duration rather than the wall-clock window."""
    if not eye_valid:
        return MissingFeatures("no valid eye samples in window")
    retained_s = max(quality * window_s, 1e-9)
    gaze = np.array([(s.values[0], s.values[1]) for s in eye_valid])
    centroid = gaze.mean(axis=0)
    dispersion = float(np.sqrt(np.mean(np.sum((gaze - centroid) ** 2, axis=1))))
    pupil = np.array([(s.values[2] + s.values[3]) / 2.0 for s in eye_valid])
    return EyeFeatures(
        fixation_mean_ms=float(np.mean([f.duration_ms for f in fixations])) if fixations else 0.0,
        gaze_dispersion=dispersion,
        saccade_rate=len(saccades) / retained_s,
        blink_rate=blink_count / retained_s,
        pupil_variability=float(pupil.std()),
        fixation_count=len(fixations),
    )


@dataclass(frozen=True)
class FeatureVector:
    theta: float
    alpha: float
    beta: float
    engagement: float
    fixation_mean_ms: float
    gaze_dispersion: float
    saccade_rate: float
    blink_rate: float
    pupil_variability: float
    fixation_count: int = 0
    count_in_vector: bool = False  # enables the optional 10th dimension

    @property
    def dim(self) -> int:
        return 10 if self.count_in_vector else 9

    def to_array(self) -> np.ndarray:
        vals = [getattr(self, name) for name in FEATURE_NAMES]
        if self.count_in_vector:
            vals.append(float(self.fixation_count))
        return np.array(vals, dtype=np.float64)

    def names(self) -> tuple[str, ...]:
        if self.count_in_vector:
            return FEATURE_NAMES + (OPTIONAL_FEATURE,)
        return FEATURE_NAMES


def fuse(bp: BandPower, engagement: float, eye: EyeFeatures,
         include_fixation_count: bool = False) -> FeatureVector:
    """Assemble the contract-ordered vector; any non-finite entry is a
    FusionError rather than a poisoned model input."""
    fv = FeatureVector(
        theta=bp.theta,
        alpha=bp.alpha,
        beta=bp.beta,
        engagement=engagement,
        fixation_mean_ms=eye.fixation_mean_ms,
        gaze_dispersion=eye.gaze_dispersion,
        saccade_rate=eye.saccade_rate,
        blink_rate=eye.blink_rate,
        pupil_variability=eye.pupil_variability,
        fixation_count=eye.fixation_count,
        count_in_vector=include_fixation_count,
    )
    if not np.all(np.isfinite(fv.to_array())):
        raise FusionError(f"non-finite feature in {fv}")
    return fv


def extract_features(clean: CleanWindow,
                     geometry: Optional[ScreenGeometry] = None,
                     include_fixation_count: bool = False,
                     rate: float = 250.0):
    """CleanWindow -> FeatureVector, or MissingFeatures when the eye side
    is unusable (the EEG side alone cannot fill the contract)."""
    bp = band_powers(clean.eeg_filtered, rate)
    fixations, saccades = detect_fixations_saccades(clean.eye_valid, geometry)
    window_s = (clean.window.end_us - clean.window.start_us) / 1e6
    eye = eye_features(
        clean.eye_valid,
        fixations,
        saccades,
        blink_count=len(clean.blink_onsets_us),
        quality=clean.quality,
        window_s=window_s,
    )
    if isinstance(eye, MissingFeatures):
        return eye
    return fuse(bp, engagement_index(bp), eye, include_fixation_count)


def write_dataset(path, rows: list[tuple[FeatureVector, int]]) -> None:
    """CSV with the fixed feature header plus an integer label column."""
    if not rows:
        raise ValueError("no rows to write")
    names = rows[0][0].names()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + ["label"])
        for fv, label in rows:
            writer.writerow([repr(float(v)) for v in fv.to_array()] + [str(int(label))])


def read_dataset(path) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Returns (X, y, feature_names); raises ValueError naming any missing
    required column."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError("dataset file is empty")
        if "label" not in header:
            raise ValueError("dataset is missing required column 'label'")
        for name in FEATURE_NAMES:
            if name not in header:
                raise ValueError(f"dataset is missing required column {name!r}")
        label_idx = header.index("label")
        feat_names = tuple(h for i, h in enumerate(header) if i != label_idx)
        xs, ys = [], []
        for row in reader:
            if not row:
                continue
            ys.append(int(row[label_idx]))
            xs.append([float(v) for i, v in enumerate(row) if i != label_idx])
    return np.array(xs, dtype=np.float64), np.array(ys, dtype=np.int64), feat_names
