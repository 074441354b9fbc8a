"""The per-window hot path: preprocess -> features -> classify, timed.

This is the piece that must finish well inside the 100 ms budget between a
window closing and its classification being available; every stage is
clocked so the benchmark and the live quality feed can report breakdowns.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Union

from .features import (
    FeatureVector,
    MissingFeatures,
    ScreenGeometry,
    extract_features,
)
from .mlp import Classification, MlpModel, forward
from .preprocess import CleanWindow, clean_window
from .streams import AlignedWindow


@dataclass
class ProcessedWindow:
    window: AlignedWindow
    clean: CleanWindow
    features: Union[FeatureVector, MissingFeatures]
    classification: Optional[Classification]
    stage_us: dict[str, float]

    @property
    def missing(self) -> bool:
        return isinstance(self.features, MissingFeatures)

    @property
    def total_us(self) -> float:
        return sum(self.stage_us.values())


class WindowProcessor:
    def __init__(self, model: MlpModel, geometry: Optional[ScreenGeometry] = None,
                 include_fixation_count: bool = False, rate: float = 250.0):
        self.model = model
        self.geometry = geometry or ScreenGeometry()
        self.include_fixation_count = include_fixation_count
        self.rate = rate

    def process(self, window: AlignedWindow) -> ProcessedWindow:
        t0 = time.perf_counter_ns()
        clean = clean_window(window, self.rate)
        t1 = time.perf_counter_ns()
        fv = extract_features(clean, self.geometry, self.include_fixation_count, self.rate)
        t2 = time.perf_counter_ns()
        classification = None
        if not isinstance(fv, MissingFeatures):
            classification = forward(self.model, fv.to_array(), window.end_us)
        t3 = time.perf_counter_ns()
        return ProcessedWindow(
            window=window,
            clean=clean,
            features=fv,
            classification=classification,
            stage_us={
                "preprocess": (t1 - t0) / 1000.0,
                "features": (t2 - t1) / 1000.0,
                "forward": (t3 - t2) / 1000.0,
            },
        )
