"""Simulate, bin, detect, align and estimate; compare with 1/Gamma."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

from . import jumps
from .errors import InvalidInputError
from .resonance import ResonancePole, lifetime

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    gamma: float = jumps.DEFAULT_GAMMA
    bright_rate: float = jumps.DEFAULT_BRIGHT_RATE
    shelving_rate: float = jumps.DEFAULT_SHELVING_RATE
    detection_efficiency: float = 1.0
    background_rate: float = 0.0
    bin_width: float = jumps.DEFAULT_BIN_WIDTH
    low_threshold: float | None = None
    high_threshold: float | None = None
    min_bins: int = 1
    min_periods: int = 203
    duration: float | None = None
    seed: int = 42
    max_extensions: int = 6

    def system(self) -> jumps.LevelSystem:
        return jumps.barium_ion(
            gamma=self.gamma,
            bright_rate=self.bright_rate,
            shelving_rate=self.shelving_rate,
            detection_efficiency=self.detection_efficiency,
            background_rate=self.background_rate,
        )

    def thresholds(self):
        low, high = jumps.default_thresholds(self.bright_rate, self.background_rate, self.bin_width)
        return (low if self.low_threshold is None else self.low_threshold,
                high if self.high_threshold is None else self.high_threshold)


@dataclass
class PipelineResult:
    config: PipelineConfig
    duration: float
    estimate: jumps.LifetimeEstimate
    tau_theor: float
    periods: list = field(repr=False)
    true_periods: list = field(repr=False)
    trace: jumps.FluorescenceTrace = field(repr=False)
    match: jumps.MatchSummary | None = None

    @property
    def ratio(self) -> float:
        return self.estimate.tau_hat / self.tau_theor

    @property
    def band(self):
        half = 3.0 / math.sqrt(self.estimate.n)
        return 1.0 - half, 1.0 + half

    def to_dict(self) -> dict:
        lo, hi = self.band
        out = {
            "tau_exp": self.estimate.tau_hat,
            "tau_exp_stderr": self.estimate.stderr,
            "n_dark_periods": self.estimate.n,
            "tau_theor": self.tau_theor,
            "ratio": self.ratio,
            "ratio_band": [lo, hi],
            "within_band": lo <= self.ratio <= hi,
            "duration": self.duration,
            "config": asdict(self.config),
        }
        if self.match is not None:
            out["ground_truth"] = {
                "n_true": self.match.n_true,
                "n_detected": self.match.n_detected,
                "n_matched": self.match.n_matched,
                "matched_fraction_true": self.match.true_fraction,
                "matched_fraction_detected": self.match.detected_fraction,
                "endpoint_tolerance": 2 * self.config.bin_width,
            }
        return out


def run_pipeline(config: PipelineConfig = PipelineConfig()) -> PipelineResult:
    """Run until at least ``config.min_periods`` dark periods are detected.

    Without an explicit duration the run length starts at 1.25 times the
    expected time for ``min_periods`` shelving cycles and grows by half until
    enough periods are seen.  Runs with the same seed share their prefix.
    """
    if config.min_periods < 2:
        raise InvalidInputError("min_periods must be at least 2")
    sys = config.system()
    record = jumps.shelf_transitions(sys)
    low, high = config.thresholds()
    cycle = 1.0 / config.shelving_rate + 1.0 / config.gamma
    duration = config.duration or 1.25 * config.min_periods * cycle
    for attempt in range(config.max_extensions + 1):
        log = jumps.simulate(sys, duration, config.seed, record=record)
        trace = jumps.bin_counts(log, config.bin_width)
        periods = jumps.detect_dark_periods(trace, low, high, config.min_bins)
        if len(periods) >= config.min_periods or config.duration is not None:
            break
        LOGGER.info("%d dark periods after %.0f s; extending", len(periods), duration)
        duration *= 1.5
    if len(periods) < 2:
        raise InvalidInputError(f"only {len(periods)} dark periods detected; nothing to estimate")
    truth = jumps.true_dark_periods(log)
    estimate = jumps.estimate_lifetime(jumps.align_onsets(periods))
    tau_theor = lifetime(ResonancePole(0.0, config.gamma))
    match = jumps.match_periods(truth, periods, 2 * config.bin_width)
    return PipelineResult(config, duration, estimate, tau_theor, periods, truth, trace, match)
