"""Deterministic preprocessing chain applied before feature extraction.

Order is fixed: re-reference -> baseline correction -> zero-phase band-pass ->
decimating downsample.  All operations are pure: they return new segments and
never mutate their inputs, so segments can be processed in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

from .errors import ConfigurationError, DataError
from .segments import EegSegment, ParagraphEvent


@dataclass(frozen=True)
class PreprocessConfig:
    """Parameters of the preprocessing chain.

    ``reference_channels`` empty skips re-referencing.  Setting both cutoffs
    to ``None`` disables filtering (useful for identity-style configs); it is
    an error to set only one.  Segments whose absolute amplitude exceeds
    ``artifact_threshold_v`` anywhere are flagged and excluded from feature
    extraction downstream.
    """

    reference_channels: tuple[str, ...] = ()
    highpass_hz: float | None = 0.5
    lowpass_hz: float | None = 50.0
    baseline_window: tuple[float, float] = (0.0, 0.2)
    target_rate_hz: float = 1000.0
    filter_order: int = 4
    artifact_threshold_v: float = 100e-6

    def __post_init__(self):
        if (self.highpass_hz is None) != (self.lowpass_hz is None):
            raise ConfigurationError("set both band cutoffs or neither")
        if self.highpass_hz is not None:
            if not 0 < self.highpass_hz < self.lowpass_hz:
                raise ConfigurationError(
                    f"need 0 < highpass < lowpass, got [{self.highpass_hz}, {self.lowpass_hz}]"
                )
            if self.lowpass_hz >= self.target_rate_hz / 2:
                raise ConfigurationError(
                    f"lowpass {self.lowpass_hz} Hz reaches Nyquist of the "
                    f"{self.target_rate_hz} Hz target rate"
                )
        if self.target_rate_hz <= 0:
            raise ConfigurationError("target_rate_hz must be positive")
        if self.filter_order < 1:
            raise ConfigurationError("filter_order must be a positive integer")
        start, end = self.baseline_window
        if not (0 <= start < end):
            raise ConfigurationError(f"bad baseline window [{start}, {end})")
        if self.artifact_threshold_v <= 0:
            raise ConfigurationError("artifact_threshold_v must be positive")
        object.__setattr__(self, "reference_channels", tuple(self.reference_channels))
        object.__setattr__(self, "baseline_window", (float(start), float(end)))


def _floor_index(seconds: float, rate: float) -> int:
    # Small fuzz so 0.3 * 1000 (= 299.999...) floors to 300, not 299.
    return int(math.floor(seconds * rate + 1e-9))


def rereference(segment: EegSegment, reference_channels) -> EegSegment:
    """Subtract the mean of the reference channels from every channel."""
    refs = tuple(reference_channels)
    if not refs:
        raise ConfigurationError("reference channel list is empty")
    unknown = [r for r in refs if r not in segment.channel_labels]
    if unknown:
        raise ConfigurationError(f"reference channels not in segment: {unknown}")
    idx = [segment.channel_labels.index(r) for r in refs]
    reference = segment.samples[idx].mean(axis=0)
    return segment.with_samples(segment.samples - reference)


def baseline_correct(segment: EegSegment, window: tuple[float, float]) -> EegSegment:
    """Subtract each channel's mean over ``[start_s, end_s)`` from the channel."""
    start, end = window
    if not (0 <= start < end <= segment.duration_seconds + 1e-9):
        raise ConfigurationError(
            f"baseline window [{start}, {end}) outside segment of "
            f"{segment.duration_seconds:.3f} s"
        )
    i0 = _floor_index(start, segment.sample_rate_hz)
    i1 = min(_floor_index(end, segment.sample_rate_hz), segment.n_samples)
    if i1 <= i0:
        raise ConfigurationError(f"baseline window [{start}, {end}) contains no samples")
    baseline = segment.samples[:, i0:i1].mean(axis=1, keepdims=True)
    return segment.with_samples(segment.samples - baseline)


def design_bandpass(cfg: PreprocessConfig, sample_rate_hz: float) -> np.ndarray:
    """Second-order sections of the Butterworth band-pass for the given rate."""
    if cfg.highpass_hz is None:
        raise ConfigurationError("band cutoffs are disabled in this config")
    if cfg.lowpass_hz >= sample_rate_hz / 2:
        raise ConfigurationError(
            f"lowpass {cfg.lowpass_hz} Hz reaches Nyquist at {sample_rate_hz} Hz"
        )
    return signal.butter(cfg.filter_order, [cfg.highpass_hz, cfg.lowpass_hz],
                         btype="band", fs=sample_rate_hz, output="sos")


def bandpass(segment: EegSegment, cfg: PreprocessConfig) -> EegSegment:
    """Zero-phase band-pass (forward-backward Butterworth) per channel."""
    sos = design_bandpass(cfg, segment.sample_rate_hz)
    try:
        filtered = signal.sosfiltfilt(sos, segment.samples, axis=1)
    except ValueError as exc:
        raise DataError(f"segment too short to filter: {exc}") from exc
    return segment.with_samples(filtered)


def downsample(segment: EegSegment, target_rate_hz: float) -> EegSegment:
    """Keep every k-th sample, k = rate/target; requires an integer ratio."""
    ratio = segment.sample_rate_hz / target_rate_hz
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-9:
        raise ConfigurationError(
            f"rate {segment.sample_rate_hz} Hz is not an integer multiple of "
            f"target {target_rate_hz} Hz"
        )
    if k == 1:
        return segment
    n_out = segment.n_samples // k
    kept = segment.samples[:, : n_out * k : k]
    return segment.with_samples(kept, sample_rate_hz=float(target_rate_hz))


def preprocess(segment: EegSegment, cfg: PreprocessConfig) -> EegSegment:
    """Full chain: re-reference, baseline-correct, band-pass, downsample."""
    out = segment
    if cfg.reference_channels:
        out = rereference(out, cfg.reference_channels)
    out = baseline_correct(out, cfg.baseline_window)
    if cfg.highpass_hz is not None:
        out = bandpass(out, cfg)
    out = downsample(out, cfg.target_rate_hz)
    return out


def has_artifact(segment: EegSegment, threshold_v: float) -> bool:
    """True when any sample exceeds the amplitude threshold (artifact reject)."""
    if segment.is_degenerate:
        return False
    return bool(np.max(np.abs(segment.samples)) > threshold_v)


def slice_by_events(recording: EegSegment, events: list[ParagraphEvent]) -> list[EegSegment]:
    """Cut one segment per paragraph-view interval.

    Sample bounds are floor(start*sr) inclusive to floor(end*sr) exclusive.
    Zero-length events yield degenerate (zero-sample) segments which callers
    are expected to drop before feature extraction.
    """
    out = []
    duration = recording.duration_seconds
    for ev in events:
        if ev.start_s < 0 or ev.end_s < ev.start_s or ev.end_s > duration + 1e-9:
            raise DataError(
                f"event for paragraph {ev.paragraph!r} [{ev.start_s}, {ev.end_s}) "
                f"outside recording of {duration:.3f} s"
            )
        i0 = _floor_index(ev.start_s, recording.sample_rate_hz)
        i1 = min(_floor_index(ev.end_s, recording.sample_rate_hz), recording.n_samples)
        i1 = max(i1, i0)
        meta = replace(
            recording.meta,
            paragraph=ev.paragraph,
            dwell_seconds=(i1 - i0) / recording.sample_rate_hz,
        )
        out.append(EegSegment(recording.channel_labels, recording.sample_rate_hz,
                              recording.samples[:, i0:i1], meta))
    return out
