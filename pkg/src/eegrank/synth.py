"""Synthetic reading sessions for desk-scale evaluation.

The generator fabricates a whole experiment: per-task intent labels and a
candidate corpus, pool selection, and per-user session logs whose paragraphs
carry synthetic EEG.  Background activity is Gaussian pink noise; paragraphs
the reader finds useful additionally receive an alpha-range sinusoidal burst.
Clicks and annotations correlate with the same underlying usefulness, so
click-based and EEG-based feedback can be compared on common gold labels.

The noise is calibrated analytically, which keeps expected band energies in
closed form: ``expected_noise_band_energy`` predicts a window's band energy
and ``burst_amplitude_for_contrast`` inverts it to hit a target energy ratio.

Everything is driven by one seeded generator, so identical (spec, seed) pairs
produce byte-identical datasets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .features import DEFAULT_BANDS, Band, BandTable, MODE_RESOLUTION_AWARE, _band_slice
from .rerank import (IntentProfile, JudgmentLabel, TaskLabels,
                     save_task_labels, select_candidate_pool)
from .segments import EegSegment, SegmentMeta, save_segment
from .simulate import (AnnotateEvent, ClickEvent, JudgeEvent, SessionLog,
                       TaskLabelEvent, ViewEvent, save_session_log)
from .util import atomic_write_text


@dataclass(frozen=True)
class SynthSpec:
    """Knobs of the synthetic experiment."""

    n_users: int = 4
    tasks_per_user: int = 3
    intents_range: tuple[int, int] = (2, 3)
    corpus_size: int = 30
    pool_size: int = 7
    paragraphs_per_judgment: int = 6
    judgments_read: tuple[int, int] = (5, 7)

    channel_labels: tuple[str, ...] = ("Fz", "Cz", "Pz", "Oz", "M1", "M2")
    burst_channels: tuple[str, ...] = ("Cz", "Pz", "Oz")
    sample_rate_hz: int = 250
    dwell_range_s: tuple[float, float] = (9.0, 12.0)

    noise_rms_v: float = 10e-6
    burst_freq_hz: float = 10.0
    burst_amplitude_v: float = 5e-6
    burst_duration_s: float | None = None  # None: burst spans the whole view

    click_prob_satisfied: float = 0.75
    click_prob_unsatisfied: float = 0.15
    hard_to_say_prob: float = 0.05
    paragraph_sat_prob_good: float = 0.7
    paragraph_sat_prob_bad: float = 0.2
    voting_threshold: int = 3

    def __post_init__(self):
        if self.n_users < 1 or self.tasks_per_user < 1:
            raise ConfigurationError("need at least one user and one task")
        if self.corpus_size < self.pool_size:
            raise ConfigurationError("corpus smaller than the candidate pool")
        if not set(self.burst_channels) <= set(self.channel_labels):
            raise ConfigurationError("burst channels must be recording channels")
        if self.sample_rate_hz < 90:
            raise ConfigurationError("sample rate below the 90 Hz minimum")
        lo, hi = self.judgments_read
        if not 1 <= lo <= hi <= self.pool_size:
            raise ConfigurationError(f"judgments_read range {self.judgments_read} "
                                     f"outside 1..{self.pool_size}")
        if self.burst_amplitude_v < 0 or self.noise_rms_v <= 0:
            raise ConfigurationError("noise must be positive, burst non-negative")


@dataclass
class SynthDataset:
    logs: list[SessionLog]
    segments: dict          # (user, task, judgment, paragraph) -> EegSegment
    labels: dict            # task -> TaskLabels
    spec: SynthSpec
    seed: int


# ---------------------------------------------------------------------------
# Analytic noise calibration
# ---------------------------------------------------------------------------

def _harmonic(n: int) -> float:
    return float(np.sum(1.0 / np.arange(1, n + 1))) if n >= 1 else 0.0


def _noise_scale(spec: SynthSpec, n_samples: int) -> float:
    """Spectral scale c giving E[x^2] = noise_rms^2 for the 1/f-shaped spectrum."""
    h = _harmonic(n_samples // 2 - 1)
    if h <= 0:
        raise ConfigurationError(f"segment of {n_samples} samples too short for noise")
    return spec.noise_rms_v * math.sqrt(n_samples * spec.sample_rate_hz / (2.0 * h))


def _pink_noise(spec: SynthSpec, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """One channel of Gaussian pink noise with analytically known band energies."""
    n_bins = n_samples // 2 + 1
    z = (rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins)) / math.sqrt(2.0)
    freqs = np.arange(n_bins) * spec.sample_rate_hz / n_samples
    shape = np.zeros(n_bins)
    shape[1:] = 1.0 / np.sqrt(freqs[1:])
    if n_samples % 2 == 0:
        shape[-1] = 0.0
    spectrum = _noise_scale(spec, n_samples) * z * shape
    return np.fft.irfft(spectrum, n=n_samples)


def expected_noise_band_energy(spec: SynthSpec, t: int, band: Band,
                               n_samples: int,
                               mode: str = MODE_RESOLUTION_AWARE) -> float:
    """Expected band energy of one t-second noise window (counted bins only).

    For the 1/f-shaped noise the expectation is closed form:
    sum over counted bins m of (M/N) * c^2 / f_m with M = sr * t.
    """
    m = spec.sample_rate_hz * t
    cols = _band_slice(band, t, mode)
    bins = np.arange(cols.start, cols.stop)
    freqs = bins / t
    c2 = _noise_scale(spec, n_samples) ** 2
    return float((m / n_samples) * c2 * np.sum(1.0 / freqs))


def expected_burst_band_energy(spec: SynthSpec, t: int) -> float:
    """Band energy a full-window sinusoidal burst adds to its counted bin."""
    m = spec.sample_rate_hz * t
    return (spec.burst_amplitude_v * m / 2.0) ** 2


def burst_amplitude_for_contrast(spec: SynthSpec, ratio: float, t: int = 1,
                                 n_samples: int | None = None,
                                 bands: BandTable = DEFAULT_BANDS) -> float:
    """Amplitude making (noise + burst) alpha energy = ratio * noise alpha energy."""
    if ratio <= 1:
        raise ConfigurationError("contrast ratio must exceed 1")
    if n_samples is None:
        n_samples = round(sum(spec.dwell_range_s) / 2 * spec.sample_rate_hz)
    alpha = bands.bands[2]
    noise = expected_noise_band_energy(spec, t, alpha, n_samples)
    m = spec.sample_rate_hz * t
    return math.sqrt(4.0 * (ratio - 1.0) * noise) / m


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _make_task_labels(spec: SynthSpec, task: str, rng: np.random.Generator) -> TaskLabels:
    n_intents = int(rng.integers(spec.intents_range[0], spec.intents_range[1] + 1))
    intent_ids = tuple(f"i{i}" for i in range(n_intents))
    weights = rng.uniform(0.3, 1.0, n_intents)
    judgments = tuple(
        JudgmentLabel(f"{task}-c{i:02d}", rng.uniform(0.0, 1.0, n_intents),
                      int(rng.integers(1, 5)))
        for i in range(spec.corpus_size)
    )
    return TaskLabels(task, IntentProfile(intent_ids, weights), judgments)


def _paragraph_segment(spec: SynthSpec, rng: np.random.Generator, satisfied: bool,
                       meta: SegmentMeta) -> EegSegment:
    n = round(rng.uniform(*spec.dwell_range_s) * spec.sample_rate_hz)
    data = np.stack([_pink_noise(spec, n, rng) for _ in spec.channel_labels])
    if satisfied and spec.burst_amplitude_v > 0:
        if spec.burst_duration_s is None:
            i0, i1 = 0, n
        else:
            span = min(n, round(spec.burst_duration_s * spec.sample_rate_hz))
            i0 = int(rng.integers(0, n - span + 1))
            i1 = i0 + span
        phase = rng.uniform(0, 2 * math.pi)
        times = np.arange(i0, i1) / spec.sample_rate_hz
        burst = spec.burst_amplitude_v * np.sin(2 * math.pi * spec.burst_freq_hz * times + phase)
        for label in spec.burst_channels:
            data[spec.channel_labels.index(label), i0:i1] += burst
    meta = replace(meta, dwell_seconds=n / spec.sample_rate_hz)
    return EegSegment(spec.channel_labels, float(spec.sample_rate_hz), data, meta)


def synth_sessions(spec: SynthSpec = SynthSpec(), seed: int = 0) -> SynthDataset:
    """Generate (logs, EEG segments, task labels); deterministic per seed."""
    rng = np.random.default_rng(seed)
    tasks = [f"t{i}" for i in range(spec.tasks_per_user)]

    labels: dict = {}
    pools: dict = {}
    goodness: dict = {}
    for task in tasks:
        full = _make_task_labels(spec, task, rng)
        pool_ids = select_candidate_pool(full, spec.pool_size)
        jmap = full.judgment_map()
        pool_labels = TaskLabels(task, full.profile,
                                 tuple(jmap[j] for j in pool_ids))
        labels[task] = pool_labels
        # Present in fixed grade-descending order when logging behavior.
        pools[task] = sorted(pool_ids, key=lambda j: (-jmap[j].grade, j))
        goodness[task] = {j: bool(rng.random() < 0.5) for j in pool_ids}

    logs: list[SessionLog] = []
    segments: dict = {}
    for u in range(spec.n_users):
        user = f"u{u:02d}"
        arm = "eeg" if u % 2 else "none"
        for task in tasks:
            events: list = []
            clock = 0.0
            for judgment in pools[task]:
                sat_prob = (spec.paragraph_sat_prob_good if goodness[task][judgment]
                            else spec.paragraph_sat_prob_bad)
                n_sat = 0
                annotations = []
                for p in range(spec.paragraphs_per_judgment):
                    paragraph = f"p{p:02d}"
                    truly_sat = bool(rng.random() < sat_prob)
                    n_sat += truly_sat
                    meta = SegmentMeta(user, task, judgment, paragraph)
                    segment = _paragraph_segment(spec, rng, truly_sat, meta)
                    segments[(user, task, judgment, paragraph)] = segment
                    dwell = segment.meta.dwell_seconds
                    events.append(ViewEvent(judgment, paragraph, clock, clock + dwell))
                    click_p = (spec.click_prob_satisfied if truly_sat
                               else spec.click_prob_unsatisfied)
                    if rng.random() < click_p:
                        events.append(ClickEvent(judgment, paragraph, clock + dwell / 2))
                    if rng.random() < spec.hard_to_say_prob:
                        annotation = "hard_to_say"
                    else:
                        annotation = "useful" if truly_sat else "useless"
                    annotations.append(AnnotateEvent(judgment, paragraph, annotation))
                    clock += dwell
                events.extend(annotations)
                events.append(JudgeEvent(judgment, n_sat >= spec.voting_threshold))
            read = int(rng.integers(spec.judgments_read[0], spec.judgments_read[1] + 1))
            if arm == "eeg":
                quality = int(rng.integers(2, 5))
                satisfied = int(rng.random() < 0.8)
            else:
                quality = int(rng.integers(1, 4))
                satisfied = int(rng.random() < 0.45)
            events.append(TaskLabelEvent(quality, satisfied, read))
            logs.append(SessionLog(user, task, events, arm))
    return SynthDataset(logs, segments, labels, spec, seed)


# ---------------------------------------------------------------------------
# Materialization
# ---------------------------------------------------------------------------

def segment_dir_name(user, task, judgment, paragraph) -> str:
    return f"{user}__{task}__{judgment}__{paragraph}"


def write_dataset(dataset: SynthDataset, data_dir) -> None:
    """Lay the dataset out on disk in the structure the CLI consumes."""
    data_dir = Path(data_dir)
    for (user, task, judgment, paragraph), segment in dataset.segments.items():
        save_segment(segment, data_dir / "segments"
                     / segment_dir_name(user, task, judgment, paragraph))
    for log in dataset.logs:
        save_session_log(data_dir / "sessions" / f"{log.user}__{log.task}.jsonl", log)
    for task, labels in dataset.labels.items():
        save_task_labels(data_dir / "labels" / "tasks" / f"{task}.json", labels)
    records = []
    for log in dataset.logs:
        for ann in log.annotations():
            records.append({"user": log.user, "task": log.task,
                            "judgment": ann.judgment, "paragraph": ann.paragraph,
                            "annotation": ann.annotation})
    lines = [json.dumps(r, sort_keys=True, ensure_ascii=False) for r in records]
    atomic_write_text(data_dir / "labels" / "paragraphs.jsonl",
                      "\n".join(lines) + ("\n" if lines else ""))
