"""EEG segment containers and their on-disk formats.

A segment is one reader's continuous multi-channel recording while viewing a
single paragraph (or a whole judgment): a channels x samples voltage matrix
plus identifying metadata.  Segments are immutable values; every processing
step returns a new segment.

On disk a segment is a directory holding ``meta.json`` and ``samples.f32``
(little-endian float32, channel-major).  A ``samples.csv`` fallback (one row
per channel) is accepted when reading.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .util import atomic_write_bytes, atomic_write_text

# Twice the highest analysed band edge (45 Hz); lower rates cannot carry the
# gamma band and are rejected.
MIN_SAMPLE_RATE_HZ = 90.0

ANNOTATION_VALUES = ("useful", "useless", "hard_to_say")


@dataclass(frozen=True)
class SegmentMeta:
    """Identity of a segment: who read what, and for how long."""

    user: str | int = "u0"
    query: str | int = "q0"
    judgment: str | int = "j0"
    paragraph: str | int = "p0"
    dwell_seconds: float = 0.0


@dataclass(frozen=True)
class EegSegment:
    """A channels x samples voltage matrix with acquisition metadata.

    Invariants enforced at construction: at least one channel, one label per
    channel row, sample rate at least ``MIN_SAMPLE_RATE_HZ``.  Zero-sample
    segments are permitted in memory (a zero-length view slice produces one,
    flagged via :attr:`is_degenerate`) but are rejected when loading from disk.
    """

    channel_labels: tuple[str, ...]
    sample_rate_hz: float
    samples: np.ndarray
    meta: SegmentMeta = field(default_factory=SegmentMeta)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise DataError(f"samples must be 2-D (channels x samples), got shape {samples.shape}")
        if samples.shape[0] < 1:
            raise DataError("segment needs at least one channel")
        if len(self.channel_labels) != samples.shape[0]:
            raise DataError(
                f"{len(self.channel_labels)} channel labels for {samples.shape[0]} rows"
            )
        if not self.sample_rate_hz > 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.sample_rate_hz < MIN_SAMPLE_RATE_HZ:
            raise DataError(
                f"sample rate {self.sample_rate_hz} Hz is below the "
                f"{MIN_SAMPLE_RATE_HZ:.0f} Hz minimum needed for the 45 Hz band edge"
            )
        samples = np.ascontiguousarray(samples)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channel_labels", tuple(self.channel_labels))

    @classmethod
    def from_array(cls, samples, sample_rate_hz, channel_labels=None, **meta) -> "EegSegment":
        """Build a segment from a raw array, defaulting labels and metadata."""
        samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        if channel_labels is None:
            channel_labels = tuple(f"ch{i:02d}" for i in range(samples.shape[0]))
        meta.setdefault("dwell_seconds", samples.shape[1] / sample_rate_hz)
        return cls(tuple(channel_labels), float(sample_rate_hz), samples, SegmentMeta(**meta))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_seconds(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def is_degenerate(self) -> bool:
        return self.n_samples == 0

    def with_samples(self, samples: np.ndarray, sample_rate_hz: float | None = None) -> "EegSegment":
        """New segment with replaced sample data; dwell tracks the new length."""
        rate = self.sample_rate_hz if sample_rate_hz is None else sample_rate_hz
        meta = replace(self.meta, dwell_seconds=np.asarray(samples).shape[1] / rate)
        return EegSegment(self.channel_labels, rate, samples, meta)

    def channel_index(self, label: str) -> int:
        try:
            return self.channel_labels.index(label)
        except ValueError:
            raise DataError(f"unknown channel label {label!r}") from None


@dataclass(frozen=True)
class ParagraphEvent:
    """One paragraph-view interval inside a longer recording, with optional labels."""

    paragraph: str | int
    start_s: float
    end_s: float
    clicked: bool | None = None
    annotation: str | None = None

    def __post_init__(self):
        if self.annotation is not None and self.annotation not in ANNOTATION_VALUES:
            raise DataError(
                f"annotation {self.annotation!r} not in {ANNOTATION_VALUES}"
            )


# ---------------------------------------------------------------------------
# Segment container files
# ---------------------------------------------------------------------------

_META_KEYS = ("channel_labels", "sample_rate_hz", "user", "query", "judgment",
              "paragraph", "dwell_seconds")


def save_segment(segment: EegSegment, directory: str | Path, *, extra_meta: dict | None = None) -> Path:
    """Write ``meta.json`` + ``samples.f32`` into ``directory`` (created if needed)."""
    directory = Path(directory)
    meta = {
        "channel_labels": list(segment.channel_labels),
        "sample_rate_hz": segment.sample_rate_hz,
        "user": segment.meta.user,
        "query": segment.meta.query,
        "judgment": segment.meta.judgment,
        "paragraph": segment.meta.paragraph,
        "dwell_seconds": segment.meta.dwell_seconds,
    }
    if extra_meta:
        meta.update(extra_meta)
    body = json.dumps(meta, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    atomic_write_text(directory / "meta.json", body)
    atomic_write_bytes(directory / "samples.f32",
                       segment.samples.astype("<f4").tobytes(order="C"))
    return directory


def load_segment(directory: str | Path) -> EegSegment:
    """Read a segment container; validates shape, rate and dwell consistency.

    Raises :class:`DataError` naming the offending file on any mismatch.
    """
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.is_file():
        raise DataError(f"missing meta.json in {directory}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"unreadable meta.json in {directory}: {exc}") from exc
    missing = [k for k in _META_KEYS if k not in meta]
    if missing:
        raise DataError(f"{meta_path}: missing keys {missing}")

    labels = meta["channel_labels"]
    if not isinstance(labels, list) or not labels:
        raise DataError(f"{meta_path}: channel_labels must be a nonempty array")
    ch = len(labels)

    f32_path = directory / "samples.f32"
    csv_path = directory / "samples.csv"
    if f32_path.is_file():
        raw = np.frombuffer(f32_path.read_bytes(), dtype="<f4")
        if raw.size == 0 or raw.size % ch != 0:
            raise DataError(
                f"{f32_path}: {raw.size} float32 values not divisible into {ch} channels"
            )
        samples = raw.reshape(ch, -1).astype(np.float64)
    elif csv_path.is_file():
        samples = np.atleast_2d(np.loadtxt(csv_path, delimiter=",", dtype=np.float64))
        if samples.shape[0] != ch:
            raise DataError(f"{csv_path}: {samples.shape[0]} rows for {ch} channels")
    else:
        raise DataError(f"no samples.f32 or samples.csv in {directory}")

    rate = float(meta["sample_rate_hz"])
    segment = EegSegment(
        tuple(labels), rate, samples,
        SegmentMeta(meta["user"], meta["query"], meta["judgment"], meta["paragraph"],
                    float(meta["dwell_seconds"])),
    )
    # Dwell must agree with the stored sample count to within one sample.
    if abs(segment.meta.dwell_seconds * rate - segment.n_samples) > 1.5:
        raise DataError(
            f"{directory}: dwell_seconds {segment.meta.dwell_seconds} inconsistent "
            f"with {segment.n_samples} samples at {rate} Hz"
        )
    return segment


def load_segment_extra_meta(directory: str | Path) -> dict:
    """Return meta.json keys beyond the standard schema (e.g. processing markers)."""
    meta = json.loads((Path(directory) / "meta.json").read_text(encoding="utf-8"))
    return {k: v for k, v in meta.items() if k not in _META_KEYS}


# ---------------------------------------------------------------------------
# Paragraph-event JSONL files
# ---------------------------------------------------------------------------

def save_events(path: str | Path, events: list[ParagraphEvent]) -> Path:
    lines = []
    for ev in events:
        record = {"paragraph": ev.paragraph, "start_s": ev.start_s, "end_s": ev.end_s}
        if ev.clicked is not None:
            record["clicked"] = ev.clicked
        if ev.annotation is not None:
            record["annotation"] = ev.annotation
        lines.append(json.dumps(record, sort_keys=True, ensure_ascii=False))
    return atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def load_events(path: str | Path) -> list[ParagraphEvent]:
    events = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        try:
            events.append(ParagraphEvent(
                record["paragraph"], float(record["start_s"]), float(record["end_s"]),
                record.get("clicked"), record.get("annotation"),
            ))
        except KeyError as exc:
            raise DataError(f"{path}:{lineno}: missing field {exc}") from exc
    return events
