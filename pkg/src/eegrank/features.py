"""Sliding-window spectral band-energy features.

For every window length t the segment is cut into 1-second-stride windows;
each window row gets an unnormalized DFT, the squared magnitudes are summed
over the five canonical EEG bands, and the per-window band energies are
reduced with order statistics (the g-th largest and g-th smallest across
windows).  Taking order statistics instead of means keeps short informative
stretches visible regardless of where they occur, while higher ranks shrug
off single-window outliers.

The concatenated feature vector has fixed length 2 * |g| * |T| * ch * 5,
independent of segment duration: window series shorter than an order rank
contribute zeros.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError
from .segments import EegSegment
from .util import atomic_write_text

#: Band-table mode: map spectral bin i (1-based) to (i-1)/t Hz and sum
#: half-open frequency ranges.  Physically correct at every window length.
MODE_RESOLUTION_AWARE = "resolution-aware"
#: Band-table mode: sum the fixed 1-based column intervals of the band table
#: (valid only for 1 s windows, where one column equals one hertz; boundary
#: columns are shared by adjacent bands).
MODE_LITERAL = "paper-literal"

BAND_MODES = (MODE_RESOLUTION_AWARE, MODE_LITERAL)


@dataclass(frozen=True)
class Band:
    """A named frequency band plus its fixed 1-based spectral column interval."""

    name: str
    lo_hz: float
    hi_hz: float
    columns: tuple[int, int]  # 1-based, inclusive on both ends


@dataclass(frozen=True)
class BandTable:
    bands: tuple[Band, ...]

    def __post_init__(self):
        if len(self.bands) != 5:
            raise ConfigurationError(f"band table needs exactly 5 bands, got {len(self.bands)}")
        names = tuple(b.name for b in self.bands)
        if names != ("delta", "theta", "alpha", "beta", "gamma"):
            raise ConfigurationError(f"bands must be delta..gamma in order, got {names}")
        for b in self.bands:
            if not (0 < b.lo_hz < b.hi_hz):
                raise ConfigurationError(f"bad band range {b.name}: [{b.lo_hz}, {b.hi_hz}]")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(b.name for b in self.bands)

    @property
    def max_hz(self) -> float:
        return max(b.hi_hz for b in self.bands)


DEFAULT_BANDS = BandTable((
    Band("delta", 0.5, 4.0, (2, 5)),
    Band("theta", 4.0, 8.0, (5, 9)),
    Band("alpha", 8.0, 12.0, (9, 13)),
    Band("beta", 12.0, 30.0, (13, 31)),
    Band("gamma", 30.0, 45.0, (31, 46)),
))


@dataclass(frozen=True)
class StatConfig:
    """Window lengths (seconds), order ranks, and the sliding stride."""

    window_lengths: tuple[int, ...] = (1, 2, 4, 8)
    order_ranks: tuple[int, ...] = (1, 2, 4, 8)
    window_stride_s: int = 1

    def __post_init__(self):
        for name, values in (("window_lengths", self.window_lengths),
                             ("order_ranks", self.order_ranks)):
            values = tuple(int(v) for v in values)
            if not values:
                raise ConfigurationError(f"{name} must be nonempty")
            if any(v <= 0 for v in values):
                raise ConfigurationError(f"{name} must be positive: {values}")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigurationError(f"{name} must be strictly increasing: {values}")
            object.__setattr__(self, name, values)
        if int(self.window_stride_s) < 1:
            raise ConfigurationError("window_stride_s must be a positive integer")
        object.__setattr__(self, "window_stride_s", int(self.window_stride_s))


DEFAULT_STATS = StatConfig()


def feature_length(cfg: StatConfig, n_channels: int) -> int:
    return 2 * len(cfg.order_ranks) * len(cfg.window_lengths) * n_channels * 5


def split_windows(segment: EegSegment, t: int, stride_s: int = 1) -> list[np.ndarray]:
    """All t-second windows at offsets 0, stride, 2*stride, ... seconds.

    The last window is the one still fully inside the segment; a segment
    shorter than t yields no windows.
    """
    t = int(t)
    if t <= 0:
        raise ConfigurationError(f"window length must be positive, got {t}")
    rate = segment.sample_rate_hz
    sr = round(rate)
    if abs(rate - sr) > 1e-9:
        raise ConfigurationError(f"integer sample rate required, got {rate}")
    length = t * sr
    step = int(stride_s) * sr
    n = segment.n_samples
    if n < length:
        return []
    count = (n - length) // step + 1
    return [segment.samples[:, i * step : i * step + length] for i in range(count)]


def window_spectrum(window: np.ndarray) -> np.ndarray:
    """Per-channel unnormalized DFT magnitudes; column 1 is the DC bin."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[1] == 0:
        raise DataError(f"window must be nonempty 2-D, got shape {window.shape}")
    return np.abs(np.fft.fft(window, axis=1))


def energy_density(spectrum: np.ndarray) -> np.ndarray:
    """Squared magnitudes (V^2 per spectral bin)."""
    return np.square(spectrum)


def _band_slice(band: Band, t: int, mode: str) -> slice:
    if mode == MODE_LITERAL:
        lo, hi = band.columns
        return slice(lo - 1, hi)  # 1-based inclusive interval -> 0-based half-open
    # Bins m (0-based) whose frequency m/t lies in [lo_hz, hi_hz).
    start = int(math.ceil(band.lo_hz * t - 1e-9))
    stop = int(math.ceil(band.hi_hz * t - 1e-9))
    return slice(start, stop)


def band_energies(density: np.ndarray, bands: BandTable = DEFAULT_BANDS, t: int = 1,
                  mode: str = MODE_RESOLUTION_AWARE) -> np.ndarray:
    """Sum the energy-density columns of each band; returns a ch x 5 matrix.

    Only the low-frequency columns named by the band table are counted; the
    mirrored high bins of a real signal's spectrum are left out, matching the
    fixed column intervals.
    """
    if mode not in BAND_MODES:
        raise ConfigurationError(f"unknown band mode {mode!r}, expected one of {BAND_MODES}")
    if mode == MODE_LITERAL and t != 1:
        raise ConfigurationError("the fixed column intervals only apply to 1 s windows")
    density = np.asarray(density)
    n_columns = density.shape[1]
    if n_columns < 46 * t:
        raise ConfigurationError(
            f"{n_columns} spectral columns cannot cover 45 Hz at t={t} "
            "(sample rate below 90 Hz?)"
        )
    out = np.empty((density.shape[0], 5), dtype=np.float64)
    for c, band in enumerate(bands.bands):
        out[:, c] = density[:, _band_slice(band, t, mode)].sum(axis=1)
    return out


def combine_stats(series: list[np.ndarray], order_ranks, shape: tuple[int, int] | None = None):
    """Order statistics across a window series.

    Returns ``(g_max, g_min)``, each of shape ``(ch, bands, |g|)`` where
    ``g_max[r, c, j]`` is the g_j-th largest of the series at (r, c) and
    ``g_min`` the g_j-th smallest.  Whenever the series holds fewer than g_j
    windows both statistics are zero.
    """
    order_ranks = tuple(int(g) for g in order_ranks)
    n = len(series)
    if n == 0:
        if shape is None:
            raise DataError("need an explicit shape for an empty window series")
    else:
        shape = series[0].shape
    g_max = np.zeros(shape + (len(order_ranks),), dtype=np.float64)
    g_min = np.zeros_like(g_max)
    if n:
        stacked = np.sort(np.stack(series, axis=0), axis=0)  # ascending along windows
        for j, g in enumerate(order_ranks):
            if g <= n:
                g_max[..., j] = stacked[n - g]
                g_min[..., j] = stacked[g - 1]
    return g_max, g_min


def extract_features(segment: EegSegment, cfg: StatConfig = DEFAULT_STATS,
                     bands: BandTable = DEFAULT_BANDS,
                     mode: str = MODE_RESOLUTION_AWARE) -> np.ndarray:
    """Full feature vector for one segment.

    Canonical ordering, outermost to innermost: window length t (ascending),
    statistic kind (max then min), order rank g (ascending), channel (input
    order), band (delta..gamma).
    """
    ch = segment.n_channels
    parts = []
    for t in cfg.window_lengths:
        mats = [
            band_energies(energy_density(window_spectrum(w)), bands, t, mode)
            for w in split_windows(segment, t, cfg.window_stride_s)
        ]
        g_max, g_min = combine_stats(mats, cfg.order_ranks, shape=(ch, 5))
        # (ch, 5, |g|) -> (|g|, ch, 5) so raveling yields g, channel, band order.
        parts.append(np.transpose(g_max, (2, 0, 1)).ravel())
        parts.append(np.transpose(g_min, (2, 0, 1)).ravel())
    return np.concatenate(parts)


def feature_layout(cfg: StatConfig, bands: BandTable, channel_labels) -> list[dict]:
    """Column metadata in canonical order: index -> (t, stat, g, channel, band)."""
    columns = []
    index = 0
    for t in cfg.window_lengths:
        for stat in ("max", "min"):
            for g in cfg.order_ranks:
                for channel in channel_labels:
                    for band in bands.names:
                        columns.append({"index": index, "t": t, "stat": stat,
                                        "g": g, "channel": channel, "band": band})
                        index += 1
    return columns


# ---------------------------------------------------------------------------
# Feature matrix files: CSV rows plus a JSON column descriptor
# ---------------------------------------------------------------------------

def write_feature_csv(path: str | Path, rows: list[tuple[str, np.ndarray]]) -> Path:
    """One line per segment: segment id, then the features in canonical order."""
    lines = []
    for segment_id, values in rows:
        if "," in segment_id:
            raise DataError(f"segment id {segment_id!r} may not contain commas")
        lines.append(segment_id + "," + ",".join(repr(float(v)) for v in values))
    return atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_feature_csv(path: str | Path) -> list[tuple[str, np.ndarray]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as handle:
        for record in csv.reader(handle):
            if not record:
                continue
            rows.append((record[0], np.array([float(v) for v in record[1:]])))
    return rows


def write_feature_descriptor(path: str | Path, cfg: StatConfig, bands: BandTable,
                             channel_labels, mode: str) -> Path:
    descriptor = {
        "version": 1,
        "band_mode": mode,
        "window_lengths": list(cfg.window_lengths),
        "order_ranks": list(cfg.order_ranks),
        "window_stride_s": cfg.window_stride_s,
        "channels": list(channel_labels),
        "bands": [{"name": b.name, "lo_hz": b.lo_hz, "hi_hz": b.hi_hz,
                   "columns": list(b.columns)} for b in bands.bands],
        "feature_length": feature_length(cfg, len(channel_labels)),
        "columns": feature_layout(cfg, bands, channel_labels),
    }
    return atomic_write_text(path, json.dumps(descriptor, indent=2, sort_keys=True) + "\n")
