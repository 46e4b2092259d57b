"""RSS traces, windowed variance frames and the calibration split."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from os import PathLike

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .geometry import GeometryError, LinkSet

DEFAULT_WINDOW = 4


class TraceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RssTrace:
    """Dense per-link RSS series.

    ``samples[l, t]`` is the RSS in dBm on link ``l`` at sample index ``t``.
    ``gaps`` maps link index to the sample indices that were filled in rather
    than measured.
    """

    links: LinkSet
    samples: np.ndarray
    sample_interval: float = 1.0
    gaps: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[0] != len(self.links):
            raise TraceError(f"samples must have shape (L={len(self.links)}, T)")
        if not self.sample_interval > 0:
            raise TraceError("sample interval must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def gap_count(self) -> int:
        return sum(len(v) for v in self.gaps.values())


@dataclass(frozen=True)
class VarianceFrame:
    t: int
    y: np.ndarray


@dataclass(frozen=True, eq=False)
class VarianceFrames:
    """A sequence of variance frames stored as one ``(n_frames, L)`` array.

    Row ``i`` is the frame at sample index ``t[i]``.
    """

    t: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=np.int64).reshape(-1)
        y = np.array(self.y, dtype=float)
        if y.ndim != 2 or y.shape[0] != t.size:
            raise TraceError("frames need y of shape (len(t), L)")
        t.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return int(self.t.size)

    def __getitem__(self, i) -> VarianceFrame | "VarianceFrames":
        if isinstance(i, (int, np.integer)):
            return VarianceFrame(int(self.t[i]), self.y[i])
        return VarianceFrames(self.t[i], self.y[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def n_links(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class FrameSplit:
    calibration: VarianceFrames
    realtime: VarianceFrames

    @property
    def M(self) -> int:
        return len(self.calibration)


def frames_matrix(frames) -> np.ndarray:
    """Coerce frames (VarianceFrames, list of VarianceFrame, or array) to ``(n, L)``."""
    if isinstance(frames, VarianceFrames):
        return frames.y
    if isinstance(frames, (list, tuple)) and frames and isinstance(frames[0], VarianceFrame):
        return np.vstack([f.y for f in frames])
    return np.atleast_2d(np.asarray(frames, dtype=float))


def parse_trace(
    path: str | PathLike, links: LinkSet, sample_interval: float = 1.0
) -> RssTrace:
    """Read a ``t,tx,rx,rss_dbm`` CSV into a dense trace.

    A sample missing for a link is filled with that link's previous value (or
    its first measured value if the gap is at the start) and recorded in
    ``RssTrace.gaps``.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"t", "tx", "rx", "rss_dbm"} <= set(reader.fieldnames):
            raise TraceError(f"{path}: expected header t,tx,rx,rss_dbm")
        last_t = -1
        for lineno, r in enumerate(reader, start=2):
            t = int(r["t"])
            if t < 0:
                raise TraceError(f"{path}:{lineno}: negative sample index")
            if t < last_t:
                raise TraceError(f"{path}:{lineno}: timestamps not monotone ({t} after {last_t})")
            last_t = t
            try:
                li = links.index_of(int(r["tx"]), int(r["rx"]))
            except GeometryError as e:
                raise TraceError(f"{path}:{lineno}: unknown link: {e}") from None
            rows.append((t, li, float(r["rss_dbm"])))
    if not rows:
        raise TraceError(f"{path}: empty trace")

    T = rows[-1][0] + 1
    L = len(links)
    samples = np.full((L, T), np.nan)
    for t, li, v in rows:
        if not np.isnan(samples[li, t]):
            raise TraceError(f"{path}: duplicate sample for link {li} at t={t}")
        samples[li, t] = v

    gaps = {}
    for li in range(L):
        row = samples[li]
        missing = np.flatnonzero(np.isnan(row))
        if missing.size == 0:
            continue
        if missing.size == T:
            raise TraceError(f"{path}: link {li} has no samples")
        gaps[li] = missing.tolist()
        # hold-last fill; leading gaps take the first measured value
        idx = np.where(np.isnan(row), 0, np.arange(T))
        np.maximum.accumulate(idx, out=idx)
        first = np.flatnonzero(~np.isnan(row))[0]
        idx[:first] = first
        samples[li] = row[idx]
    return RssTrace(links, samples, sample_interval, gaps)


def write_trace(trace: RssTrace, path: str | PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "tx", "rx", "rss_dbm"])
        tx = trace.links.tx.tolist()
        rx = trace.links.rx.tolist()
        for t in range(trace.n_samples):
            col = trace.samples[:, t].tolist()
            for li in range(len(tx)):
                w.writerow([t, tx[li], rx[li], repr(col[li])])


def windowed_variance(trace: RssTrace | np.ndarray, m: int = DEFAULT_WINDOW) -> VarianceFrames:
    """Sliding-window (stride 1) unbiased sample variance of every link.

    The frame at sample ``t`` (``t = m-1 .. T-1``) uses samples ``t-m+1 .. t``.
    Accepts an :class:`RssTrace` or a raw ``(L, T)`` array.
    """
    s = trace.samples if isinstance(trace, RssTrace) else np.atleast_2d(np.asarray(trace, float))
    if m < 2:
        raise TraceError("window length must be at least 2")
    T = s.shape[1]
    if T < m:
        raise TraceError(f"trace has {T} samples, fewer than the window length {m}")
    win = sliding_window_view(s, m, axis=1)  # (L, T-m+1, m)
    dev = win - win.mean(axis=2, keepdims=True)
    y = (dev * dev).sum(axis=2) / (m - 1)
    return VarianceFrames(np.arange(m - 1, T), y.T)


def split_calibration(frames: VarianceFrames, calibration_end: int) -> FrameSplit:
    """Frames with ``t <= calibration_end`` calibrate; the rest are real-time."""
    mask = frames.t <= calibration_end
    n_cal = int(mask.sum())
    n_rt = len(frames) - n_cal
    if n_cal < 2:
        raise TraceError(f"calibration segment has {n_cal} frames; need at least 2")
    if n_rt < 2:
        raise TraceError(f"real-time segment has {n_rt} frames; need at least 2")
    return FrameSplit(frames[mask], frames[~mask])
