"""Latency statistics with warm-up separation and fixed-width histograms."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

DEFAULT_BIN_NS = 10
WARMUP_WINDOW = 50
WARMUP_MADS = 3.0


@dataclass
class Histogram:
    width_ns: float
    start_ns: float
    counts: List[int]

    def edges(self) -> List[float]:
        return [self.start_ns + i * self.width_ns for i in range(len(self.counts) + 1)]


@dataclass
class SegmentStats:
    n: int
    mean_ns: float
    median_ns: float
    stddev_ns: float
    max_ns: float
    min_ns: float


@dataclass
class LatencyStats:
    """Steady-state summary; ``n`` and ``histogram`` cover every sample."""

    n: int
    mean_ns: float
    median_ns: float
    stddev_ns: float
    max_ns: float
    min_ns: float
    histogram: Histogram
    warmup_boundary: int
    n_steady: int = 0
    warmup: Optional[SegmentStats] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _segment(x: np.ndarray) -> SegmentStats:
    # population standard deviation
    return SegmentStats(int(x.size), float(x.mean()), float(np.median(x)), float(x.std()),
                        float(x.max()), float(x.min()))


def detect_warmup(x: Sequence[float], window: int = WARMUP_WINDOW, n_mads: float = WARMUP_MADS) -> int:
    """Index of the first steady-state sample.

    The reference level is the median and MAD of the second half of the run.
    The boundary sits just after the last trailing ``window``-sample median
    that strays more than ``n_mads`` MADs from that level, capped at half the
    run.  Runs shorter than two windows are treated as all steady.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2 * window:
        return 0
    tail = x[n // 2:]
    level = np.median(tail)
    mad = np.median(np.abs(tail - level))
    threshold = max(n_mads * mad, 1.0)
    medians = np.median(np.lib.stride_tricks.sliding_window_view(x, window), axis=1)
    bad = np.nonzero(np.abs(medians - level) > threshold)[0]
    if bad.size == 0:
        return 0
    boundary = int(bad[-1]) + window  # window k ends at sample k + window - 1
    return min(boundary, n // 2)


def histogram(x: Sequence[float], width_ns: float = DEFAULT_BIN_NS) -> Histogram:
    if width_ns <= 0:
        raise ValueError("histogram bin width must be positive")
    x = np.asarray(x, dtype=float)
    start = float(np.floor(x.min() / width_ns) * width_ns)
    idx = np.floor((x - start) / width_ns).astype(np.int64)
    counts = np.bincount(idx)
    return Histogram(width_ns, start, [int(c) for c in counts])


def compute_stats(samples, histogram_bin_ns: float = DEFAULT_BIN_NS,
                  warmup: Union[str, int, None] = "auto") -> LatencyStats:
    """Summarize round-trip times.

    ``samples`` are RTTs in ns or objects with an ``rtt_ns`` attribute.
    ``warmup`` is ``"auto"`` (detector), a fixed sample count, or ``None``
    for no warm-up segment.
    """
    values = [getattr(s, "rtt_ns", s) for s in samples]
    if not values:
        raise ValueError("compute_stats needs at least one sample")
    x = np.asarray(values, dtype=float)
    if warmup == "auto":
        boundary = detect_warmup(x)
    elif warmup is None:
        boundary = 0
    else:
        boundary = int(warmup)
        if not 0 <= boundary < x.size:
            raise ValueError(f"warm-up count {boundary} leaves no steady-state samples")
    steady = _segment(x[boundary:])
    return LatencyStats(
        n=int(x.size),
        mean_ns=steady.mean_ns,
        median_ns=steady.median_ns,
        stddev_ns=steady.stddev_ns,
        max_ns=steady.max_ns,
        min_ns=steady.min_ns,
        histogram=histogram(x, histogram_bin_ns),
        warmup_boundary=boundary,
        n_steady=steady.n,
        warmup=_segment(x[:boundary]) if boundary else None,
    )


def format_report(stats: LatencyStats) -> str:
    """One-line summary in the units the hardware results are usually quoted in."""
    return (f"mean {stats.mean_ns / 1000:.3f} µs, median {stats.median_ns / 1000:.3f} µs, "
            f"std {stats.stddev_ns:.0f} ns, max {stats.max_ns / 1000:.2f} µs "
            f"(n={stats.n_steady} steady, warm-up {stats.warmup_boundary})")


def synthetic_trace(n: int = 10_000, warmup: int = 200, seed: int = 0, *, mean_ns: float = 3839.0,
                    std_ns: float = 35.0, warmup_mean_ns: float = 5000.0,
                    warmup_std_ns: float = 150.0) -> np.ndarray:
    """Seeded RTT trace: an elevated warm-up followed by a Gaussian steady state."""
    rng = np.random.default_rng(seed)
    head = rng.normal(warmup_mean_ns, warmup_std_ns, warmup)
    body = rng.normal(mean_ns, std_ns, n - warmup)
    return np.concatenate([head, body])
