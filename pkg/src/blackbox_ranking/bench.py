"""Wall-clock timing of a forward and backward AP-loss pass."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import numpy as np

from .losses import ap_loss

logger = logging.getLogger(__name__)

DEFAULT_LENGTHS = (100_000, 1_000_000, 10_000_000, 100_000_000)

# rough peak working set of one ap_loss call, bytes per element
_BYTES_PER_ELEMENT = 120


@dataclass(frozen=True)
class BenchRow:
    length: int
    median_ms: float
    p10_ms: float
    p90_ms: float
    alpha: float


def available_memory() -> int | None:
    try:
        return os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return None


def time_ap_loss(
    length: int,
    repeats: int = 5,
    positives_fraction: float = 0.01,
    alpha: float = 0.15,
    lam: float = 0.5,
    seed: int = 0,
) -> BenchRow:
    """Time ``repeats`` calls of :func:`ap_loss` (value and gradient) on synthetic scores."""
    rng = np.random.default_rng(seed)
    scores = rng.normal(size=length)
    labels = rng.random(length) < positives_fraction
    labels[rng.integers(length)] = True
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        ap_loss(scores, labels, alpha, lam)
        times.append(time.perf_counter() - start)
    ms = 1e3 * np.asarray(times)
    return BenchRow(
        length,
        float(np.median(ms)),
        float(np.percentile(ms, 10)),
        float(np.percentile(ms, 90)),
        alpha,
    )


def run_bench(
    lengths=DEFAULT_LENGTHS,
    repeats: int = 5,
    positives_fraction: float = 0.01,
    alphas=(0.15, 0.0),
    lam: float = 0.5,
    seed: int = 0,
) -> list[BenchRow]:
    """Benchmark every length for every margin, skipping lengths that would not fit in memory."""
    rows = []
    for length in lengths:
        length = int(length)
        avail = available_memory()
        if avail is not None and length * _BYTES_PER_ELEMENT > avail:
            logger.warning("skipping length %d: needs ~%d MB, %d MB available", length,
                           length * _BYTES_PER_ELEMENT >> 20, avail >> 20)
            continue
        for alpha in alphas:
            try:
                rows.append(time_ap_loss(length, repeats, positives_fraction, alpha, lam, seed))
            except MemoryError:
                logger.warning("skipping length %d: out of memory", length)
                break
    return rows
