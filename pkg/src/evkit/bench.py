"""Throughput benchmark for the channel-computation paths.

Times only the accumulation kernel on pre-loaded events (no file I/O)
and reports the median over repeats in kilo-events per second.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from . import evrep
from .stream import EventStream, StreamError


@dataclass(frozen=True)
class BenchReport:
    events_processed: int
    wall_time: float  # seconds, median over repeats
    throughput: float  # kilo-events per second
    path: str  # reference | streaming
    backend: str  # compiled | python

    def as_text(self) -> str:
        return (f"path={self.path}\n"
                f"backend={self.backend}\n"
                f"events={self.events_processed}\n"
                f"wall_time_s={self.wall_time:.6f}\n"
                f"throughput_kev_s={self.throughput:.2f}\n")


def synthetic_stream(n_events: int, width: int = 128, height: int = 128,
                     duration_us: int = 100_000, seed: int = 0) -> EventStream:
    """Random but realistic load for benchmarking and property sweeps."""
    rng = np.random.default_rng(seed)
    t = np.sort(rng.integers(0, duration_us + 1, n_events, dtype=np.int64))
    x = rng.integers(0, width, n_events, dtype=np.int32)
    y = rng.integers(0, height, n_events, dtype=np.int32)
    p = rng.choice(np.array([-1, 1], np.int8), n_events)
    return EventStream(width, height, t, x, y, p, 0, duration_us)


def run_benchmark(stream: EventStream, path: str = "streaming",
                  repeat: int = 3, mode: str = "literal",
                  backend: str = "auto") -> BenchReport:
    if repeat < 1:
        raise StreamError("repeat must be >= 1")
    if path == "streaming":
        evrep._resolve_kernel(backend)  # fail early on bad backend
        def fn(s):
            return evrep.compute_evrep_streaming(s, mode, backend)
        used = evrep.KERNEL_BACKEND if backend == "auto" else backend
    elif path == "reference":
        def fn(s):
            return evrep.compute_evrep(s, mode)
        used = "python"
    else:
        raise StreamError(f"unknown benchmark path {path!r}")

    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(stream)
        times.append(time.perf_counter() - start)
    wall = statistics.median(times)
    return BenchReport(len(stream), wall, len(stream) / wall / 1000.0, path, used)
