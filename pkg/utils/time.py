# utils/time.py
# Wall-clock measurement and duration formatting utilities.

from __future__ import annotations

import statistics
import time
from typing import Callable


class Stopwatch:
    """Context manager measuring elapsed wall time with perf_counter."""

    def __init__(self):
        self.start = 0.0
        self.seconds = 0.0

    def __enter__(self) -> "Stopwatch":
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc) -> None:
        self.seconds = time.perf_counter() - self.start


def median_step_seconds(step: Callable[[], object], warmup: int, timed: int) -> float:
    """
    Runs step() warmup times untimed, then timed times, and returns the median duration.
    """
    if timed < 1:
        raise ValueError("At least one timed step is required.")
    for _ in range(warmup):
        step()
    samples = []
    for _ in range(timed):
        with Stopwatch() as watch:
            step()
        samples.append(watch.seconds)
    return statistics.median(samples)


def format_duration(seconds: float) -> str:
    """
    Formats a duration in seconds into a short human-readable string,
    e.g. '850ms', '12.3s', '4m 05s', '1h 02m'.
    """
    if seconds < 0:
        return "N/A"
    if seconds < 1:
        return f"{seconds * 1000:.0f}ms"
    if seconds < 60:
        return f"{seconds:.1f}s"
    minutes, secs = divmod(int(round(seconds)), 60)
    if minutes < 60:
        return f"{minutes}m {secs:02d}s"
    hours, minutes = divmod(minutes, 60)
    return f"{hours}h {minutes:02d}m"

