"""Bracketed wall-clock accumulation per labelled kernel."""
from __future__ import annotations

import time
from contextlib import contextmanager

LABELS = ("tensor-l", "tensor-m", "tensor-r", "diag", "precond", "solver", "stencil", "axpy")


class Timer:
    """Accumulates ``label -> [calls, seconds]`` using a monotonic clock."""

    def __init__(self):
        self.data: dict[str, list] = {}

    @contextmanager
    def section(self, label: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.add(label, time.perf_counter() - t0)

    def add(self, label: str, seconds: float, count: int = 1):
        entry = self.data.setdefault(label, [0, 0.0])
        entry[0] += count
        entry[1] += seconds

    def merge(self, other: "Timer | dict | None"):
        if other is None:
            return self
        items = other.data.items() if isinstance(other, Timer) else other.items()
        for label, (count, seconds) in items:
            self.add(label, seconds, count)
        return self

    def count(self, label: str) -> int:
        return self.data.get(label, [0, 0.0])[0]

    def seconds(self, label: str) -> float:
        return self.data.get(label, [0, 0.0])[1]

    def as_dict(self) -> dict[str, tuple[int, float]]:
        return {k: (v[0], v[1]) for k, v in self.data.items()}

    def __repr__(self):
        return f"Timer({self.as_dict()!r})"


@contextmanager
def maybe(timer: Timer | None, label: str):
    if timer is None:
        yield
    else:
        with timer.section(label):
            yield
