"""Discrete-event core: a totally ordered event queue and a clock."""

from __future__ import annotations

import heapq
import itertools
from typing import Callable, Optional, TextIO


class EventQueue:
    """Min-heap keyed on ``(time, sequence)``; the sequence breaks ties by insertion order."""

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()

    def push(self, time: float, fn: Callable, args: tuple = ()) -> int:
        seq = next(self._seq)
        heapq.heappush(self._heap, (time, seq, fn, args))
        return seq

    def pop(self):
        time, seq, fn, args = heapq.heappop(self._heap)
        return time, seq, fn, args

    def peek_time(self) -> Optional[float]:
        return self._heap[0][0] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)


class Simulator:
    def __init__(self, trace: Optional[TextIO] = None):
        self.queue = EventQueue()
        self.now = 0.0
        self.trace = trace
        self.processed = 0

    def schedule(self, delay: float, fn: Callable, *args) -> None:
        if delay < 0:
            raise ValueError(f"cannot schedule into the past (delay={delay})")
        self.queue.push(self.now + delay, fn, args)

    def schedule_at(self, time: float, fn: Callable, *args) -> None:
        if time < self.now:
            raise ValueError(f"cannot schedule at {time} before now={self.now}")
        self.queue.push(time, fn, args)

    def run(self, until: float) -> None:
        queue = self.queue
        while queue and queue.peek_time() <= until:
            self.now, _, fn, args = queue.pop()
            self.processed += 1
            fn(*args)
        self.now = max(self.now, until)

    def log(self, kind: str, src, dst, request_id) -> None:
        if self.trace is not None:
            rid = "-" if request_id is None else request_id
            self.trace.write(f"{self.now:.6f}\t{kind}\t{src}\t{dst}\t{rid}\n")
