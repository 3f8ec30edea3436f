"""Deterministic event queue: timestamp order, ties broken by insertion order."""

from __future__ import annotations

import heapq
from typing import Any, Callable


class EventQueue:
    def __init__(self, now: int = 0):
        self.now = now
        self._heap: list[tuple[int, int, Callable, tuple]] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: int, fn: Callable[..., Any], *args) -> int:
        if time < self.now:
            raise ValueError(f"cannot schedule in the past ({time} < {self.now})")
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, fn, args))
        return self._seq

    def peek_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def run_until(self, t_end: int) -> None:
        """Process every event with time <= t_end; the clock ends at t_end."""
        heap = self._heap
        pop = heapq.heappop
        while heap and heap[0][0] <= t_end:
            time, _, fn, args = pop(heap)
            self.now = time
            fn(*args)
        self.now = max(self.now, t_end)

    def clear(self) -> None:
        self._heap.clear()
