"""Trace events emitted by all solvers, and a stopwatch that ignores sink time."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

EVENT_KINDS = (
    "start",
    "warmup_done",
    "step_accepted",
    "step_backtracked",
    "iterate",
    "finished",
)


@dataclass
class TraceEvent:
    kind: str
    n: int
    passes: float
    grad_norm: float
    elapsed: float
    w: np.ndarray = field(repr=False)
    hessian_units: int = 0
    decrement: float = float("nan")
    decrement_after: float = float("nan")
    m: int = 0
    note: str = ""

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown trace event kind {self.kind!r}")


class Stopwatch:
    """Wall clock for a solver run; time spent inside :meth:`paused` is excluded."""

    def __init__(self):
        self._start = time.perf_counter()
        self._paused = 0.0

    def elapsed(self) -> float:
        return time.perf_counter() - self._start - self._paused

    def paused(self):
        return _Pause(self)


class _Pause:
    def __init__(self, watch: Stopwatch):
        self.watch = watch

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.watch._paused += time.perf_counter() - self.t0
        return False


class Recorder:
    """Collects events and forwards them to an optional sink callable."""

    def __init__(self, N: int, sink=None):
        self.N = N
        self.sink = sink
        self.events: list[TraceEvent] = []
        self.clock = Stopwatch()

    def emit(self, kind, work, n, w, grad_norm=float("nan"), **extra) -> TraceEvent:
        event = TraceEvent(
            kind=kind,
            n=n,
            passes=work.grad_units / self.N,
            grad_norm=float(grad_norm),
            elapsed=self.clock.elapsed(),
            w=np.array(w, dtype=np.float64, copy=True),
            hessian_units=work.hessian_units,
            **extra,
        )
        self.events.append(event)
        if self.sink is not None:
            with self.clock.paused():
                self.sink(event)
        return event
