"""Discrete-event engine and cluster model shared by every policy.

Time is simulated seconds held as floats. Events are ordered by
``(time, insertion sequence)`` so equal timestamps are processed FIFO and a run
is fully deterministic: the engine itself draws no random numbers.
"""
from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

CAPACITY_TOL = 1e-9


class SchedulingError(ValueError):
    """Raised when a policy tries to schedule an event in the past."""


@dataclass(frozen=True)
class NodeSpec:
    id: str
    cores: float
    memory: float
    gpus: int = 0

    def __post_init__(self):
        if not self.cores > 0:
            raise ValueError(f"node {self.id}: cores must be > 0, got {self.cores}")
        if not self.memory > 0:
            raise ValueError(f"node {self.id}: memory must be > 0, got {self.memory}")
        if self.gpus < 0:
            raise ValueError(f"node {self.id}: gpus must be >= 0, got {self.gpus}")


@dataclass
class ExecutorState:
    id: str
    node: str
    device: str = "cpu"  # "cpu" | "gpu"
    granted_cores: float = 0.0
    granted_memory: float = 0.0
    assignment: Any = None
    busy: bool = False


@dataclass
class EventRecord:
    time: float
    kind: str
    payload: Any = None


@dataclass
class MetricsLog:
    """Append-only output of one run.

    ``samples`` holds ``(time, series, value)`` triples; ``records`` holds
    completed-entity rows grouped by kind (``"job"``, ``"request"``, ...).
    """

    samples: list[tuple[float, str, float]] = field(default_factory=list)
    records: dict[str, list[dict]] = field(default_factory=lambda: defaultdict(list))

    def sample(self, time: float, series: str, value: float) -> None:
        self.samples.append((time, series, value))

    def record(self, kind: str, **fields) -> None:
        self.records[kind].append(fields)

    def series(self, name: str) -> list[tuple[float, float]]:
        return [(t, v) for t, s, v in self.samples if s == name]

    def rows(self, kind: str) -> list[dict]:
        return list(self.records.get(kind, ()))


class Engine:
    """Single-threaded event loop with an optional periodic control tick.

    Handlers are registered per event kind with :meth:`on`. Observers added
    with :meth:`observe` run after every processed event and are how tests
    check invariants at event boundaries.
    """

    def __init__(self):
        self.now = 0.0
        self.log = MetricsLog()
        self._queue: list[tuple[float, int, EventRecord]] = []
        self._seq = 0
        self._handlers: dict[str, Callable[[EventRecord], None]] = {}
        self._observers: list[Callable[[EventRecord], None]] = []
        self._last_time = -math.inf
        self.processed = 0
        # control tick loop
        self._tick_period: float | None = None
        self._tick_active: Callable[[], bool] = lambda: False
        self._tick_phases: tuple[Callable[[float], None], ...] = ()
        self._tick_pending = False
        self.tick_count = 0

    def on(self, kind: str, handler: Callable[[EventRecord], None]) -> None:
        self._handlers[kind] = handler

    def observe(self, observer: Callable[[EventRecord], None]) -> None:
        self._observers.append(observer)

    def schedule(self, event: EventRecord) -> None:
        if event.time < self.now:
            raise SchedulingError(
                f"event {event.kind!r} at t={event.time} precedes now={self.now}"
            )
        heapq.heappush(self._queue, (event.time, self._seq, event))
        self._seq += 1

    def at(self, time: float, kind: str, payload: Any = None) -> EventRecord:
        event = EventRecord(time, kind, payload)
        self.schedule(event)
        return event

    def peek(self) -> EventRecord | None:
        return self._queue[0][2] if self._queue else None

    def __len__(self):
        return len(self._queue)

    def run_until(self, end: float) -> MetricsLog:
        while self._queue and self._queue[0][0] <= end:
            time, _, event = heapq.heappop(self._queue)
            assert time >= self._last_time
            self._last_time = time
            self.now = time
            handler = self._handlers.get(event.kind)
            if handler is not None:
                handler(event)
            self.processed += 1
            for observer in self._observers:
                observer(event)
        if math.isfinite(end):
            self.now = max(self.now, end)
        return self.log

    # -- periodic control -------------------------------------------------

    def control_tick_loop(
        self,
        period: float,
        active: Callable[[], bool],
        phases: Iterable[Callable[[float], None]],
    ) -> None:
        """Fire ``phases`` in order every ``period`` seconds while ``active()``.

        Ticks sit on the grid ``k * period``. When nothing is active the loop
        goes idle; call :meth:`wake` after activating an entity to resume it.
        """
        if not period > 0:
            raise ValueError(f"control period must be > 0, got {period}")
        self._tick_period = float(period)
        self._tick_active = active
        self._tick_phases = tuple(phases)
        self.on("control-tick", self._on_tick)
        self.wake()

    def wake(self) -> None:
        if self._tick_period is None or self._tick_pending or not self._tick_active():
            return
        k = math.ceil(self.now / self._tick_period - 1e-9)
        self._tick_pending = True
        self.at(max(k * self._tick_period, self.now), "control-tick", k)

    def _on_tick(self, event: EventRecord) -> None:
        self._tick_pending = False
        if not self._tick_active():
            return
        self.tick_count += 1
        for phase in self._tick_phases:
            phase(self.now)
        k = event.payload + 1
        self._tick_pending = True
        self.at(k * self._tick_period, "control-tick", k)
