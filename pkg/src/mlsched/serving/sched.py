"""Request schedulers, vertical scalers and SLA accounting for inference serving."""
from __future__ import annotations

import math
from collections import deque
from collections.abc import Iterable, Mapping, Sequence

from ..batch.contention import resolve_contention
from ..batch.model import ContentionStrategy
from ..control import PiControllerState, clamp
from .model import InferenceService, RequestRecord, UnknownService

Queues = Mapping[str, deque]


def make_queues(services: Iterable[InferenceService]) -> dict[str, deque]:
    return {s.id: deque() for s in services}


def enqueue(request: RequestRecord, queues: Queues) -> None:
    try:
        queues[request.service].append(request)
    except KeyError:
        raise UnknownService(request.service) from None


def risk(service: InferenceService, head: RequestRecord, now: float) -> float:
    """Predicted response time over SLA if the head request went to a GPU now."""
    return (now - head.arrival + service.gpu_time) / service.sla_rt


def gpu_pick(queues: Queues, services: Mapping[str, InferenceService], now: float) -> str | None:
    best, best_risk = None, -math.inf
    for sid in sorted(queues):
        q = queues[sid]
        if not q:
            continue
        r = risk(services[sid], q[0], now)
        if r > best_risk:
            best, best_risk = sid, r
    return best


def gpu_pick_fifo(queues: Queues) -> str | None:
    """Oldest head request across all queues: one merged FIFO."""
    best = None
    for sid in sorted(queues):
        q = queues[sid]
        if q and (best is None or q[0].arrival < queues[best][0].arrival):
            best = sid
    return best


class RoundRobin:
    """Cyclic service order; ``last`` is the index of the previous pick."""

    def __init__(self, order: Sequence[str]):
        self.order = list(order)
        self.last = -1

    def pick(self, eligible) -> str | None:
        n = len(self.order)
        for step in range(1, n + 1):
            i = (self.last + step) % n
            if self.order[i] in eligible:
                self.last = i
                return self.order[i]
        return None


def cpu_pick(queues: Queues, rr: RoundRobin) -> str | None:
    return rr.pick({sid for sid, q in queues.items() if q})


def aggregate(rts: Sequence[float], aggregator: str) -> float:
    if not rts:
        raise ValueError("cannot aggregate an empty window")
    if aggregator == "max":
        return max(rts)
    if aggregator == "p95":
        ordered = sorted(rts)
        return ordered[max(math.ceil(0.95 * len(ordered)), 1) - 1]
    raise ValueError(f"unknown aggregator {aggregator!r}")


def vscale_step(service: InferenceService, node_cores: float, measured_rt: float | None,
                current_grant: float, pi: PiControllerState, gpu_share: float,
                setpoint_ratio: float = 0.8) -> float:
    """GPU-aware core demand for one CPU executor.

    The proportional correction is discounted by ``1 - gpu_share`` so a window
    where GPUs absorbed the traffic does not read as spare CPU.
    """
    hi = min(pi.u_max, node_cores)
    if measured_rt is None:
        return clamp(pi.u_min + 0.95 * (current_grant - pi.u_min), pi.u_min, hi)
    error = (measured_rt - setpoint_ratio * service.sla_rt) / service.sla_rt
    return min(pi.update(error, current_grant, scale=1.0 - gpu_share), hi)


def rule_step(service: InferenceService, p95: float | None, current: float, free: float,
              step: float = 0.5, floor: float = 0.5) -> float:
    """Threshold rule: +step over SLA (if the node has room), -step under half of it."""
    if p95 is None:
        return current
    if p95 > service.sla_rt and free >= step - 1e-12:
        return current + step
    if p95 < 0.5 * service.sla_rt:
        return max(current - step, floor)
    return current


def supervise(demands: Sequence[float], node_cores: float) -> list[float]:
    """Proportional scale-down of a node's CPU demands to its capacity."""
    return resolve_contention([(str(i), d, 0.0) for i, d in enumerate(demands)],
                              node_cores, ContentionStrategy.PROPORTIONAL)


def measure_sla(requests: Iterable[RequestRecord], services: Mapping[str, InferenceService],
                end: float, start: float = 0.0) -> dict:
    """Tumbling-window SLA accounting keyed on completion time.

    A window violates when its aggregate response time exceeds the service's
    ``sla_rt``; empty windows are reported with ``agg_rt`` None.
    """
    by_service: dict[str, list[RequestRecord]] = {sid: [] for sid in services}
    for req in requests:
        if req.finish is not None and start <= req.finish < end + 1e-12:
            by_service[req.service].append(req)
    windows = []
    summary = {}
    for sid in sorted(services):
        svc = services[sid]
        count = max(math.ceil((end - start) / svc.window - 1e-9), 1)
        buckets: list[list[float]] = [[] for _ in range(count)]
        for req in by_service[sid]:
            k = min(int((req.finish - start) // svc.window), count - 1)
            buckets[k].append(req.response_time)
        violations = 0
        for k, rts in enumerate(buckets):
            agg = aggregate(rts, svc.aggregator) if rts else None
            bad = agg is not None and agg > svc.sla_rt
            violations += bad
            windows.append({"service": sid, "window_start": start + k * svc.window,
                            "agg_rt": agg, "violated": bad, "count": len(rts)})
        rts_all = [r.response_time for r in by_service[sid]]
        summary[sid] = {"violations": violations, "windows": count,
                        "max_rt": max(rts_all) if rts_all else None,
                        "completed": len(rts_all)}
    return {"windows": windows, "services": summary,
            "violations": sum(s["violations"] for s in summary.values())}
