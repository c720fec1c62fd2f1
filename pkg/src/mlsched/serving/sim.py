"""Trace-driven inference serving on CPU and GPU executors."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ..control import PiControllerState
from ..core import Engine, EventRecord, MetricsLog, NodeSpec
from .model import InferenceService, RequestRecord, provision_layout
from .sched import (
    RoundRobin,
    aggregate,
    enqueue,
    gpu_pick,
    gpu_pick_fifo,
    make_queues,
    measure_sla,
    rule_step,
    supervise,
    vscale_step,
)

POLICIES = ("roma", "rules")


@dataclass
class ServingPolicy:
    name: str = "roma"
    kp: float = 4.0
    ki: float = 0.2
    u_min: float = 0.25
    setpoint_ratio: float = 0.8
    routing_latency: float = 0.0
    rule_step: float = 0.5
    rule_floor: float = 0.5
    rule_period: float = 10.0
    service_floor: bool = True
    control_window: float | None = 2.0  # None: use each service's SLA window
    floor_ratio: float = 0.75  # share of the SLA one request may take at the floor grant
    cpu_admission: bool = True  # hold a request for a GPU rather than start it on a CPU that cannot meet its SLA

    def __post_init__(self):
        if self.name not in POLICIES:
            raise ValueError(f"unknown serving policy {self.name!r}; valid: {', '.join(POLICIES)}")


@dataclass
class CpuExecutor:
    node: str
    service: str
    grant: float
    pi: PiControllerState
    demand: float = 0.0
    request: RequestRecord | None = None
    work_left: float = 0.0  # core-seconds
    last: float = 0.0
    version: int = 0
    recent: deque = field(default_factory=deque)  # (finish, rt, on_gpu) for this service on this node


@dataclass
class GpuExecutor:
    node: str
    index: int
    models: tuple[str, ...]
    request: RequestRecord | None = None


class ServingSimulation:
    def __init__(self, nodes: Iterable[NodeSpec], services: Sequence[InferenceService],
                 arrivals: Mapping[str, Sequence[float]], policy: ServingPolicy | None = None,
                 control_period: float = 1.0, duration: float = 300.0):
        self.nodes = {n.id: n for n in nodes}
        self.services = {s.id: s for s in services}
        self.order = [s.id for s in services]
        self.policy = policy or ServingPolicy()
        self.period = control_period
        self.duration = duration
        self.engine = Engine()
        self.log: MetricsLog = self.engine.log
        self.queues = make_queues(services)
        self.rr = RoundRobin(self.order)
        self.requests: list[RequestRecord] = []
        self.cpu: dict[tuple[str, str], CpuExecutor] = {}
        self.gpus: list[GpuExecutor] = []
        for node in self.nodes.values():
            layout = provision_layout(services, node)
            for sid, share in layout.cpu_executors.items():
                pi = PiControllerState(kp=self.policy.kp, ki=self.policy.ki,
                                       u_min=min(self.cpu_floor(self.services[sid]), node.cores),
                                       u_max=node.cores,
                                       period=control_period)
                self.cpu[(node.id, sid)] = CpuExecutor(node.id, sid, share, pi, demand=share)
            for i, models in enumerate(layout.gpu_executors):
                self.gpus.append(GpuExecutor(node.id, i, models))
        self._arrivals = {sid: list(arrivals.get(sid, ())) for sid in self.order}
        self._next_arrival = {sid: 0 for sid in self.order}
        self._ticks = 0

        eng = self.engine
        eng.on("request-arrival", self._on_arrival)
        eng.on("cpu-complete", self._on_cpu_complete)
        eng.on("gpu-complete", self._on_gpu_complete)
        for sid in self.order:
            self._schedule_arrival(sid)
        eng.control_tick_loop(control_period, lambda: self.engine.now < self.duration,
                              [self._control_phase, self._supervise_phase, self._apply_phase])

    def cpu_floor(self, svc: InferenceService) -> float:
        """Smallest grant a ROMA CPU executor may shrink to.

        With ``service_floor`` on, this is the share that serves one request
        within the response-time setpoint.
        """
        floor = self.policy.u_min
        if self.policy.service_floor:
            floor = max(floor, svc.cpu_time_1core / (self.policy.floor_ratio * svc.sla_rt))
        return floor

    # -- running ------------------------------------------------------------

    def run(self) -> MetricsLog:
        self.engine.run_until(self.duration)
        now = self.engine.now
        for ex in self.cpu.values():
            self._sync(ex, now)
        for req in self.requests:
            self.log.record("request", id=req.id, service=req.service, arrival=req.arrival,
                            start=req.start, finish=req.finish, device=req.device, node=req.node)
        return self.log

    @property
    def in_flight(self) -> int:
        return sum(1 for r in self.requests if r.finish is None)

    def sla_report(self) -> dict:
        report = measure_sla(self.requests, self.services, self.duration)
        report["mean_cores"] = self.mean_cores()
        cores = {}
        for t, series, v in self.log.samples:
            if series.startswith("cores.") and series != "cores.total":
                sid = series[6:]
                k = int(t // self.services[sid].window)
                cores.setdefault((sid, k), []).append(v)
        for w in report["windows"]:
            k = int(round(w["window_start"] / self.services[w["service"]].window))
            vals = cores.get((w["service"], k), [])
            w["cores"] = sum(vals) / len(vals) if vals else 0.0
        return report

    def mean_cores(self) -> float:
        totals = [v for _, s, v in self.log.samples if s == "cores.total"]
        return sum(totals) / len(totals) if totals else 0.0

    # -- arrivals and dispatch ---------------------------------------------

    def _schedule_arrival(self, sid: str) -> None:
        i = self._next_arrival[sid]
        times = self._arrivals[sid]
        while i < len(times) and times[i] < self.engine.now:
            i += 1
        if i < len(times) and times[i] < self.duration:
            self._next_arrival[sid] = i + 1
            self.engine.at(times[i] + self.policy.routing_latency, "request-arrival",
                           (sid, times[i]))

    def _on_arrival(self, ev: EventRecord) -> None:
        sid, arrival = ev.payload
        req = RequestRecord(len(self.requests), sid, arrival)
        self.requests.append(req)
        enqueue(req, self.queues)
        self._schedule_arrival(sid)
        self._dispatch()

    def _dispatch(self) -> None:
        now = self.engine.now
        queues = self.queues
        for gpu in self.gpus:
            if gpu.request is not None:
                continue
            if self.policy.name == "roma":
                sid = gpu_pick(queues, self.services, now)
            else:
                sid = gpu_pick_fifo(queues)
            if sid is None:
                break
            req = queues[sid].popleft()
            req.start, req.device, req.node = now, "gpu", gpu.node
            gpu.request = req
            self.engine.at(now + self.services[sid].gpu_time, "gpu-complete", gpu)

        while True:
            eligible = {sid for sid in self.order
                        if queues[sid] and self._idle_cpu(sid, queues[sid][0]) is not None}
            if not eligible:
                return
            sid = self.rr.pick(eligible)
            ex = self._idle_cpu(sid, queues[sid][0])
            req = queues[sid].popleft()
            req.start, req.device, req.node = now, "cpu", ex.node
            ex.request = req
            ex.work_left = self.services[sid].cpu_time_1core
            ex.last = now
            self._schedule_cpu(ex)

    def _idle_cpu(self, sid: str, head: RequestRecord) -> CpuExecutor | None:
        best = None
        for nid in self.nodes:
            ex = self.cpu[(nid, sid)]
            if ex.request is None and ex.grant > 0 and (best is None or ex.grant > best.grant):
                best = ex
        if best is not None and self.policy.name == "roma" and self.policy.cpu_admission:
            svc = self.services[sid]
            if self.engine.now - head.arrival + svc.cpu_time_1core / best.grant > svc.sla_rt:
                return None
        return best

    def _schedule_cpu(self, ex: CpuExecutor) -> None:
        ex.version += 1
        if ex.request is not None and ex.grant > 0:
            self.engine.at(ex.last + ex.work_left / ex.grant, "cpu-complete", (ex, ex.version))

    def _sync(self, ex: CpuExecutor, now: float) -> None:
        if ex.request is not None:
            ex.work_left = max(ex.work_left - ex.grant * (now - ex.last), 0.0)
        ex.last = now

    def _complete(self, req: RequestRecord) -> None:
        now = self.engine.now
        req.finish = now
        ex = self.cpu[(req.node, req.service)]
        ex.recent.append((now, now - req.arrival, req.device == "gpu"))

    def _on_cpu_complete(self, ev: EventRecord) -> None:
        ex, version = ev.payload
        if version != ex.version or ex.request is None:
            return
        req = ex.request
        ex.request = None
        ex.work_left = 0.0
        ex.last = self.engine.now
        self._complete(req)
        self._dispatch()

    def _on_gpu_complete(self, ev: EventRecord) -> None:
        gpu: GpuExecutor = ev.payload
        req = gpu.request
        gpu.request = None
        self._complete(req)
        self._dispatch()

    # -- control tick phases ------------------------------------------------

    def _window(self, ex: CpuExecutor, now: float, span: float) -> tuple[list[float], float]:
        keep = max(self.services[ex.service].window, span)
        while ex.recent and ex.recent[0][0] <= now - keep:
            ex.recent.popleft()
        recent = [(rt, g) for t, rt, g in ex.recent if t > now - span]
        rts = [rt for rt, _ in recent]
        share = sum(1 for _, g in recent if g) / len(rts) if rts else 0.0
        return rts, share

    def _control_phase(self, now: float) -> None:
        pol = self.policy
        rules_due = pol.name == "rules" and self._ticks % max(round(pol.rule_period / self.period), 1) == 0
        self._ticks += 1
        for nid, node in self.nodes.items():
            free = node.cores - sum(self.cpu[(nid, sid)].grant for sid in self.order)
            for sid in self.order:
                ex = self.cpu[(nid, sid)]
                svc = self.services[sid]
                if pol.name == "roma":
                    rts, share = self._window(ex, now, pol.control_window or svc.window)
                    measured = aggregate(rts, svc.aggregator) if rts else None
                    ex.demand = vscale_step(svc, node.cores, measured, ex.grant, ex.pi, share,
                                            pol.setpoint_ratio)
                elif rules_due:
                    rts, _ = self._window(ex, now, svc.window)
                    p95 = aggregate(rts, "p95") if rts else None
                    ex.demand = rule_step(svc, p95, ex.grant, free, pol.rule_step, pol.rule_floor)
                    free -= ex.demand - ex.grant
                else:
                    ex.demand = ex.grant

    def _supervise_phase(self, now: float) -> None:
        for nid, node in self.nodes.items():
            execs = [self.cpu[(nid, sid)] for sid in self.order]
            for ex, g in zip(execs, supervise([e.demand for e in execs], node.cores)):
                ex.demand = g

    def _apply_phase(self, now: float) -> None:
        total = 0.0
        per_service = dict.fromkeys(self.order, 0.0)
        for (nid, sid), ex in self.cpu.items():
            if ex.demand != ex.grant:
                self._sync(ex, now)
                ex.grant = ex.demand
                self._schedule_cpu(ex)
            per_service[sid] += ex.grant
            total += ex.grant
        for sid, cores in per_service.items():
            self.log.sample(now, f"cores.{sid}", cores)
        for nid in self.nodes:
            self.log.sample(now, f"node.{nid}.cores",
                            sum(self.cpu[(nid, sid)].grant for sid in self.order))
        self.log.sample(now, "cores.total", total)
        # capacity freed or added may let queued work start
        self._dispatch()
