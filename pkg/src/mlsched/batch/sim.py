"""Batch cluster simulation: deadline-driven control or the FIFO baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from ..control import PiControllerState
from ..core import CAPACITY_TOL, Engine, EventRecord, ExecutorState, MetricsLog, NodeSpec
from .contention import resolve_contention
from .executor import advance, control_step
from .model import (
    BatchJob,
    ContentionStrategy,
    DeadlineAlreadyPassed,
    JobRun,
    Partition,
    StagePlan,
)
from .planning import memory_rebalance, partition, plan_stage, profile_job

POLICIES = ("dynaspark", "fifo")


@dataclass
class BatchPolicy:
    name: str = "dynaspark"
    strategy: ContentionStrategy = ContentionStrategy.EDF
    kp: float = 2.0
    ki: float = 0.5
    cores_per_executor: float = 4.0
    u_min: float = 0.0
    slack: float = 0.0
    profiling_error: float = 0.0
    max_executors: int | None = None

    def __post_init__(self):
        if self.name not in POLICIES:
            raise ValueError(f"unknown batch policy {self.name!r}; valid: {', '.join(POLICIES)}")
        self.strategy = ContentionStrategy(self.strategy)


@dataclass
class _Exec:
    state: ExecutorState
    part: Partition
    plan: StagePlan
    pi: PiControllerState
    run: JobRun
    deadline: float
    demand: float = 0.0
    last: float = 0.0
    version: int = 0
    finished: bool = False


class BatchSimulation:
    def __init__(self, nodes: Iterable[NodeSpec], jobs: Iterable[BatchJob],
                 policy: BatchPolicy | None = None, control_period: float = 1.0):
        self.nodes = {n.id: n for n in nodes}
        self.node_order = list(self.nodes)
        self.jobs = sorted(jobs, key=lambda j: (j.submit_time, j.id))
        self.policy = policy or BatchPolicy()
        self.period = control_period
        self.total_cores = sum(n.cores for n in self.nodes.values())
        self.total_memory = sum(n.memory for n in self.nodes.values())
        cmax = self.policy.cores_per_executor
        self.max_executors = self.policy.max_executors or max(int(self.total_cores // cmax), 1)

        self.engine = Engine()
        self.log: MetricsLog = self.engine.log
        self.runs: dict[str, JobRun] = {}
        self.active: list[JobRun] = []
        self.fifo_queue: list[JobRun] = []
        self.execs: dict[str, _Exec] = {}
        self.on_node: dict[str, list[_Exec]] = {nid: [] for nid in self.nodes}
        self.stage_left: dict[tuple[str, str], int] = {}
        self.max_overcommit = 0.0
        self._grants: dict[str, float] = {}
        self._exec_seq = 0

        eng = self.engine
        eng.on("job-submit", self._on_submit)
        eng.on("exec-complete", self._on_exec_complete)
        eng.on("stage-complete", self._on_stage_complete)
        for job in self.jobs:
            eng.at(job.submit_time, "job-submit", job.id)
        eng.control_tick_loop(control_period, lambda: bool(self.active),
                              [self._control_phase, self._arbitrate_phase, self._apply_phase])

    @property
    def fifo(self) -> bool:
        return self.policy.name == "fifo"

    def run(self, until: float | None = None) -> MetricsLog:
        end = math.inf if until is None else until
        self.engine.run_until(end)
        self._sync(self.engine.now)
        for job in self.jobs:
            run = self.runs.get(job.id)
            if run is None or run.finish is None:
                self._record_job(job, run)
        return self.log

    # -- event handlers ---------------------------------------------------

    def _on_submit(self, ev: EventRecord) -> None:
        job = next(j for j in self.jobs if j.id == ev.payload)
        run = JobRun(job, profile_job(job, self.policy.profiling_error))
        self.runs[job.id] = run
        if self.fifo and self.active:
            self.fifo_queue.append(run)
            return
        self._activate(run)

    def _activate(self, run: JobRun) -> None:
        run.start = self.engine.now
        self.active.append(run)
        self._rebalance_memory()
        self._start_ready(run)
        self.engine.wake()

    def _on_exec_complete(self, ev: EventRecord) -> None:
        exec_id, version = ev.payload
        e = self.execs[exec_id]
        if e.finished or version != e.version:
            return
        now = self.engine.now
        self._sync_exec(e, now)
        e.part.processed = e.part.assigned
        e.finished = True
        e.state.busy = False
        e.state.granted_cores = 0.0
        e.state.granted_memory = 0.0
        self.on_node[e.state.node].remove(e)
        key = (e.run.job.id, e.part.stage_id)
        self.stage_left[key] -= 1
        if self.stage_left[key] == 0:
            self.engine.at(now + e.plan.shuffle_cost, "stage-complete", key)

    def _on_stage_complete(self, ev: EventRecord) -> None:
        job_id, sid = ev.payload
        run = self.runs[job_id]
        run.running.discard(sid)
        run.completed.add(sid)
        self.log.record("stage", job_id=job_id, stage_id=sid, finish=self.engine.now)
        if len(run.completed) == len(run.job.stages):
            self._finish(run)
        else:
            self._start_ready(run)

    def _finish(self, run: JobRun) -> None:
        run.finish = self.engine.now
        self.active.remove(run)
        self._record_job(run.job, run)
        self._rebalance_memory()
        if self.fifo and self.fifo_queue:
            self._activate(self.fifo_queue.pop(0))

    def _record_job(self, job: BatchJob, run: JobRun | None) -> None:
        now = self.engine.now
        finish = run.finish if run else None
        if finish is not None:
            status = "completed"
            violated = finish > job.absolute_deadline + CAPACITY_TOL
            span = finish - job.submit_time
        else:
            status = "active" if run and run.start is not None else "queued" if run else "pending"
            violated = now > job.absolute_deadline
            span = max(now - job.submit_time, 0.0)
        mean_cores = run.core_seconds / span if run and span > 0 else 0.0
        self.log.record("job", job_id=job.id, submit=job.submit_time,
                        deadline_abs=job.absolute_deadline, finish=finish,
                        violated=bool(violated), mean_cores=mean_cores, status=status)

    # -- stages and executors ---------------------------------------------

    def _start_ready(self, run: JobRun) -> None:
        for s in run.job.stages:
            sid = s.stage_id
            if sid in run.completed or sid in run.running:
                continue
            if set(s.deps) <= run.completed:
                self._start_stage(run, sid)

    def _plan(self, run: JobRun, sid: str, now: float) -> StagePlan:
        pol = self.policy
        prof = run.profiles[sid]
        if self.fifo:
            n = self.max_executors
            return StagePlan(sid, now, run.job.absolute_deadline, n,
                             partition(prof.records, n), prof.shuffle_cost, best_effort=True)
        try:
            return plan_stage(run.job, sid, now, run.profiles, pol.cores_per_executor,
                              completed=run.completed, max_executors=self.max_executors,
                              slack=pol.slack)
        except DeadlineAlreadyPassed as exc:
            self.log.record("deadline-passed", job_id=run.job.id, stage_id=sid, time=now)
            return exc.fallback

    def _start_stage(self, run: JobRun, sid: str) -> None:
        now = self.engine.now
        pol = self.policy
        spec = run.job.stage(sid)
        plan = self._plan(run, sid, now)
        run.running.add(sid)
        self.stage_left[(run.job.id, sid)] = plan.executor_count
        self.log.record("stage-plan", job_id=run.job.id, stage_id=sid, start=now,
                        local_deadline=plan.local_deadline,
                        executor_count=plan.executor_count, best_effort=plan.best_effort)
        self._sync(now)
        touched = set()
        for share in plan.per_executor_records:
            part = Partition(run.job.id, sid, share, spec.rate,
                             run.profiles[sid].profiled_rate, now)
            node = self._place()
            state = ExecutorState(f"{run.job.id}/{sid}/{self._exec_seq}", node,
                                  assignment=part, busy=True)
            self._exec_seq += 1
            pi = PiControllerState(kp=pol.kp, ki=pol.ki, u_min=pol.u_min,
                                   u_max=pol.cores_per_executor, period=self.period)
            e = _Exec(state, part, plan, pi, run, run.job.absolute_deadline, last=now)
            e.demand = self._demand(e, now)
            self.execs[state.id] = e
            self.on_node[node].append(e)
            touched.add(node)
        self._assign_memory()
        self._reallocate(sorted(touched, key=self.node_order.index))

    def _place(self) -> str:
        def load(nid):
            return (sum(e.demand for e in self.on_node[nid]) / self.nodes[nid].cores,
                    len(self.on_node[nid]), self.node_order.index(nid))
        return min(self.node_order, key=load)

    def _demand(self, e: _Exec, now: float) -> float:
        if self.fifo:
            return self.policy.cores_per_executor
        return control_step(e.state, e.plan, e.pi, now)

    def _sync_exec(self, e: _Exec, now: float) -> None:
        dt = now - e.last
        if dt > 0 and e.state.granted_cores > 0 and not e.part.done:
            hit = advance(e.state, e.state.granted_cores, dt)
            e.run.core_seconds += e.state.granted_cores * (dt if hit is None else hit)
        e.last = now

    def _sync(self, now: float) -> None:
        for e in self._live():
            self._sync_exec(e, now)

    def _live(self):
        for nid in self.node_order:
            yield from self.on_node[nid]

    def _arbitrate(self, nid: str) -> dict[str, float]:
        execs = self.on_node[nid]
        strategy = ContentionStrategy.PROPORTIONAL if self.fifo else self.policy.strategy
        grants = resolve_contention([(e.state.id, e.demand, e.deadline) for e in execs],
                                    self.nodes[nid].cores, strategy)
        return {e.state.id: g for e, g in zip(execs, grants)}

    def _grant(self, e: _Exec, g: float, now: float) -> None:
        e.state.granted_cores = g
        e.version += 1
        if e.part.done:
            self.engine.at(now, "exec-complete", (e.state.id, e.version))
        elif g > 0:
            t = now + e.part.remaining / (g * e.part.true_rate)
            self.engine.at(t, "exec-complete", (e.state.id, e.version))

    def _reallocate(self, node_ids) -> None:
        now = self.engine.now
        for nid in node_ids:
            for eid, g in self._arbitrate(nid).items():
                self._grant(self.execs[eid], g, now)
            self._check_capacity(nid)

    def _check_capacity(self, nid: str) -> None:
        used = sum(e.state.granted_cores for e in self.on_node[nid])
        self.max_overcommit = max(self.max_overcommit, used - self.nodes[nid].cores)

    # -- control tick phases ------------------------------------------------

    def _control_phase(self, now: float) -> None:
        self._sync(now)
        for e in self._live():
            e.demand = self._demand(e, now)

    def _arbitrate_phase(self, now: float) -> None:
        self._grants = {}
        for nid in self.node_order:
            self._grants.update(self._arbitrate(nid))

    def _apply_phase(self, now: float) -> None:
        for eid, g in self._grants.items():
            self._grant(self.execs[eid], g, now)
        per_job: dict[str, float] = {r.job.id: 0.0 for r in self.active}
        for nid in self.node_order:
            self._check_capacity(nid)
            used = sum(e.state.granted_cores for e in self.on_node[nid])
            self.log.sample(now, f"node.{nid}.cores", used)
            for e in self.on_node[nid]:
                per_job[e.run.job.id] = per_job.get(e.run.job.id, 0.0) + e.state.granted_cores
        for jid, cores in per_job.items():
            self.log.sample(now, f"job.{jid}.cores", cores)

    # -- memory controller ----------------------------------------------------

    def _rebalance_memory(self) -> None:
        alloc = memory_rebalance([r.job for r in self.active], self.total_memory)
        for r in self.active:
            r.memory = alloc[r.job.id]
            self.log.sample(self.engine.now, f"job.{r.job.id}.memory", r.memory)
        self._assign_memory()

    def _assign_memory(self) -> None:
        for nid, node in self.nodes.items():
            by_job: dict[str, list[_Exec]] = {}
            for e in self.on_node[nid]:
                by_job.setdefault(e.run.job.id, []).append(e)
            for execs in by_job.values():
                share = execs[0].run.memory * node.memory / self.total_memory
                for e in execs:
                    e.state.granted_memory = share / len(execs)

    def memory_used(self, nid: str) -> float:
        return sum(e.state.granted_memory for e in self.on_node[nid])

    def job_rows(self) -> list[dict]:
        return self.log.rows("job")
