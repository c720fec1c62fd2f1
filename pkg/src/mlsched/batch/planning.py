"""Profiling, memory sharing and per-stage deadline planning."""
from __future__ import annotations

import math
from collections.abc import Iterable

from .model import BatchJob, DeadlineAlreadyPassed, StagePlan, StageProfile


def profile_job(job: BatchJob, error: float = 0.0) -> dict[str, StageProfile]:
    """Profiled rate is the true rate scaled by ``1 + error``; the DAG is copied as-is."""
    if error <= -1:
        raise ValueError(f"profiling error must be > -1, got {error}")
    return {
        s.stage_id: StageProfile(
            stage_id=s.stage_id,
            records=s.records,
            profiled_rate=s.rate * (1.0 + error),
            deps=tuple(s.deps),
            shuffle_cost=s.shuffle_cost,
        )
        for s in job.stages
    }


def memory_rebalance(jobs: Iterable[BatchJob], total_memory: float) -> dict[str, float]:
    """Water-filling fair share of ``total_memory`` capped at each job's request."""
    if not total_memory > 0:
        raise ValueError(f"total_memory must be > 0, got {total_memory}")
    jobs = list(jobs)
    alloc: dict[str, float] = {}
    pending = sorted(jobs, key=lambda j: (j.memory_request, j.id))
    left = float(total_memory)
    while pending:
        share = left / len(pending)
        capped = [j for j in pending if j.memory_request <= share]
        if not capped:
            for j in pending:
                alloc[j.id] = share
            break
        for j in capped:
            alloc[j.id] = float(j.memory_request)
            left -= j.memory_request
        pending = [j for j in pending if j.memory_request > share]
    return {j.id: alloc[j.id] for j in jobs}


def remaining_path(profiles: dict[str, StageProfile], stage_id: str,
                   completed: Iterable[str], cores: float) -> list[str]:
    """Longest chain (by profiled duration) of unfinished stages starting at ``stage_id``."""
    done = set(completed)
    children: dict[str, list[str]] = {sid: [] for sid in profiles}
    for p in profiles.values():
        for d in p.deps:
            children[d].append(p.stage_id)
    memo: dict[str, tuple[float, list[str]]] = {}

    def longest(sid: str) -> tuple[float, list[str]]:
        if sid not in memo:
            best = (0.0, [])
            for c in sorted(children[sid]):
                if c in done:
                    continue
                cand = longest(c)
                if cand[0] > best[0]:
                    best = cand
            memo[sid] = (profiles[sid].duration(cores) + best[0], [sid] + best[1])
        return memo[sid]

    return longest(stage_id)[1]


def partition(records: float, n: int) -> list[float]:
    if float(records).is_integer():
        base, extra = divmod(int(records), n)
        return [float(base + (1 if i < extra else 0)) for i in range(n)]
    share = records / n
    parts = [share] * (n - 1)
    return parts + [records - share * (n - 1)]


def plan_stage(
    job: BatchJob,
    stage_id: str,
    now: float,
    profiles: dict[str, StageProfile],
    cores_per_executor_max: float,
    completed: Iterable[str] = (),
    max_executors: int = 64,
    slack: float = 0.0,
) -> StagePlan:
    """Local deadline and executor count for a stage that is about to start.

    The remaining budget is split in proportion to profiled durations along the
    longest unfinished path from this stage. ``slack`` reserves that fraction
    of the job's deadline as a safety margin while the job is still ahead of it.

    Raises :class:`DeadlineAlreadyPassed` (carrying a max-parallelism fallback
    plan) when ``now`` is at or past the absolute deadline.
    """
    prof = profiles[stage_id]
    cmax = cores_per_executor_max
    deadline = job.absolute_deadline
    if now >= deadline:
        n = max_executors
        fallback = StagePlan(stage_id, now, now, n, partition(prof.records, n),
                             prof.shuffle_cost, best_effort=True)
        raise DeadlineAlreadyPassed(job.id, now, deadline, fallback)

    target = deadline - slack * job.deadline
    if target <= now:
        target = deadline
    budget = target - now
    path = remaining_path(profiles, stage_id, completed, cmax)
    total = sum(profiles[sid].duration(cmax) for sid in path)
    local_deadline = now + budget * prof.duration(cmax) / total

    avail = local_deadline - now - prof.shuffle_cost
    if avail <= 0:
        n = max_executors
    else:
        required_rate = prof.records / avail
        n = math.ceil(required_rate / (prof.profiled_rate * cmax) - 1e-9)
        n = min(max(n, 1), max_executors)
    return StagePlan(stage_id, now, local_deadline, n, partition(prof.records, n),
                     prof.shuffle_cost)
