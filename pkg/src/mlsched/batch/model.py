from __future__ import annotations

import enum
from dataclasses import dataclass, field


class ContentionStrategy(str, enum.Enum):
    EDF = "edf"
    PROPORTIONAL = "proportional"


@dataclass(frozen=True)
class StageSpec:
    stage_id: str
    records: float
    rate: float  # ground-truth records / s / core (the simulated plant)
    deps: tuple[str, ...] = ()
    shuffle_cost: float = 0.0

    def __post_init__(self):
        if not self.records > 0:
            raise ValueError(f"stage {self.stage_id}: records must be > 0")
        if not self.rate > 0:
            raise ValueError(f"stage {self.stage_id}: rate must be > 0")
        if self.shuffle_cost < 0:
            raise ValueError(f"stage {self.stage_id}: shuffle_cost must be >= 0")


@dataclass(frozen=True)
class StageProfile:
    stage_id: str
    records: float
    profiled_rate: float
    deps: tuple[str, ...] = ()
    shuffle_cost: float = 0.0

    def duration(self, cores: float) -> float:
        """Profiled single-executor duration at ``cores`` cores, shuffle included."""
        return self.records / (self.profiled_rate * cores) + self.shuffle_cost


@dataclass(frozen=True)
class BatchJob:
    id: str
    submit_time: float
    deadline: float  # relative to submit_time
    stages: tuple[StageSpec, ...]
    memory_request: float = 16.0

    def __post_init__(self):
        if not self.deadline > 0:
            raise ValueError(f"job {self.id}: deadline must be > 0, got {self.deadline}")
        ids = [s.stage_id for s in self.stages]
        if len(set(ids)) != len(ids):
            raise ValueError(f"job {self.id}: duplicate stage ids")
        known = set(ids)
        for s in self.stages:
            missing = set(s.deps) - known
            if missing:
                raise ValueError(f"job {self.id}: stage {s.stage_id} depends on unknown {sorted(missing)}")
        topo_order(self.stages)  # raises on cycles

    @property
    def absolute_deadline(self) -> float:
        return self.submit_time + self.deadline

    def stage(self, stage_id: str) -> StageSpec:
        for s in self.stages:
            if s.stage_id == stage_id:
                return s
        raise KeyError(stage_id)


@dataclass
class StagePlan:
    stage_id: str
    stage_start: float
    local_deadline: float
    executor_count: int
    per_executor_records: list[float]
    shuffle_cost: float = 0.0
    best_effort: bool = False

    @property
    def work_deadline(self) -> float:
        """Instant by which processing must end so the shuffle fits before the local deadline."""
        return max(self.stage_start, self.local_deadline - self.shuffle_cost)


@dataclass
class Partition:
    """One executor's share of a stage, plus its measured progress."""

    job_id: str
    stage_id: str
    assigned: float
    true_rate: float
    profiled_rate: float
    stage_start: float
    processed: float = 0.0

    @property
    def remaining(self) -> float:
        return max(self.assigned - self.processed, 0.0)

    @property
    def done(self) -> bool:
        return self.processed >= self.assigned


class DeadlineAlreadyPassed(Exception):
    """The job's absolute deadline is not after ``now``; ``fallback`` is a best-effort plan."""

    def __init__(self, job_id: str, now: float, deadline: float, fallback: StagePlan):
        super().__init__(f"job {job_id}: deadline {deadline} already passed at t={now}")
        self.job_id = job_id
        self.fallback = fallback


def topo_order(stages) -> list[str]:
    deps = {s.stage_id: set(s.deps) for s in stages}
    order: list[str] = []
    done: set[str] = set()
    while len(order) < len(deps):
        ready = [sid for sid, d in deps.items() if sid not in done and d <= done]
        if not ready:
            raise ValueError("stage graph has a cycle")
        for sid in ready:
            order.append(sid)
            done.add(sid)
    return order


@dataclass
class JobRun:
    job: BatchJob
    profiles: dict[str, StageProfile]
    completed: set[str] = field(default_factory=set)
    running: set[str] = field(default_factory=set)
    start: float | None = None
    finish: float | None = None
    core_seconds: float = 0.0
    memory: float = 0.0
