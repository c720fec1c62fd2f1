"""Deadline-driven batch control and the FIFO baseline."""
from .contention import resolve_contention
from .executor import advance, control_step, feedforward
from .model import (
    BatchJob,
    ContentionStrategy,
    DeadlineAlreadyPassed,
    Partition,
    StagePlan,
    StageProfile,
    StageSpec,
)
from .planning import memory_rebalance, plan_stage, profile_job
from .sim import BatchPolicy, BatchSimulation

__all__ = [
    "BatchJob", "BatchPolicy", "BatchSimulation", "ContentionStrategy",
    "DeadlineAlreadyPassed", "Partition", "StagePlan", "StageProfile", "StageSpec",
    "advance", "control_step", "feedforward", "memory_rebalance", "plan_stage",
    "profile_job", "resolve_contention",
]
