from __future__ import annotations

from ..control import PiControllerState
from ..core import ExecutorState
from .model import Partition, StagePlan


def feedforward(part: Partition, plan: StagePlan, now: float, period: float) -> float:
    """Cores that finish the remaining records exactly at the work deadline at the profiled rate."""
    horizon = max(plan.work_deadline - now, period)
    return part.remaining / (part.profiled_rate * horizon)


def control_step(executor: ExecutorState, plan: StagePlan, pi: PiControllerState,
                 now: float) -> float:
    """One executor-level control action; returns the core demand.

    Tracks linear progress from stage start to the work deadline. Past that
    deadline (or on a best-effort plan) the executor asks for ``u_max``.
    """
    part: Partition = executor.assignment
    end = plan.work_deadline
    if plan.best_effort or now >= end:
        return pi.u_max
    expected = min(max((now - part.stage_start) / (end - part.stage_start), 0.0), 1.0)
    actual = part.processed / part.assigned
    error = expected - actual
    return pi.update(error, feedforward(part, plan, now, pi.period))


def advance(executor: ExecutorState, grant: float, dt: float) -> float | None:
    """Integrate the plant for ``dt`` seconds at ``grant`` cores and the true rate.

    Returns the offset into ``dt`` at which the partition completes, or None.
    """
    part: Partition = executor.assignment
    speed = grant * part.true_rate
    if speed <= 0 or part.done:
        return None
    need = part.remaining / speed
    if need <= dt:
        part.processed = part.assigned
        return need
    part.processed += speed * dt
    return None
