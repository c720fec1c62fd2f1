import pytest

from mlsched.batch import Partition, StagePlan, advance, control_step, feedforward
from mlsched.control import PiControllerState
from mlsched.core import ExecutorState


def make(assigned=100.0, processed=0.0, rate=10.0, start=0.0, local_deadline=10.0, shuffle=0.0):
    part = Partition("j", "s", assigned, rate, rate, start, processed)
    plan = StagePlan("s", start, local_deadline, 1, [assigned], shuffle)
    return ExecutorState("e", "n", assignment=part), part, plan


def test_feedforward_oracle():
    # 100 assigned, 50 processed, rate 10, 5 s left -> 1.0 core
    ex, part, plan = make(processed=50.0)
    assert feedforward(part, plan, 5.0, 1.0) == pytest.approx(1.0)
    pi = PiControllerState(kp=0.0, ki=0.0, u_max=8)
    assert control_step(ex, plan, pi, 5.0) == pytest.approx(1.0)


def test_zero_error_is_pure_feedforward():
    ex, part, plan = make(processed=50.0)
    pi = PiControllerState(kp=2.0, ki=0.5, u_max=8)
    assert control_step(ex, plan, pi, 5.0) == feedforward(part, plan, 5.0, 1.0)


def test_behind_schedule_asks_for_more():
    ex, part, plan = make(processed=20.0)
    pi = PiControllerState(kp=2.0, ki=0.5, u_max=8)
    assert control_step(ex, plan, pi, 5.0) > feedforward(part, plan, 5.0, 1.0)


def test_past_deadline_asks_for_u_max():
    ex, _, plan = make(processed=20.0)
    assert control_step(ex, plan, PiControllerState(u_max=6), 10.0) == 6


def test_shuffle_shortens_work_window():
    ex, part, plan = make(local_deadline=12.0, shuffle=2.0)
    assert plan.work_deadline == 10.0
    assert feedforward(part, plan, 0.0, 1.0) == pytest.approx(1.0)


def test_advance_plant_law():
    ex, part, _ = make()
    assert advance(ex, 2.0, 1.0) is None
    assert part.processed == 20.0


def test_advance_zero_grant():
    ex, part, _ = make()
    assert advance(ex, 0.0, 1.0) is None and part.processed == 0.0


def test_advance_in_tick_completion():
    ex, part, _ = make(assigned=100.0, processed=95.0)
    assert advance(ex, 2.0, 1.0) == pytest.approx(0.25)
    assert part.done and part.remaining == 0.0


def test_anti_windup_recovery():
    """100 saturated steps, then the executor is back within 5% of feedforward in 10."""
    pi = PiControllerState(kp=2.0, ki=0.5, u_min=0.0, u_max=4.0)
    for _ in range(100):
        pi.update(1.0, 4.0)  # far behind, output pinned at u_max
    setpoint = 1.5
    outs = [pi.update(0.0, setpoint) for _ in range(10)]
    assert any(abs(u - setpoint) <= 0.05 * setpoint for u in outs)
    assert abs(outs[-1] - setpoint) <= 0.05 * setpoint
