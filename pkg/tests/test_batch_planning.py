import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlsched.batch import (
    BatchJob,
    DeadlineAlreadyPassed,
    StageSpec,
    memory_rebalance,
    plan_stage,
    profile_job,
)
from mlsched.batch.planning import partition, remaining_path


def chain(n=3, records=1000, rate=10.0, shuffle=0.0, deadline=300.0, submit=0.0, memory=16.0):
    stages = tuple(StageSpec(f"s{i}", records, rate, (f"s{i-1}",) if i else (), shuffle)
                   for i in range(n))
    return BatchJob("j", submit, deadline, stages, memory)


class TestProfile:
    def test_exact(self):
        assert profile_job(chain(1, rate=10))["s0"].profiled_rate == 10

    def test_error_factor(self):
        assert profile_job(chain(1, rate=10), 0.1)["s0"].profiled_rate == pytest.approx(11)

    def test_structure_copied(self):
        prof = profile_job(chain(3))
        assert list(prof) == ["s0", "s1", "s2"]
        assert prof["s2"].deps == ("s1",) and prof["s0"].deps == ()

    def test_error_at_or_below_minus_one_rejected(self):
        with pytest.raises(ValueError):
            profile_job(chain(1), -1.0)


def job(id_, mem):
    return BatchJob(id_, 0, 10, (StageSpec("s", 1, 1),), mem)


class TestMemory:
    def test_symmetric(self):
        assert memory_rebalance([job("a", 30), job("b", 40), job("c", 50)], 90) == \
            {"a": 30, "b": 30, "c": 30}

    def test_water_filling(self):
        got = memory_rebalance([job("a", 10), job("b", 50), job("c", 60)], 90)
        assert got == pytest.approx({"a": 10, "b": 40, "c": 40})

    def test_single_capped(self):
        assert memory_rebalance([job("a", 20)], 90) == {"a": 20}

    def test_empty(self):
        assert memory_rebalance([], 90) == {}

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0.5, 200), min_size=1, max_size=12), st.floats(1, 500))
    def test_properties(self, reqs, total):
        jobs = [job(f"j{i}", r) for i, r in enumerate(reqs)]
        alloc = memory_rebalance(jobs, total)
        assert sum(alloc.values()) <= total + 1e-9
        for j in jobs:
            assert alloc[j.id] <= j.memory_request + 1e-9
        uncapped = [alloc[j.id] for j in jobs if alloc[j.id] < j.memory_request - 1e-9]
        if uncapped:
            # every uncapped job gets the same share and no capped job gets more
            assert max(uncapped) - min(uncapped) <= 1e-9
            assert all(a <= max(uncapped) + 1e-9 for a in alloc.values())
            assert sum(alloc.values()) == pytest.approx(total)


class TestPlanStage:
    def test_equal_stages_split_budget(self):
        j = chain(2, deadline=100)
        plan = plan_stage(j, "s0", 0.0, profile_job(j), 4.0)
        assert plan.local_deadline == pytest.approx(50.0)

    def test_arithmetic_oracle(self):
        # 1000 records, 10 rec/s/core, cmax 4, local budget 10 s -> 100 rec/s -> 10 cores -> 3 executors
        j = chain(1, records=1000, deadline=10)
        plan = plan_stage(j, "s0", 0.0, profile_job(j), 4.0)
        assert plan.local_deadline == 10.0
        assert plan.executor_count == 3
        assert sum(plan.per_executor_records) == 1000

    def test_single_stage_gets_whole_budget(self):
        j = chain(3, deadline=90)
        prof = profile_job(j)
        plan = plan_stage(j, "s2", 60.0, prof, 4.0, completed={"s0", "s1"})
        assert plan.local_deadline == j.absolute_deadline

    def test_longest_path_used(self):
        stages = (StageSpec("a", 400, 10), StageSpec("b", 4000, 10, ("a",)),
                  StageSpec("c", 40, 10, ("a",)))
        j = BatchJob("j", 0, 110, stages)
        prof = profile_job(j)
        assert remaining_path(prof, "a", (), 4.0) == ["a", "b"]
        # durations at 4 cores: a 10 s, b 100 s -> a gets 10/110 of the budget
        assert plan_stage(j, "a", 0, prof, 4.0).local_deadline == pytest.approx(10.0)

    def test_deadline_passed(self):
        j = chain(2, deadline=10)
        with pytest.raises(DeadlineAlreadyPassed) as info:
            plan_stage(j, "s0", 10.0, profile_job(j), 4.0, max_executors=8)
        fb = info.value.fallback
        assert fb.best_effort and fb.executor_count == 8
        assert sum(fb.per_executor_records) == 1000

    def test_slack_reserves_margin(self):
        j = chain(1, deadline=100)
        plan = plan_stage(j, "s0", 0.0, profile_job(j), 4.0, slack=0.05)
        assert plan.local_deadline == pytest.approx(95.0)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 6), st.floats(100, 1e5), st.floats(1, 50), st.floats(0, 10),
           st.floats(10, 1000), st.floats(0, 0.9))
    def test_plan_consistency(self, n, records, rate, shuffle, deadline, frac):
        j = chain(n, records=records, rate=rate, shuffle=shuffle, deadline=deadline)
        prof = profile_job(j)
        now = frac * deadline
        plan = plan_stage(j, "s0", now, prof, 4.0)
        assert now <= plan.local_deadline <= j.absolute_deadline + 1e-9
        assert plan.executor_count >= 1
        assert sum(plan.per_executor_records) == pytest.approx(records)
        # budgets along the path sum to the remaining budget
        total = sum(p.duration(4.0) for p in prof.values())
        assert (plan.local_deadline - now) * total / prof["s0"].duration(4.0) == \
            pytest.approx(deadline - now)


@pytest.mark.parametrize("records,n", [(10, 3), (7.5, 2), (1000, 3)])
def test_partition_sums(records, n):
    parts = partition(records, n)
    assert len(parts) == n and sum(parts) == pytest.approx(records)
    assert max(parts) - min(parts) <= 1


def test_job_validation():
    with pytest.raises(ValueError):
        BatchJob("j", 0, -1, (StageSpec("s", 1, 1),))
    with pytest.raises(ValueError):
        BatchJob("j", 0, 10, (StageSpec("a", 1, 1, ("b",)), StageSpec("b", 1, 1, ("a",))))
    with pytest.raises(ValueError):
        BatchJob("j", 0, 10, (StageSpec("a", 1, 1), StageSpec("a", 1, 1)))
    with pytest.raises(ValueError):
        StageSpec("s", 0, 1)
