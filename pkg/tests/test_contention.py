import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlsched.batch import ContentionStrategy, resolve_contention

EDF, PROP = ContentionStrategy.EDF, ContentionStrategy.PROPORTIONAL
D = [("a", 8.0, 1.0), ("b", 6.0, 2.0), ("c", 4.0, 3.0)]


def test_edf_prefix_with_remainder():
    assert resolve_contention(D, 16, EDF) == [8, 6, 2]


def test_proportional_scaling():
    assert resolve_contention(D, 16, PROP) == pytest.approx([64 / 9, 48 / 9, 32 / 9])


def test_no_contention_passthrough():
    d = [("a", 4.0, 1.0), ("b", 6.0, 0.0)]
    assert resolve_contention(d, 16, EDF) == [4.0, 6.0]
    assert resolve_contention(d, 16, PROP) == [4.0, 6.0]


def test_edf_ties_by_id_and_input_order_kept():
    d = [("z", 5.0, 1.0), ("a", 5.0, 1.0)]
    assert resolve_contention(d, 7, EDF) == [2.0, 5.0]


def test_strategy_accepts_string():
    assert resolve_contention(D, 16, "edf") == [8, 6, 2]


# core-unit demands: zero or at least a micro-core (subnormal floats are not meaningful grants)
core_demand = st.one_of(st.just(0.0), st.floats(1e-6, 64))
demands = st.lists(st.tuples(core_demand, st.floats(0, 1000)), min_size=1, max_size=20)


@settings(max_examples=300, deadline=None)
@given(demands, st.floats(0.1, 200))
def test_safety_and_ratio(ds, cap):
    items = [(f"e{i:02d}", d, dl) for i, (d, dl) in enumerate(ds)]
    for strat in (EDF, PROP):
        g = resolve_contention(items, cap, strat)
        assert sum(g) <= cap + 1e-9
        assert all(0 <= gi <= d + 1e-12 for gi, (_, d, _) in zip(g, items))
    total = sum(d for _, d, _ in items)
    g = resolve_contention(items, cap, PROP)
    if total > cap:
        ratios = [gi / d for gi, (_, d, _) in zip(g, items) if d > 0]
        assert max(ratios) - min(ratios) <= 1e-9
    else:
        assert g == [d for _, d, _ in items]


@settings(max_examples=300, deadline=None)
@given(demands, st.floats(0.1, 200))
def test_edf_prefix_property(ds, cap):
    items = [(f"e{i:02d}", d, dl) for i, (d, dl) in enumerate(ds)]
    g = resolve_contention(items, cap, EDF)
    for i, (_, di, dli) in enumerate(items):
        for j, (_, _, dlj) in enumerate(items):
            if dli < dlj and g[j] > 0:
                assert g[i] == di
