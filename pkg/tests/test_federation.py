import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlsched.federation import (
    FederationConfig,
    LearningCurveOracle,
    RoundState,
    Trajectory,
    estimate_epochs,
    run_federation,
    simulate_round,
    target_accuracy,
)

CFG = FederationConfig(rounds=10, ac_sla=0.80)


@pytest.mark.parametrize("traj", list(Trajectory))
def test_endpoint(traj):
    cfg = FederationConfig(trajectory=traj)
    assert target_accuracy(10, cfg, (2, 0.3)) == 0.80


def test_linear_midpoint():
    cfg = FederationConfig(trajectory="linear")
    assert target_accuracy(6, cfg, (2, 0.30)) == pytest.approx(0.55)


def test_quadratic_midpoint():
    assert target_accuracy(6, CFG, (2, 0.30)) == pytest.approx(0.675)


def test_round_at_anchor_rejected():
    with pytest.raises(ValueError):
        target_accuracy(2, CFG, (2, 0.3))


def test_secant_estimate():
    hist = (RoundState(1, 1, 1, 0.25), RoundState(2, 1, 2, 0.30))
    assert estimate_epochs(0.3625, hist, 16) == 2


def test_ahead_of_target_clamps_to_one():
    hist = (RoundState(1, 1, 1, 0.25), RoundState(2, 1, 2, 0.30))
    assert estimate_epochs(0.29, hist, 16) == 1


def test_plateau_repeats_previous():
    hist = (RoundState(3, 2, 4, 0.40), RoundState(4, 3, 7, 0.39))
    assert estimate_epochs(0.6, hist, 16) == 3


def test_clamped_to_e_max():
    hist = (RoundState(1, 1, 1, 0.25), RoundState(2, 1, 2, 0.2501))
    assert estimate_epochs(0.8, hist, 16) == 16


def test_curve_closed_form():
    orc = LearningCurveOracle(a_max=0.85, k=0.15)
    ac, ev = simulate_round(orc, 1, 18)
    assert ac == pytest.approx(0.85 * (1 - math.exp(-2.85)))
    assert ac == pytest.approx(0.8008, abs=1e-4)
    assert ev == pytest.approx(ac - 0.01)


def test_noise_free_strictly_increasing():
    orc = LearningCurveOracle()
    accs = [simulate_round(orc, 1, s)[0] for s in range(20)]
    assert all(b > a for a, b in zip(accs, accs[1:]))


def test_symmetric_jitter_within_node_range():
    orc = LearningCurveOracle(k=0.2, jitter=(0.1, -0.1))
    ac, _ = simulate_round(orc, 3, 2, node_count=2)
    lo, hi = orc.curve(5, -0.1), orc.curve(5, 0.1)
    assert lo <= ac <= hi


def test_noise_requires_rng():
    with pytest.raises(ValueError):
        simulate_round(LearningCurveOracle(noise_sd=0.01), 1, 0)


def test_bootstrap_rounds_and_length():
    log = run_federation(CFG, LearningCurveOracle(noise_sd=0.005), np.random.default_rng(1))
    assert len(log.rounds) == 10
    assert log.epochs()[:2] == [1, 1]
    assert [r["target"] for r in log.rounds[:2]] == [None, None]
    s = [r["s_r"] for r in log.rounds]
    assert all(b > a for a, b in zip(s, s[1:]))


def test_headroom_keeps_final_target_at_sla():
    cfg = FederationConfig(headroom=0.02)
    log = run_federation(cfg, LearningCurveOracle(k=0.19))
    assert log.final["target"] == pytest.approx(0.82)
    with pytest.raises(ValueError):
        FederationConfig(ac_sla=0.9, headroom=0.2)


def test_secant_consistency_on_linear_plant():
    """A plant exactly linear in S: the first controlled round lands within one epoch of target."""
    slope = 0.02

    class Linear(LearningCurveOracle):
        def curve(self, s, jitter=0.0):
            return 0.1 + slope * s

    cfg = FederationConfig(trajectory="linear", e_max=50)
    log = run_federation(cfg, Linear(gap=0.0))
    r3 = log.rounds[2]
    assert r3["target"] <= r3["ac_fit"] <= r3["target"] + slope + 1e-12


@pytest.mark.parametrize("kw", [dict(rounds=2), dict(ac_sla=1.0), dict(e_bootstrap=0),
                                dict(node_count=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        FederationConfig(**kw)


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 20), st.integers(1, 30), st.floats(0, 0.99), st.floats(0.01, 0.99))
def test_trajectory_properties(r0, extra, ac0, sla):
    R = max(r0 + extra, 3)
    cfg_q = FederationConfig(rounds=R, ac_sla=sla)
    cfg_l = FederationConfig(rounds=R, ac_sla=sla, trajectory="linear")
    assert abs(target_accuracy(R, cfg_q, (r0, ac0)) - sla) <= 1e-12
    assert abs(target_accuracy(R, cfg_l, (r0, ac0)) - sla) <= 1e-12
    for r in range(r0 + 1, R):
        q, lin = target_accuracy(r, cfg_q, (r0, ac0)), target_accuracy(r, cfg_l, (r0, ac0))
        if sla > ac0:
            assert q > lin
        elif sla < ac0:
            assert q < lin


def test_estimator_signature_excludes_oracle():
    import inspect
    assert list(inspect.signature(estimate_epochs).parameters) == ["target", "hist", "e_max"]
