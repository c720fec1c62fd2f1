import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlsched.control import PiControllerState, clamp


def test_zero_error_returns_base_exactly():
    pi = PiControllerState(kp=2.0, ki=0.5, u_min=0.0, u_max=8.0)
    assert pi.update(0.0, 3.25) == 3.25
    assert pi.integral == 0.0


def test_positive_error_raises_demand():
    pi = PiControllerState(kp=2.0, ki=0.5, u_max=8.0)
    assert pi.update(0.1, 2.0) > 2.0


def test_integral_bounds():
    pi = PiControllerState(kp=0.0, ki=0.5, u_min=0.0, u_max=4.0)
    for _ in range(100):
        pi.update(-1.0, 4.0)
    assert pi.integral >= (pi.u_min - pi.u_max) / pi.ki - 1e-12


def test_no_accumulation_while_saturated_high():
    pi = PiControllerState(kp=1.0, ki=0.5, u_max=4.0)
    for _ in range(100):
        assert pi.update(1.0, 4.0) == 4.0
    assert pi.integral == 0.0


def test_reset():
    pi = PiControllerState(ki=1.0, u_max=10)
    pi.update(0.5, 1.0)
    pi.reset()
    assert pi.integral == 0.0


@pytest.mark.parametrize("kw", [dict(u_min=-1), dict(u_min=3, u_max=2)])
def test_invalid_bounds(kw):
    with pytest.raises(ValueError):
        PiControllerState(**kw)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=60),
       st.floats(0, 10), st.floats(0, 5), st.floats(0.01, 5))
def test_output_always_clamped(errors, base, kp, ki):
    pi = PiControllerState(kp=kp, ki=ki, u_min=0.5, u_max=6.0)
    span = (pi.u_max - pi.u_min) / ki
    for e in errors:
        u = pi.update(e, base)
        assert pi.u_min <= u <= pi.u_max
        assert -span - 1e-9 <= pi.integral <= span + 1e-9


def test_clamp():
    assert clamp(5, 0, 1) == 1 and clamp(-1, 0, 1) == 0 and clamp(0.5, 0, 1) == 0.5
