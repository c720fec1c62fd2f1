"""Arrival trace generation: Poisson, linear ramp, periodic burst, or explicit."""
from __future__ import annotations

import math
from collections.abc import Mapping

import numpy as np


def _exp_gaps(rng: np.random.Generator, rate: float):
    # inverse CDF of the exponential on the seeded uniform stream
    while True:
        yield -math.log(1.0 - rng.random()) / rate


def _thinned(rng: np.random.Generator, intensity, peak: float, duration: float) -> list[float]:
    out: list[float] = []
    if peak <= 0:
        return out
    t = 0.0
    for gap in _exp_gaps(rng, peak):
        t += gap
        if t >= duration:
            return out
        if rng.random() * peak <= intensity(t):
            out.append(t)


def rate_function(spec: Mapping):
    """``(intensity(t), peak)`` for an arrival generator config."""
    kind = spec["kind"]
    if kind == "poisson":
        rate = float(spec["rate"])
        return (lambda t: rate), rate
    if kind == "ramp":
        r0, r1, span = float(spec["start_rate"]), float(spec["end_rate"]), float(spec["duration"])
        return (lambda t: r0 + (r1 - r0) * min(t / span, 1.0)), max(r0, r1)
    if kind == "burst":
        base, burst = float(spec["base_rate"]), float(spec["burst_rate"])
        period, duty = float(spec["period"]), float(spec["duty"])
        offset = float(spec.get("offset", 0.0))

        def intensity(t):
            phase = ((t - offset) % period) / period
            return burst if phase < duty else base

        return intensity, max(base, burst)
    raise ValueError(f"unknown arrival kind {kind!r}")


def gen_arrivals(spec: Mapping, rng: np.random.Generator | None, duration: float) -> list[float]:
    """Sorted arrival timestamps in ``[0, duration)``; explicit lists are returned verbatim."""
    if spec["kind"] == "explicit":
        times = [float(t) for t in spec["times"]]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("explicit arrival times must be non-decreasing")
        return times
    intensity, peak = rate_function(spec)
    if peak < 0:
        raise ValueError("rates must be >= 0")
    if peak == 0:
        return []
    if rng is None:
        raise ValueError("a random generator is required for stochastic arrivals")
    if spec["kind"] == "poisson":
        out, t = [], 0.0
        for gap in _exp_gaps(rng, peak):
            t += gap
            if t >= duration:
                return out
            out.append(t)
    return _thinned(rng, intensity, peak, duration)
