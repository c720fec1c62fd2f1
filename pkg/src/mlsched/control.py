"""PI controller used for vertical CPU scaling of batch and serving executors."""
from __future__ import annotations

from dataclasses import dataclass


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


@dataclass
class PiControllerState:
    """Proportional-integral law on top of a caller-supplied base allocation.

    The output is ``clamp(base + kp*scale*error + ki*integral)``. The integral
    is conditionally integrated: a step that would push an already saturated
    output further into saturation leaves it untouched, and it is bounded to
    ``[(u_min - u_max)/ki, (u_max - u_min)/ki]``.
    """

    kp: float = 2.0
    ki: float = 0.5
    u_min: float = 0.0
    u_max: float = 4.0
    period: float = 1.0
    integral: float = 0.0

    def __post_init__(self):
        if self.u_min < 0:
            raise ValueError(f"u_min must be >= 0, got {self.u_min}")
        if self.u_max < self.u_min:
            raise ValueError(f"u_max ({self.u_max}) < u_min ({self.u_min})")

    def _bound(self, integral: float) -> float:
        if self.ki <= 0:
            return integral
        span = (self.u_max - self.u_min) / self.ki
        return clamp(integral, -span, span)

    def update(self, error: float, base: float, scale: float = 1.0) -> float:
        candidate = self._bound(self.integral + error * self.period)
        raw = base + self.kp * scale * error + self.ki * candidate
        out = clamp(raw, self.u_min, self.u_max)
        winding = (raw > self.u_max and error > 0) or (raw < self.u_min and error < 0)
        if winding:
            out = clamp(base + self.kp * scale * error + self.ki * self.integral,
                        self.u_min, self.u_max)
        else:
            self.integral = candidate
        return out

    def reset(self) -> None:
        self.integral = 0.0
