from __future__ import annotations

from collections.abc import Sequence

from .model import ContentionStrategy


def resolve_contention(
    demands: Sequence[tuple[str, float, float]],
    capacity: float,
    strategy: ContentionStrategy | str,
) -> list[float]:
    """Scale ``(executor_id, demand, absolute_deadline)`` requests down to ``capacity``.

    Grants are returned in input order. Without contention every demand is
    granted verbatim. EDF fills demands in deadline order (ties by executor id)
    and hands the leftover to the first executor that does not fit.
    Proportional multiplies every demand by ``capacity / total``.
    """
    strategy = ContentionStrategy(strategy)
    total = sum(d for _, d, _ in demands)
    if total <= capacity:
        return [d for _, d, _ in demands]

    if strategy is ContentionStrategy.PROPORTIONAL:
        factor = capacity / total
        grants = [d * factor for _, d, _ in demands]
        excess = sum(grants) - capacity
        if excess > 0:
            # rounding guard; keeps the sum at or under capacity
            grants = [g * (1.0 - 4e-16 * len(grants)) for g in grants]
        return grants

    order = sorted(range(len(demands)), key=lambda i: (demands[i][2], demands[i][0]))
    grants = [0.0] * len(demands)
    left = capacity
    for i in order:
        d = demands[i][1]
        if d <= left:
            grants[i] = d
            left -= d
        else:
            grants[i] = max(left, 0.0)
            break
    return grants
