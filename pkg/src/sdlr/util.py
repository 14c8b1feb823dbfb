"""Small shared helpers."""

from __future__ import annotations

import math

from .errors import DomainError


def time_steps(t_final: float, dt: float) -> list[float]:
    """Step sizes covering ``[0, t_final]`` with uniform ``dt``.

    When ``t_final`` is an integer multiple of ``dt`` the count is exact
    (no float-accumulation drift); otherwise a shorter final step closes
    the gap.
    """
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if t_final < 0:
        raise DomainError(f"final time must be nonnegative, got {t_final}")
    k = int(round(t_final / dt))
    if k > 0 and abs(k * dt - t_final) <= 1e-9 * max(1.0, abs(t_final)):
        return [dt] * k
    k = int(math.floor(t_final / dt + 1e-12))
    steps = [dt] * k
    rem = t_final - k * dt
    if rem > 1e-12 * max(1.0, t_final):
        steps.append(rem)
    return steps
