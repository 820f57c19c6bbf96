"""Approximate capped addition min(1, t1 + t2) with multiplications only.

The map (t1, t2) -> (1 - (1-t1)(1-t2), t1*t2) preserves t1 + t2 and shrinks
t2 toward max(0, t1 + t2 - 1), so after enough steps t1 carries the capped
sum. The quantity min(t2, 1 - t1) is the exact remaining error in both the
undersaturated and saturated regimes, which gives a free early exit.
"""

from __future__ import annotations

import math


def gadget_iteration_cap(eps):
    """Steps guaranteeing error <= eps (worst case sits near t1 + t2 = 1)."""
    return math.ceil(math.log(1.0 / eps) / math.log(1.0 / (1.0 - eps))) + 1


def gadget_min_sum(t1, t2, eps):
    """Iterated-product approximation of min(1, t1 + t2) within eps."""
    t1, t2 = float(t1), float(t2)
    if not (0.0 <= t1 <= 1.0 and 0.0 <= t2 <= 1.0):
        raise ValueError("t1 and t2 must lie in [0, 1]")
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    for _ in range(gadget_iteration_cap(eps)):
        if min(t2, 1.0 - t1) <= eps:
            break
        t1, t2 = 1.0 - (1.0 - t1) * (1.0 - t2), t1 * t2
    return t1
