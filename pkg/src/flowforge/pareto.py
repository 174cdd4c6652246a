"""Pareto dominance and frontier computations.

Shared by the REDUCE control task and the outer design-space search:
candidate designs are compared on named objectives (each minimized or
maximized) and reduced to their non-dominated subset. Exact duplicates
(identical objective vectors) collapse to their first occurrence before
dominance testing; distinct but mutually non-dominating points are all
kept (weak Pareto).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

DIRECTIONS = ("min", "max")


@dataclass(frozen=True)
class ObjectivePoint:
    """One candidate in objective space.

    `payload` is an opaque reference back to whatever produced the point
    (a model entry, a DSE candidate, ...) and plays no role in dominance.
    """

    values: tuple[float, ...]
    directions: tuple[str, ...]
    payload: Any = None

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("objective point needs at least one value")
        if len(self.values) != len(self.directions):
            raise ValueError("values and directions must have the same length")
        for d in self.directions:
            if d not in DIRECTIONS:
                raise ValueError(f"unknown direction {d!r}, expected 'min' or 'max'")
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError(f"objective values must be finite, got {v!r}")


def _as_min_matrix(points: Sequence[ObjectivePoint]) -> np.ndarray:
    """Stack points into a matrix where every column is minimized."""
    mat = np.array([p.values for p in points], dtype=float)
    signs = np.array([1.0 if d == "min" else -1.0 for d in points[0].directions])
    return mat * signs


def dominates(a: ObjectivePoint, b: ObjectivePoint) -> bool:
    """True iff `a` is at least as good as `b` everywhere and strictly better somewhere."""
    if a.directions != b.directions:
        raise ValueError("points compared for dominance must share directions")
    at_least_as_good = True
    strictly_better = False
    for va, vb, d in zip(a.values, b.values, a.directions):
        if d == "max":
            va, vb = -va, -vb
        if va > vb:
            at_least_as_good = False
            break
        if va < vb:
            strictly_better = True
    return at_least_as_good and strictly_better


def frontier(points: Sequence[ObjectivePoint]) -> list[ObjectivePoint]:
    """Non-dominated subset after exact-duplicate deduplication.

    Output order is input order restricted to survivors. O(n^2), which is
    fine at the candidate-set sizes seen here (hundreds, not millions).
    """
    points = list(points)
    if not points:
        return []
    first_dirs = points[0].directions
    for p in points:
        if p.directions != first_dirs:
            raise ValueError("all points in one frontier must share directions")

    seen: dict[tuple[float, ...], int] = {}
    unique: list[ObjectivePoint] = []
    for p in points:
        if p.values not in seen:
            seen[p.values] = len(unique)
            unique.append(p)

    mat = _as_min_matrix(unique)
    keep = []
    for i in range(len(unique)):
        le = (mat <= mat[i]).all(axis=1)
        lt = (mat < mat[i]).any(axis=1)
        if not (le & lt).any():
            keep.append(unique[i])
    return keep


def hypervolume_2d(front: Sequence[ObjectivePoint], reference: Sequence[float]) -> float:
    """Area dominated by a 2-objective front relative to a reference point.

    Every front point must dominate the reference (no worse in either
    objective, strictly better in at least one); violating points raise.
    Dominated or duplicate front members are discarded before the sweep,
    so adding points can never shrink the result.
    """
    front = list(front)
    if not front:
        return 0.0
    if len(front[0].values) != 2:
        raise ValueError("hypervolume_2d requires exactly two objectives")
    ref = tuple(float(r) for r in reference)
    if len(ref) != 2:
        raise ValueError("reference must have two components")

    # Gain = improvement over the reference, oriented so larger is better.
    gains = []
    for p in frontier(front):
        g = []
        for v, r, d in zip(p.values, ref, p.directions):
            g.append(v - r if d == "max" else r - v)
        if min(g) < 0 or max(g) <= 0:
            raise ValueError(
                f"reference {ref} is not dominated by front point {p.values}"
            )
        gains.append(g)

    gains.sort()  # ascending in first gain; frontier makes second gain descending
    area = 0.0
    prev_x = 0.0
    for x, y in gains:
        area += (x - prev_x) * y
        prev_x = x
    return area
