"""Recursive coordinate bisection with per-block target sizes.

Each recursion step splits the active block-id range in half (left half
gets the ceiling), splits the point set orthogonally to its longest
bounding-box axis at the exact weighted order statistic, and recurses.
Coordinate ties break by vertex id, so results are deterministic and the
balance is always exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import Coordinates, Partition
from .target_weights import IntegerTargets


@dataclass(frozen=True)
class SplitRecord:
    """One bisection: block range [lo, hi) split at mid along ``axis``."""

    lo: int
    hi: int
    mid: int
    axis: int
    left_count: int


def partition_rcb(
    coords: Coordinates, targets: IntegerTargets, return_splits: bool = False
) -> Partition | tuple[Partition, list[SplitRecord]]:
    sizes = np.asarray(targets.sizes, dtype=np.int64)
    n = coords.n
    if int(sizes.sum()) != n:
        raise ValidationError(f"targets sum to {int(sizes.sum())} but the graph has {n} vertices")
    k = len(sizes)
    points = coords.points
    prefix = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(sizes, out=prefix[1:])

    assignment = np.empty(n, dtype=np.int64)
    splits: list[SplitRecord] = []

    # ids stay sorted ascending so a stable coordinate sort breaks ties by id
    stack: list[tuple[np.ndarray, int, int]] = [(np.arange(n, dtype=np.int64), 0, k)]
    while stack:
        ids, lo, hi = stack.pop()
        if hi - lo == 1:
            assignment[ids] = lo
            continue
        mid = lo + (hi - lo + 1) // 2
        left_count = int(prefix[mid] - prefix[lo])
        if len(ids) == 0:
            stack.append((ids, lo, mid))
            stack.append((ids, mid, hi))
            continue
        pts = points[ids]
        extent = pts.max(axis=0) - pts.min(axis=0)
        axis = int(np.argmax(extent))  # first maximum = lowest axis index on ties
        order = np.argsort(pts[:, axis], kind="stable")
        left = np.sort(ids[order[:left_count]])
        right = np.sort(ids[order[left_count:]])
        splits.append(SplitRecord(lo, hi, mid, axis, left_count))
        stack.append((left, lo, mid))
        stack.append((right, mid, hi))

    part = Partition(assignment, k)
    if return_splits:
        return part, splits
    return part
