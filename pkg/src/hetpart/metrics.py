"""Partition quality: edge cut, communication volume, speed-normalized
imbalance, memory feasibility and a simple per-step time model.

Communication volume charges every boundary vertex once per distinct
foreign neighboring block, to the vertex's own block.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .graph import CsrGraph, Partition
from .topology import TopologyTree


class CommVolume(NamedTuple):
    per_block: np.ndarray
    max: int
    total: int


def _check(g: CsrGraph, p: Partition) -> None:
    if p.n != g.n:
        raise ValidationError(f"partition covers {p.n} vertices, graph has {g.n}")


def edge_cut(g: CsrGraph, p: Partition) -> int:
    """Total weight of edges with endpoints in different blocks (each edge once)."""
    _check(g, p)
    src = g.edge_sources()
    a = p.assignment
    mask = (a[src] != a[g.col_idx]) & (src < g.col_idx)
    return int(g.weights_or_ones()[mask].sum())


def comm_volume(g: CsrGraph, p: Partition) -> CommVolume:
    """Per-block count of (boundary vertex, foreign neighbor block) pairs."""
    _check(g, p)
    src = g.edge_sources()
    a = p.assignment
    foreign = a[src] != a[g.col_idx]
    pairs = src[foreign] * np.int64(p.k) + a[g.col_idx[foreign]]
    unique_pairs = np.unique(pairs)
    owners = a[unique_pairs // p.k]
    per_block = np.bincount(owners, minlength=p.k)
    return CommVolume(per_block, int(per_block.max(initial=0)), int(per_block.sum()))


def imbalance(p: Partition, tree: TopologyTree) -> float:
    """Speed-normalized load objective divided by its ideal n/C_s (ideal = 1.0)."""
    if p.k != tree.k:
        raise ValidationError(f"partition has k={p.k}, topology k={tree.k}")
    sizes = p.block_sizes().astype(np.float64)
    if p.n == 0:
        return 1.0
    worst = float(np.max(sizes / tree.speeds()))
    return worst / (p.n / tree.total_speed)


def memory_violations(p: Partition, tree: TopologyTree) -> list[tuple[int, float]]:
    """Blocks whose size exceeds their PU's memory, with overflow amounts."""
    if p.k != tree.k:
        raise ValidationError(f"partition has k={p.k}, topology k={tree.k}")
    sizes = p.block_sizes().astype(np.float64)
    mems = tree.memories()
    over = np.flatnonzero(sizes > mems)
    return [(int(b), float(sizes[b] - mems[b])) for b in over]


def step_time_estimate(p: Partition, tree: TopologyTree, g: CsrGraph, alpha: float) -> float:
    """max over blocks of size/speed + alpha * communication volume."""
    if p.k != tree.k:
        raise ValidationError(f"partition has k={p.k}, topology k={tree.k}")
    sizes = p.block_sizes().astype(np.float64)
    vols = comm_volume(g, p).per_block.astype(np.float64)
    return float(np.max(sizes / tree.speeds() + alpha * vols))
