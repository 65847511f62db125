"""Synthetic meshes: 2D grid lattices and random geometric graphs.

RGG points are drawn from the SplitMix64 counter stream documented in
``rng`` (coordinate d of point i is stream output i*dim + d), so the same
seed yields bit-identical graphs on every platform.  Neighbor search uses
grid buckets of cell width equal to the radius, which is expected
O(n * average degree); a brute-force oracle in the tests checks the
bucketed result exactly.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from . import rng
from .errors import ValidationError
from .graph import Coordinates, CsrGraph, gather_ranges


def gen_grid(nx: int, ny: int) -> tuple[CsrGraph, Coordinates]:
    """4-neighbor lattice with nx*ny vertices at integer positions (i, j).

    Vertex (i, j) has id i*ny + j; the edge count is nx*(ny-1) + ny*(nx-1).
    """
    if nx < 1 or ny < 1:
        raise ValidationError(f"grid extents must be >= 1, got {nx} x {ny}")
    n = nx * ny
    if n > 2**31:
        raise ValidationError(f"grid with {n} vertices exceeds the supported size")
    ids = np.arange(n, dtype=np.int64).reshape(nx, ny)
    right = np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1)
    up = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
    edges = np.concatenate([right, up], axis=0)

    u = np.concatenate([edges[:, 0], edges[:, 1]])
    v = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((v, u))
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(u, minlength=n), out=row_ptr[1:])
    g = CsrGraph(n=n, m=len(edges), row_ptr=row_ptr, col_idx=v[order])

    ix, iy = np.divmod(np.arange(n, dtype=np.int64), ny)
    coords = Coordinates(np.stack([ix, iy], axis=1).astype(np.float64))
    return g, coords


def radius_for_avg_degree(n: int, dim: int, target: float) -> float:
    """Radius giving expected degree ``target`` for n uniform points in the unit cube."""
    if n <= 0 or target <= 0:
        raise ValidationError("n and target degree must be positive")
    if dim == 2:
        return math.sqrt(target / (math.pi * n))
    if dim == 3:
        return (3.0 * target / (4.0 * math.pi * n)) ** (1.0 / 3.0)
    raise ValidationError(f"dim must be 2 or 3, got {dim}")


def gen_rgg(n: int, dim: int, radius: float, seed: int) -> tuple[CsrGraph, Coordinates]:
    """Random geometric graph: n seeded uniform points, edge iff distance <= radius.

    Disconnected results are valid; use ``graph.connected_component_count``
    to report connectivity.
    """
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    if dim not in (2, 3):
        raise ValidationError(f"dim must be 2 or 3, got {dim}")
    if radius < 0 or not math.isfinite(radius):
        raise ValidationError(f"radius must be a finite non-negative real, got {radius}")
    points = rng.doubles(seed, n * dim).reshape(n, dim)
    coords = Coordinates(points.copy())
    if n == 0 or radius == 0.0:
        return _empty_graph(n), coords
    src, dst = _radius_pairs(points, radius)
    u = np.concatenate([src, dst])
    v = np.concatenate([dst, src])
    order = np.lexsort((v, u))
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(u, minlength=n), out=row_ptr[1:])
    g = CsrGraph(n=n, m=len(src), row_ptr=row_ptr, col_idx=v[order])
    return g, coords


def _empty_graph(n: int) -> CsrGraph:
    return CsrGraph(
        n=n, m=0, row_ptr=np.zeros(n + 1, dtype=np.int64), col_idx=np.empty(0, dtype=np.int64)
    )


def _half_offsets(dim: int) -> list[tuple[int, ...]]:
    """Lexicographically positive cell offsets (self cell excluded)."""
    return [off for off in product((-1, 0, 1), repeat=dim) if off > (0,) * dim]


def _radius_pairs(points: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """All unordered pairs (u < v along bucket sweep) within ``radius``."""
    n, dim = points.shape
    cell = (points / radius).astype(np.int64)
    grid_dims = cell.max(axis=0) + 1
    if math.prod(int(d) for d in grid_dims) > 2**62:
        raise ValidationError("radius is too small relative to the point spread")
    strides = np.ones(dim, dtype=np.int64)
    for d in range(dim - 2, -1, -1):
        strides[d] = strides[d + 1] * grid_dims[d + 1]
    key = cell @ strides

    order = np.argsort(key, kind="stable")
    sorted_key = key[order]
    r2 = radius * radius

    src_parts: list[np.ndarray] = []
    dst_parts: list[np.ndarray] = []

    # same-cell pairs: later points in the sorted run pair with earlier ones
    left = np.searchsorted(sorted_key, key, side="left")
    right = np.searchsorted(sorted_key, key, side="right")
    pos_in_sorted = np.empty(n, dtype=np.int64)
    pos_in_sorted[order] = np.arange(n)
    counts = pos_in_sorted - left
    src_parts.append(np.repeat(np.arange(n, dtype=np.int64), counts))
    dst_parts.append(order[gather_ranges(left, counts)])

    for off in _half_offsets(dim):
        ncell = cell + np.asarray(off, dtype=np.int64)
        valid = np.all((ncell >= 0) & (ncell < grid_dims), axis=1)
        nkey = ncell @ strides
        lo = np.searchsorted(sorted_key, nkey, side="left")
        hi = np.searchsorted(sorted_key, nkey, side="right")
        counts = np.where(valid, hi - lo, 0)
        src_parts.append(np.repeat(np.arange(n, dtype=np.int64), counts))
        dst_parts.append(order[gather_ranges(lo, counts)])

    src = np.concatenate(src_parts)
    dst = np.concatenate(dst_parts)
    diff = points[src] - points[dst]
    close = np.einsum("ij,ij->i", diff, diff) <= r2
    return src[close], dst[close]
