"""Hilbert space-filling-curve ordering and run-length partitioning.

The 2D curve fixes its orientation at depth 1 to visit the quadrants in
the order (0,0), (0,1), (1,1), (1,0) (keys 0..3); deeper levels follow by
the usual reflect/swap recursion.  The 3D curve uses the transpose-form
bit transform (Skilling 2004).  Keys fit in 64 bits for depths up to 21
in both dimensions.

``partition_sfc`` sorts vertices by (key, id) and cuts the order into
consecutive runs of exactly the requested block sizes, so balance is
always exact.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .graph import Coordinates, Partition
from .target_weights import IntegerTargets

DEFAULT_DEPTH = 16
MAX_DEPTH = 21
_UNIT_TOL = 1e-12
_BELOW_ONE = 1.0 - 2.0**-52


def rescale_to_unit(points: np.ndarray) -> np.ndarray:
    """Map the bounding box into [0, 1): min corner to 0, max to 1-ulp.

    An axis with zero extent collapses to 0.
    """
    pts = np.asarray(points, dtype=np.float64)
    mins = pts.min(axis=0)
    extent = pts.max(axis=0) - mins
    extent[extent == 0.0] = 1.0
    scaled = (pts - mins) / extent * _BELOW_ONE
    return np.clip(scaled, 0.0, _BELOW_ONE)


def _to_cells(points: np.ndarray, depth: int) -> np.ndarray:
    if not (1 <= depth <= MAX_DEPTH):
        raise ValidationError(f"depth must be in 1..{MAX_DEPTH}, got {depth}")
    pts = np.asarray(points, dtype=np.float64)
    if pts.min() < -_UNIT_TOL or pts.max() > 1.0 + _UNIT_TOL:
        raise ValidationError("point outside the unit cube (beyond 1e-12 tolerance)")
    pts = np.clip(pts, 0.0, _BELOW_ONE)
    side = np.uint64(1) << np.uint64(depth)
    return (pts * float(side)).astype(np.uint64)


def hilbert_keys(points: np.ndarray, depth: int = DEFAULT_DEPTH) -> np.ndarray:
    """Hilbert key per point; points lie in [0,1)^dim (tolerance 1e-12)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    dim = pts.shape[1]
    cells = _to_cells(pts, depth)
    if dim == 2:
        return _keys_2d(cells[:, 0], cells[:, 1], depth)
    if dim == 3:
        return _keys_3d(cells[:, 0], cells[:, 1], cells[:, 2], depth)
    raise ValidationError(f"dim must be 2 or 3, got {dim}")


def hilbert_index(point, depth: int = DEFAULT_DEPTH) -> int:
    """Key of a single point."""
    return int(hilbert_keys(np.asarray(point, dtype=np.float64)[None, :], depth)[0])


def _keys_2d(x: np.ndarray, y: np.ndarray, depth: int) -> np.ndarray:
    x = x.copy()
    y = y.copy()
    full = np.uint64((1 << depth) - 1)
    key = np.zeros(len(x), dtype=np.uint64)
    s = np.uint64(1) << np.uint64(depth - 1)
    one = np.uint64(1)
    while s >= one:
        rx = ((x & s) != 0).astype(np.uint64)
        ry = ((y & s) != 0).astype(np.uint64)
        key += (s * s) * ((np.uint64(3) * rx) ^ ry)
        # reflect/swap the frame for the next level
        swap = ry == 0
        flip = swap & (rx == 1)
        xf = np.where(flip, full - x, x)
        yf = np.where(flip, full - y, y)
        x = np.where(swap, yf, xf)
        y = np.where(swap, xf, yf)
        s >>= one
    return key


def _keys_3d(x: np.ndarray, y: np.ndarray, z: np.ndarray, depth: int) -> np.ndarray:
    # transpose-form transform (Skilling), vectorized over points
    axes = [x.copy(), y.copy(), z.copy()]
    one = np.uint64(1)
    q = np.uint64(1) << np.uint64(depth - 1)
    while q > one:
        p = q - one
        for i in range(3):
            has = (axes[i] & q) != 0
            inverted = axes[0] ^ p
            t = (axes[0] ^ axes[i]) & p
            swapped0 = axes[0] ^ t
            swappedi = axes[i] ^ t
            if i == 0:
                axes[0] = np.where(has, inverted, axes[0])
            else:
                new0 = np.where(has, inverted, swapped0)
                axes[i] = np.where(has, axes[i], swappedi)
                axes[0] = new0
        q >>= one
    axes[1] ^= axes[0]
    axes[2] ^= axes[1]
    t = np.zeros_like(axes[0])
    q = np.uint64(1) << np.uint64(depth - 1)
    while q > one:
        t = np.where((axes[2] & q) != 0, t ^ (q - one), t)
        q >>= one
    for i in range(3):
        axes[i] ^= t

    key = np.zeros_like(axes[0])
    for b in range(depth - 1, -1, -1):
        shift = np.uint64(b)
        for i in range(3):
            key = (key << one) | ((axes[i] >> shift) & one)
    return key


def partition_sfc(
    coords: Coordinates, targets: IntegerTargets, depth: int = DEFAULT_DEPTH
) -> Partition:
    """Assign Hilbert-order runs of exactly ``targets.sizes[i]`` vertices to block i."""
    sizes = np.asarray(targets.sizes, dtype=np.int64)
    n = coords.n
    if int(sizes.sum()) != n:
        raise ValidationError(f"targets sum to {int(sizes.sum())} but the graph has {n} vertices")
    keys = hilbert_keys(rescale_to_unit(coords.points), depth)
    order = np.lexsort((np.arange(n), keys))
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.repeat(np.arange(len(sizes), dtype=np.int64), sizes)
    return Partition(assignment, len(sizes))
