"""Balanced k-means partitioning with per-block size targets.

Cluster sizes are steered by a multiplicative influence factor per
cluster: vertices join the cluster minimizing dist/influence, and after
each pass the influence of over-full clusters shrinks while that of
under-full clusters grows.  Centers start at the midpoints of the
Hilbert-order target runs, so initialization is deterministic and well
spread.  A final repair pass moves minimum-margin vertices between
clusters until every size matches its target exactly.

``hierarchical_kmeans`` applies the same routine level by level along a
fan-out list (blocks of consecutive ids per subtree) and optionally
re-runs the flat algorithm from the resulting centers to smooth block
borders.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .graph import Coordinates, Partition
from .sfc import DEFAULT_DEPTH, hilbert_keys, rescale_to_unit
from .target_weights import IntegerTargets
from .topology import FanoutList

_GAMMA_MIN = 1e-12
_GAMMA_MAX = 1e12


@dataclass
class KmeansParams:
    max_iters: int = 50
    balance_tolerance: float = 0.02
    influence_step: float = 1.1
    convergence_tol: float = 1e-4
    seed_mode: str = "sfc-quantile"
    sfc_depth: int = DEFAULT_DEPTH

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if not (self.influence_step > 1.0):
            raise ValidationError("influence_step must be > 1")
        if not (self.balance_tolerance > 0.0) or not (self.convergence_tol > 0.0):
            raise ValidationError("tolerances must be > 0")
        if self.seed_mode != "sfc-quantile":
            raise ValidationError(f"unknown seed mode {self.seed_mode!r}")


@dataclass
class ClusterState:
    """Centers/influence as used in the final assignment pass, plus weights."""

    centers: np.ndarray
    influence: np.ndarray
    cluster_weight: np.ndarray


@dataclass
class KmeansResult:
    partition: Partition
    state: ClusterState
    moved_by_repair: np.ndarray
    iterations: int


def _init_centers(points: np.ndarray, sizes: np.ndarray, depth: int) -> np.ndarray:
    keys = hilbert_keys(rescale_to_unit(points), depth)
    order = np.lexsort((np.arange(len(points)), keys))
    offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    mids = np.minimum(offsets[:-1] + sizes // 2, len(points) - 1)
    return points[order[mids]].copy()


def _assign(points: np.ndarray, centers: np.ndarray, inv_gamma2: np.ndarray) -> np.ndarray:
    n = len(points)
    k = len(centers)
    labels = np.empty(n, dtype=np.int64)
    c2 = np.einsum("ij,ij->i", centers, centers)
    chunk = max(1, 4_000_000 // max(k, 1))
    neg2ct = -2.0 * centers.T
    for lo in range(0, n, chunk):
        x = points[lo : lo + chunk]
        d2 = x @ neg2ct
        d2 += np.einsum("ij,ij->i", x, x)[:, None]
        d2 += c2[None, :]
        np.maximum(d2, 0.0, out=d2)
        d2 *= inv_gamma2[None, :]
        labels[lo : lo + chunk] = np.argmin(d2, axis=1)
    return labels


def _centroids(points: np.ndarray, labels: np.ndarray, k: int, fallback: np.ndarray) -> np.ndarray:
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    centers = np.empty((k, points.shape[1]))
    for d in range(points.shape[1]):
        centers[:, d] = np.bincount(labels, weights=points[:, d], minlength=k)
    empty = counts == 0
    counts[empty] = 1.0
    centers /= counts[:, None]
    centers[empty] = fallback[empty]
    return centers


def _effective_d2(points: np.ndarray, center: np.ndarray, inv_g2: float) -> np.ndarray:
    diff = points - center[None, :]
    return np.einsum("ij,ij->i", diff, diff) * inv_g2


def _repair(
    points: np.ndarray,
    labels: np.ndarray,
    sizes: np.ndarray,
    centers: np.ndarray,
    inv_gamma2: np.ndarray,
) -> np.ndarray:
    """Move minimum-margin vertices from over-full to under-full clusters
    until every cluster size equals its target.  Returns moved vertex ids."""
    k = len(sizes)
    counts = np.bincount(labels, minlength=k)
    moved: list[int] = []
    for _ in range(64):
        if np.array_equal(counts, sizes):
            break
        over = np.flatnonzero(counts > sizes)
        under = np.flatnonzero(counts < sizes)
        cand_parts: list[np.ndarray] = []
        margin_parts: list[np.ndarray] = []
        for b in over:
            verts = np.flatnonzero(labels == b)
            own = _effective_d2(points[verts], centers[b], inv_gamma2[b])
            marg = np.empty((len(verts), len(under)))
            for j, u in enumerate(under):
                marg[:, j] = _effective_d2(points[verts], centers[u], inv_gamma2[u]) - own
            # keep enough low-margin rows to cover the excess of this block
            keep = min(len(verts), 2 * int(counts[b] - sizes[b]) + 64)
            if keep < len(verts):
                best = np.argpartition(marg.min(axis=1), keep - 1)[:keep]
                best = np.sort(best)
                verts, marg = verts[best], marg[best]
            cand_parts.append(verts)
            margin_parts.append(marg)
        cand = np.concatenate(cand_parts)
        margins = np.concatenate(margin_parts, axis=0)
        flat = np.argsort(margins, axis=None, kind="stable")
        vi, uj = np.unravel_index(flat, margins.shape)
        touched = np.zeros(len(cand), dtype=bool)
        for v_idx, u_idx in zip(vi, uj):
            if touched[v_idx]:
                continue
            v = cand[v_idx]
            src = labels[v]
            dst = under[u_idx]
            if counts[src] <= sizes[src] or counts[dst] >= sizes[dst]:
                continue
            labels[v] = dst
            counts[src] -= 1
            counts[dst] += 1
            touched[v_idx] = True
            moved.append(int(v))
            if np.array_equal(counts, sizes):
                break
    if not np.array_equal(counts, sizes):
        raise AssertionError("balance repair did not converge")
    return np.asarray(sorted(set(moved)), dtype=np.int64)


def kmeans_with_state(
    coords: Coordinates,
    targets: IntegerTargets,
    params: KmeansParams | None = None,
    initial_centers: np.ndarray | None = None,
) -> KmeansResult:
    params = params or KmeansParams()
    sizes = np.asarray(targets.sizes, dtype=np.int64)
    points = coords.points
    n = coords.n
    if int(sizes.sum()) != n:
        raise ValidationError(f"targets sum to {int(sizes.sum())} but there are {n} points")
    k = len(sizes)

    if initial_centers is not None:
        centers = np.asarray(initial_centers, dtype=np.float64).copy()
        if centers.shape != (k, coords.dim):
            raise ValidationError(f"initial centers must be {k} x {coords.dim}")
    else:
        centers = _init_centers(points, sizes, params.sfc_depth)
    gamma = np.ones(k)
    diag = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0))) if n else 1.0
    diag = max(diag, 1e-300)

    hi = sizes * (1.0 + params.balance_tolerance)
    lo = sizes * (1.0 - params.balance_tolerance)
    labels = np.zeros(n, dtype=np.int64)
    used_centers = centers.copy()
    used_gamma = gamma.copy()
    iterations = 0
    for iterations in range(1, params.max_iters + 1):
        inv_g2 = 1.0 / (gamma * gamma)
        used_centers = centers.copy()
        used_gamma = gamma.copy()
        labels = _assign(points, centers, inv_g2)
        counts = np.bincount(labels, minlength=k)

        gamma = np.where(counts > hi, gamma / params.influence_step, gamma)
        gamma = np.where(counts < lo, gamma * params.influence_step, gamma)
        np.clip(gamma, _GAMMA_MIN, _GAMMA_MAX, out=gamma)

        new_centers = _centroids(points, labels, k, centers)
        movement = float(np.sqrt(np.max(np.einsum("ij,ij->i", new_centers - centers, new_centers - centers))))
        centers = new_centers
        if movement < params.convergence_tol * diag and np.all(counts <= hi) and np.all(counts >= lo):
            break

    moved = _repair(points, labels, sizes, used_centers, 1.0 / (used_gamma * used_gamma))
    state = ClusterState(used_centers, used_gamma, np.bincount(labels, minlength=k).astype(np.float64))
    return KmeansResult(Partition(labels, k), state, moved, iterations)


def partition_kmeans(
    coords: Coordinates,
    targets: IntegerTargets,
    params: KmeansParams | None = None,
    initial_centers: np.ndarray | None = None,
) -> Partition:
    """Balanced k-means; block sizes match ``targets`` exactly."""
    return kmeans_with_state(coords, targets, params, initial_centers).partition


def hierarchical_kmeans(
    coords: Coordinates,
    fanouts: FanoutList | Sequence[int],
    targets: IntegerTargets,
    params: KmeansParams | None = None,
    smooth: bool = True,
) -> Partition:
    """Partition level by level along ``fanouts`` (k = prod fanouts blocks).

    Level one splits all points into k_1 groups whose targets are the
    per-subtree sums; each group is then partitioned recursively.  With
    ``smooth`` a final flat pass re-runs balanced k-means from the
    resulting block centers to clean up the borders.
    """
    fl = fanouts if isinstance(fanouts, FanoutList) else FanoutList(tuple(int(f) for f in fanouts))
    sizes = np.asarray(targets.sizes, dtype=np.int64)
    k = len(sizes)
    if fl.block_count != k:
        raise ValidationError(f"fanout product {fl.block_count} does not match k={k}")
    points = coords.points
    n = coords.n
    if int(sizes.sum()) != n:
        raise ValidationError(f"targets sum to {int(sizes.sum())} but there are {n} points")

    assignment = np.zeros(n, dtype=np.int64)

    def recurse(ids: np.ndarray, level: int, blk_lo: int, blk_hi: int) -> None:
        if level == len(fl.fanouts):
            assignment[ids] = blk_lo
            return
        fan = fl.fanouts[level]
        group = (blk_hi - blk_lo) // fan
        group_sizes = np.array(
            [int(sizes[blk_lo + g * group : blk_lo + (g + 1) * group].sum()) for g in range(fan)],
            dtype=np.int64,
        )
        sub = partition_kmeans(
            Coordinates(points[ids]), IntegerTargets(group_sizes), params
        ).assignment
        for g in range(fan):
            recurse(ids[sub == g], level + 1, blk_lo + g * group, blk_lo + (g + 1) * group)

    recurse(np.arange(n, dtype=np.int64), 0, 0, k)
    part = Partition(assignment, k)
    if not smooth:
        return part

    fallback = _init_centers(points, sizes, (params or KmeansParams()).sfc_depth)
    centers = _centroids(points, assignment, k, fallback)
    return partition_kmeans(coords, targets, params, initial_centers=centers)
