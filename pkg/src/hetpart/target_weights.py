"""Optimal per-block target sizes under memory constraints.

Given n unit-weight vertices and k PUs, the target weight of block i
should be proportional to PU i's speed — but may never exceed its memory
capacity.  The greedy pass below visits PUs in decreasing speed/memory
order, clips each desired share at the PU's capacity ("saturating" it),
and re-balances the remaining load over the remaining speed.  This
minimizes max_i tw(i)/speed(i) subject to tw(i) <= memory(i); the
saturated PUs always form a prefix of the sorted order.  Both facts are
checked against ``oracle_optimal_objective``, an exhaustive enumeration
over saturated subsets, in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyTopologyError, InfeasibleError, TooLargeError, ValidationError
from .topology import TopologyTree

ORACLE_MAX_K = 20


@dataclass
class TargetWeights:
    """Fractional target sizes per block, in PU-id order.

    ``saturated[i]`` is True iff weight i was forced down to PU i's memory
    capacity.  ``objective`` is max_i weights[i]/speed[i].
    """

    weights: np.ndarray
    saturated: np.ndarray
    objective: float


@dataclass
class IntegerTargets:
    """Integer block sizes summing exactly to the vertex count."""

    sizes: np.ndarray

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return int(self.sizes.sum())


def sorted_pu_order(tree: TopologyTree) -> np.ndarray:
    """PU ids in decreasing speed/memory order.

    Ties break by higher speed first, then lower id (lexsort is stable,
    so leftover ties keep ascending ids), a deterministic total order.
    """
    speeds = tree.speeds()
    ratios = speeds / tree.memories()
    return np.lexsort((-speeds, -ratios))


def compute_target_weights(n: int, tree: TopologyTree) -> TargetWeights:
    """Greedy optimal target sizes for n vertices on ``tree``.

    Raises ``InfeasibleError`` when total memory < n and
    ``EmptyTopologyError`` for k = 0.
    """
    if tree is None or tree.k == 0:
        raise EmptyTopologyError("cannot compute target weights for an empty topology")
    if n < 0:
        raise ValidationError(f"vertex count must be >= 0, got {n}")
    k = tree.k
    if tree.total_memory < n:
        raise InfeasibleError(
            f"total memory {tree.total_memory:g} is smaller than the vertex count {n}"
        )

    order = sorted_pu_order(tree)
    speeds = tree.speeds()[order].tolist()
    memories = tree.memories()[order].tolist()

    weights = []
    append = weights.append
    saturated_at = []
    j_load = float(n)
    j_speed = tree.total_speed
    for pos, (speed, mem) in enumerate(zip(speeds, memories)):
        desired = speed * j_load / j_speed if j_speed > 0.0 else j_load
        if desired > mem:
            append(mem)
            saturated_at.append(pos)
            j_load -= mem
        else:
            append(desired)
            j_load -= desired
        j_speed -= speed

    out_weights = np.empty(k, dtype=np.float64)
    out_weights[order] = weights
    out_sat = np.zeros(k, dtype=bool)
    out_sat[order[saturated_at]] = True

    _renormalize(out_weights, out_sat, tree.memories(), float(n))
    obj = objective(out_weights, tree)
    return TargetWeights(out_weights, out_sat, obj)


def _renormalize(weights: np.ndarray, saturated: np.ndarray, memories: np.ndarray, n: float) -> None:
    """Fold the floating-point residual of the greedy pass into one block.

    Prefers the largest non-saturated block; never pushes a weight above
    its memory capacity.
    """
    residual = n - math.fsum(weights.tolist())
    if residual == 0.0:
        return
    candidates = np.flatnonzero(~saturated)
    if candidates.size == 0:
        candidates = np.arange(len(weights))
    fits = candidates[weights[candidates] + residual <= memories[candidates]]
    pool = fits if fits.size else candidates
    target = pool[np.argmax(weights[pool])]
    weights[target] = min(weights[target] + residual, memories[target])


def objective(weights: Sequence[float] | np.ndarray, tree: TopologyTree) -> float:
    """Load-balance objective: max_i weights[i] / speed[i]."""
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != tree.k:
        raise ValidationError(f"got {len(w)} weights for {tree.k} PUs")
    return float(np.max(w / tree.speeds()))


def oracle_optimal_objective(n: int, tree: TopologyTree) -> float:
    """Exhaustive reference optimum of the objective under memory caps.

    Enumerates every subset S of PUs as the saturated set: fix tw_i =
    memory_i on S, distribute the remainder speed-proportionally over the
    complement, keep feasible candidates, return the minimum objective.
    Only for k <= 20.
    """
    k = tree.k
    if k == 0:
        raise EmptyTopologyError("empty topology")
    if k > ORACLE_MAX_K:
        raise TooLargeError(f"oracle enumeration is limited to k <= {ORACLE_MAX_K}, got {k}")
    speeds = tree.speeds()
    memories = tree.memories()
    ratios = memories / speeds  # objective contribution of a saturated PU

    n_subsets = 1 << k
    masks = (np.arange(n_subsets, dtype=np.uint32)[:, None] >> np.arange(k, dtype=np.uint32)) & 1
    masks = masks.astype(bool)

    sat_mem = masks @ memories
    rest_speed = (~masks) @ speeds
    remainder = float(n) - sat_mem

    # speed-normalized share of every non-saturated PU (uniform per subset)
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(rest_speed > 0.0, remainder / rest_speed, np.inf)

    tol = 1e-9 * max(1.0, float(n))
    full = rest_speed == 0.0
    feasible = np.where(
        full,
        np.abs(remainder) <= tol,
        (remainder >= -tol) & (share <= _min_ratio_outside(masks, memories / speeds) * (1 + 1e-12) + 1e-300),
    )
    if not feasible.any():
        raise InfeasibleError(f"no feasible saturated subset for n={n}")

    sat_obj = np.where(masks, ratios[None, :], -np.inf).max(axis=1)
    sat_obj = np.where(masks.any(axis=1), sat_obj, 0.0)
    obj = np.maximum(sat_obj, np.where(full, 0.0, np.maximum(share, 0.0)))
    return float(obj[feasible].min())


def _min_ratio_outside(masks: np.ndarray, mem_over_speed: np.ndarray) -> np.ndarray:
    """Per subset: min memory/speed over PUs outside the subset (inf if none)."""
    return np.where(masks, np.inf, mem_over_speed[None, :]).min(axis=1)


def integerize(
    tw: TargetWeights | Sequence[float] | np.ndarray,
    n: int,
    caps: Sequence[float] | np.ndarray,
) -> IntegerTargets:
    """Largest-remainder apportionment of n vertices along ``tw``.

    Every size is hard-capped at floor(memory); units displaced by a cap
    go to uncapped blocks in remainder-rank order (lower id wins ties).
    """
    weights = np.asarray(tw.weights if isinstance(tw, TargetWeights) else tw, dtype=np.float64)
    cap_floor = np.floor(np.asarray(caps, dtype=np.float64)).astype(np.int64)
    if len(weights) != len(cap_floor):
        raise ValidationError(f"{len(weights)} weights vs {len(cap_floor)} caps")
    if n < 0:
        raise ValidationError(f"vertex count must be >= 0, got {n}")
    if cap_floor.sum() < n:
        raise InfeasibleError(
            f"integer capacities sum to {int(cap_floor.sum())} < n={n}"
        )
    k = len(weights)
    if n == 0:
        return IntegerTargets(np.zeros(k, dtype=np.int64))

    total = float(weights.sum())
    if total <= 0.0:
        raise ValidationError("target weights must have a positive sum")
    quotas = weights * (float(n) / total)
    base = np.minimum(np.floor(quotas).astype(np.int64), cap_floor)
    remainders = quotas - np.floor(quotas)

    sizes = base.copy()
    deficit = int(n - sizes.sum())
    # rank once; capped blocks drop out of the pool as they fill up
    rank = np.lexsort((np.arange(k), -remainders))
    while deficit > 0:
        progressed = False
        for i in rank:
            if deficit == 0:
                break
            if sizes[i] < cap_floor[i]:
                sizes[i] += 1
                deficit -= 1
                progressed = True
        if not progressed:
            raise InfeasibleError("capacity exhausted while distributing remainder units")
    return IntegerTargets(sizes)
