"""Compute-system topologies.

A topology is a tree whose leaves are processing units (PUs) with a speed
(normalized operations per time unit) and a memory capacity (in vertex
units: one graph vertex occupies one unit).  Inner nodes aggregate the
speed and memory of their subtrees; the root therefore carries the system
totals.  Leaf order defines PU ids 0..k-1, and block i of a partition is
always mapped to PU i.

Two synthetic families mirror common CPU/GPU mixes: ``gen_topo1`` (one
slow group plus a fast group whose specs grow per step) and ``gen_topo2``
(fast group plus two slow groups, one of which keeps exactly half the
speed/memory ratio of the fast group).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DivisibilityError, EmptyTopologyError, FormatError, NonPositiveSpecError

#: (speed, memory) of the fast PUs for steps 1..5; slow PUs are always (1, 2).
FAST_PU_STEPS = {
    1: (1.0, 2.0),
    2: (2.0, 3.2),
    3: (4.0, 5.2),
    4: (8.0, 8.5),
    5: (16.0, 13.8),
}

SLOW_PU_SPEED = 1.0
SLOW_PU_MEMORY = 2.0

#: admissible fractions of fast PUs in the synthetic families
FAST_FRACTIONS = (1.0 / 12.0, 1.0 / 6.0)


@dataclass(frozen=True)
class ProcessingUnit:
    """One compute element: leaf index, speed and memory capacity."""

    id: int
    speed: float
    memory: float

    def __post_init__(self) -> None:
        if self.id < 0:
            raise FormatError(f"PU id must be >= 0, got {self.id}")
        if not (self.speed > 0.0) or not math.isfinite(self.speed):
            raise NonPositiveSpecError(f"PU {self.id}: speed must be positive, got {self.speed}")
        if not (self.memory > 0.0) or not math.isfinite(self.memory):
            raise NonPositiveSpecError(f"PU {self.id}: memory must be positive, got {self.memory}")

    @property
    def speed_memory_ratio(self) -> float:
        return self.speed / self.memory


@dataclass
class TopologyNode:
    """Tree node; leaves carry a PU, inner nodes carry children."""

    children: list["TopologyNode"] = field(default_factory=list)
    pu: ProcessingUnit | None = None
    aggregate_speed: float = 0.0
    aggregate_memory: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.pu is not None


@dataclass
class TopologyTree:
    """Validated topology with cached aggregates.

    ``pus`` is the leaf sequence in id order; ``fanouts`` records the
    per-level branching when the tree was built from one (None for flat
    trees).
    """

    root: TopologyNode
    pus: tuple[ProcessingUnit, ...]
    fanouts: tuple[int, ...] | None = None

    @property
    def k(self) -> int:
        return len(self.pus)

    @property
    def total_speed(self) -> float:
        return self.root.aggregate_speed

    @property
    def total_memory(self) -> float:
        return self.root.aggregate_memory

    def speeds(self) -> np.ndarray:
        """Leaf speeds in id order (cached; treat as read-only)."""
        if not hasattr(self, "_speeds"):
            self._speeds = np.array([p.speed for p in self.pus], dtype=np.float64)
        return self._speeds

    def memories(self) -> np.ndarray:
        """Leaf memory capacities in id order (cached; treat as read-only)."""
        if not hasattr(self, "_memories"):
            self._memories = np.array([p.memory for p in self.pus], dtype=np.float64)
        return self._memories

    def nodes(self) -> Iterable[TopologyNode]:
        """All nodes in depth-first order."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaf_groups(self, group_count: int) -> list[range]:
        """Split ids 0..k-1 into ``group_count`` consecutive equal ranges."""
        if group_count <= 0 or self.k % group_count != 0:
            raise DivisibilityError(f"cannot split {self.k} leaves into {group_count} equal groups")
        size = self.k // group_count
        return [range(i * size, (i + 1) * size) for i in range(group_count)]


@dataclass(frozen=True)
class FanoutList:
    """Per-level branching factors k_1..k_h of a hierarchical system."""

    fanouts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.fanouts) == 0:
            raise FormatError("fanout list must not be empty")
        for f in self.fanouts:
            if not isinstance(f, int) or f < 2:
                raise FormatError(f"every fanout must be an integer >= 2, got {f!r}")

    @property
    def block_count(self) -> int:
        return math.prod(self.fanouts)


def _build_flat(pus: Sequence[ProcessingUnit]) -> TopologyNode:
    root = TopologyNode()
    for pu in pus:
        leaf = TopologyNode(pu=pu, aggregate_speed=pu.speed, aggregate_memory=pu.memory)
        root.children.append(leaf)
    _aggregate(root)
    return root


def _build_nested(pus: Sequence[ProcessingUnit], fanouts: Sequence[int]) -> TopologyNode:
    def build(level: int, lo: int, hi: int) -> TopologyNode:
        if level == len(fanouts):
            pu = pus[lo]
            return TopologyNode(pu=pu, aggregate_speed=pu.speed, aggregate_memory=pu.memory)
        node = TopologyNode()
        width = (hi - lo) // fanouts[level]
        for c in range(fanouts[level]):
            node.children.append(build(level + 1, lo + c * width, lo + (c + 1) * width))
        _aggregate(node)
        return node

    return build(0, 0, len(pus))


def _aggregate(node: TopologyNode) -> None:
    node.aggregate_speed = float(sum(c.aggregate_speed for c in node.children))
    node.aggregate_memory = float(sum(c.aggregate_memory for c in node.children))


def build_tree(
    specs: Sequence[tuple[float, float]], fanouts: Sequence[int] | None = None
) -> TopologyTree:
    """Build a topology from (speed, memory) pairs in PU-id order.

    With ``fanouts`` the tree nests level by level and consecutive leaves
    group per subtree; the product of fanouts must equal the PU count.
    """
    if len(specs) == 0:
        raise EmptyTopologyError("topology needs at least one PU")
    pus = tuple(ProcessingUnit(i, float(s), float(m)) for i, (s, m) in enumerate(specs))
    if fanouts is not None:
        fl = FanoutList(tuple(int(f) for f in fanouts))
        if fl.block_count != len(pus):
            raise FormatError(
                f"fanout product {fl.block_count} does not match PU count {len(pus)}"
            )
        return TopologyTree(_build_nested(pus, fl.fanouts), pus, fl.fanouts)
    return TopologyTree(_build_flat(pus), pus, None)


def parse_topology(text: str) -> TopologyTree:
    """Parse the JSON topology document.

    Expected shape: ``{"fanouts": [k_1, ..., k_h], "pus": [{"speed": s,
    "memory": m}, ...]}`` with "fanouts" optional.  PU ids are array
    positions.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise FormatError(f"topology document is not valid JSON: {err}") from None
    if not isinstance(doc, dict) or "pus" not in doc:
        raise FormatError('topology document must be an object with a "pus" array')
    raw_pus = doc["pus"]
    if not isinstance(raw_pus, list) or len(raw_pus) == 0:
        raise EmptyTopologyError('"pus" must be a non-empty array')
    specs = []
    for i, entry in enumerate(raw_pus):
        if not isinstance(entry, dict) or "speed" not in entry or "memory" not in entry:
            raise FormatError(f'PU {i}: expected object with "speed" and "memory"')
        try:
            specs.append((float(entry["speed"]), float(entry["memory"])))
        except (TypeError, ValueError):
            raise FormatError(f"PU {i}: speed/memory must be numbers") from None
    fanouts = doc.get("fanouts")
    if fanouts is not None:
        if not isinstance(fanouts, list) or not all(isinstance(f, int) for f in fanouts):
            raise FormatError('"fanouts" must be an array of integers')
    return build_tree(specs, fanouts)


def write_topology(tree: TopologyTree) -> str:
    """Serialize a topology; floats carry 17 significant digits (lossless)."""
    lines = ["{"]
    if tree.fanouts is not None:
        lines.append(f'  "fanouts": [{", ".join(str(f) for f in tree.fanouts)}],')
    lines.append('  "pus": [')
    rows = [
        f'    {{"speed": {pu.speed:.17g}, "memory": {pu.memory:.17g}}}' for pu in tree.pus
    ]
    lines.append(",\n".join(rows))
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _validate_family_args(k: int, fast_fraction: float, step: int) -> int:
    if step not in FAST_PU_STEPS:
        raise DivisibilityError(f"step must be in 1..5, got {step}")
    if not any(abs(fast_fraction - f) < 1e-15 for f in FAST_FRACTIONS):
        raise DivisibilityError(f"fast_fraction must be 1/12 or 1/6, got {fast_fraction}")
    denom = 12 if abs(fast_fraction - 1.0 / 12.0) < 1e-15 else 6
    if k <= 0 or k % denom != 0:
        raise DivisibilityError(f"k={k} is not divisible by {denom}")
    return k // denom


def gen_topo1(k: int, fast_fraction: float, step: int) -> TopologyTree:
    """Flat topology with ``k * fast_fraction`` fast PUs, the rest slow.

    Slow PUs are (speed 1, memory 2) at every step; fast PUs take their
    specs from ``FAST_PU_STEPS``.  Step 1 is the homogeneous baseline.
    Fast PUs occupy ids 0..|F|-1.
    """
    n_fast = _validate_family_args(k, fast_fraction, step)
    fast = FAST_PU_STEPS[step]
    specs = [fast] * n_fast + [(SLOW_PU_SPEED, SLOW_PU_MEMORY)] * (k - n_fast)
    return build_tree(specs)


def gen_topo2(k: int, fast_fraction: float, step: int) -> TopologyTree:
    """Flat topology with three groups: fast F, medium S1, slow S2.

    F is as in ``gen_topo1``; S1 and S2 split the remaining PUs evenly.
    S2 PUs are (speed 1, memory 2).  S1 PUs have memory 2 and a speed
    chosen so that speed/memory of S1 is exactly half the fast group's
    ratio, i.e. speed(S1) = speed(F) / memory(F).  Group order in ids:
    F, then S1, then S2.
    """
    n_fast = _validate_family_args(k, fast_fraction, step)
    rest = k - n_fast
    if rest % 2 != 0:
        raise DivisibilityError(f"k={k}: remaining {rest} PUs cannot split into two equal groups")
    fast_speed, fast_mem = FAST_PU_STEPS[step]
    s1_speed = 0.5 * (fast_speed / fast_mem) * SLOW_PU_MEMORY
    specs = (
        [(fast_speed, fast_mem)] * n_fast
        + [(s1_speed, SLOW_PU_MEMORY)] * (rest // 2)
        + [(SLOW_PU_SPEED, SLOW_PU_MEMORY)] * (rest // 2)
    )
    return build_tree(specs)


def scale_memory(tree: TopologyTree, factor: float) -> TopologyTree:
    """New topology with every memory capacity multiplied by ``factor``.

    The synthetic families use relative memory units; scaling adapts them
    to a concrete vertex count (e.g. factor 0.6*n/k gives every system
    20% total headroom over n).
    """
    if not (factor > 0.0):
        raise NonPositiveSpecError(f"memory scale factor must be positive, got {factor}")
    specs = [(pu.speed, pu.memory * factor) for pu in tree.pus]
    return build_tree(specs, tree.fanouts)
