"""Multilevel combinatorial refinement of an existing partition.

Pipeline per level: build the quotient graph over blocks, schedule block
pairs into conflict-free rounds by greedy edge coloring (heaviest cut
pairs first), and run a pairwise FM pass on every scheduled pair.  The
graph is first coarsened per block with seeded heavy-edge matching
(cross-block edges survive, so lifted partitions keep their cut), and
refinement repeats at every level on the way back up.

FM move rules: a move may never push the destination block above its
integer memory capacity; the target-size bound target*(1+epsilon) may be
overshot transiently, in which case the next moves must come back out of
the over-full block.  The pass commits the best prefix whose block sizes
all satisfy min(target*(1+epsilon), floor(capacity)), so the cut never
increases.  Every pass runs twice with opposite tie-breaking orders and
the better result is kept.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import InfeasibleStartError, ValidationError
from .graph import CsrGraph, Partition, gather_ranges
from .metrics import edge_cut
from .target_weights import IntegerTargets
from .topology import TopologyTree


@dataclass
class QuotientGraph:
    """Block-level communication graph: edge (a, b) carries the total
    weight of cut edges between blocks a and b."""

    k: int
    pairs: np.ndarray  # (q, 2), a < b
    weights: np.ndarray  # (q,)

    @property
    def edge_count(self) -> int:
        return len(self.pairs)

    def total_weight(self) -> int:
        return int(self.weights.sum())

    def max_degree(self) -> int:
        if self.edge_count == 0:
            return 0
        return int(np.bincount(self.pairs.ravel(), minlength=self.k).max())


@dataclass
class CoarseLevel:
    """One coarsening step: the coarser graph, the fine-to-coarse vertex
    map, and the number of original vertices behind each coarse vertex."""

    graph: CsrGraph
    fine_to_coarse: np.ndarray
    vertex_weight: np.ndarray


@dataclass
class RefineParams:
    bfs_depth: int = 2
    max_levels: int = 10
    min_coarse_size: int = 1000
    epsilon: float = 0.03
    rounds: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.bfs_depth < 1:
            raise ValidationError("bfs_depth must be >= 1")
        if self.epsilon < 0.0:
            raise ValidationError("epsilon must be >= 0")
        if self.max_levels < 0 or self.min_coarse_size < 1 or self.rounds < 1:
            raise ValidationError("max_levels >= 0, min_coarse_size >= 1, rounds >= 1 required")


@dataclass
class RefineStats:
    levels: int = 0
    rounds: int = 0
    moves: int = 0
    gain: int = 0
    cut_initial: int = 0
    cut_final: int = 0
    cut_per_round: list[int] = field(default_factory=list)
    candidate_fraction: float = 0.0


def build_quotient(g: CsrGraph, p: Partition) -> QuotientGraph:
    if p.n != g.n:
        raise ValidationError(f"partition covers {p.n} vertices, graph has {g.n}")
    src = g.edge_sources()
    a = p.assignment
    mask = (a[src] != a[g.col_idx]) & (src < g.col_idx)
    ba = a[src[mask]]
    bb = a[g.col_idx[mask]]
    lo = np.minimum(ba, bb)
    hi = np.maximum(ba, bb)
    w = g.weights_or_ones()[mask]
    key = lo * np.int64(p.k) + hi
    order = np.argsort(key, kind="stable")
    key = key[order]
    w = w[order]
    if len(key) == 0:
        return QuotientGraph(p.k, np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int64))
    starts = np.concatenate([[0], np.flatnonzero(np.diff(key)) + 1])
    ukey = key[starts]
    sums = np.add.reduceat(w, starts)
    pairs = np.stack([ukey // p.k, ukey % p.k], axis=1)
    return QuotientGraph(p.k, pairs, sums)


def color_quotient(qg: QuotientGraph) -> list[list[tuple[int, int]]]:
    """Greedy edge coloring in non-increasing weight order.

    Every quotient edge lands in exactly one round; blocks within a round
    are pairwise disjoint; at most 2*max_degree - 1 rounds are used.
    """
    order = np.lexsort((qg.pairs[:, 1], qg.pairs[:, 0], -qg.weights))
    rounds: list[list[tuple[int, int]]] = []
    used: list[set[int]] = []
    for e in order:
        a, b = int(qg.pairs[e, 0]), int(qg.pairs[e, 1])
        for r, blocks in enumerate(used):
            if a not in blocks and b not in blocks:
                rounds[r].append((a, b))
                blocks.add(a)
                blocks.add(b)
                break
        else:
            rounds.append([(a, b)])
            used.append({a, b})
    return rounds


def _heavy_edge_matching(
    g: CsrGraph, assignment: np.ndarray, active: np.ndarray, seed: int
) -> np.ndarray:
    """Seeded random-order greedy matching within blocks.

    Visits unmatched vertices in a seeded permutation; each matches its
    unmatched same-block neighbor of maximum edge weight (ties: lower id).
    Vertices of inactive blocks stay unmatched.
    """
    n = g.n
    perm = rng.permutation(seed, n).tolist()
    rp = g.row_ptr.tolist()
    cols = g.col_idx.tolist()
    wts = g.weights_or_ones().tolist()
    blk = assignment.tolist()
    act = active.tolist()
    mate = list(range(n))
    matched = bytearray(n)
    for v in perm:
        if matched[v] or not act[blk[v]]:
            continue
        bv = blk[v]
        best = -1
        best_w = 0
        for e in range(rp[v], rp[v + 1]):
            u = cols[e]
            if matched[u] or blk[u] != bv or u == v:
                continue
            we = wts[e]
            if we > best_w:  # ascending neighbor ids: first max wins ties
                best = u
                best_w = we
        if best >= 0:
            mate[v] = best
            mate[best] = v
            matched[v] = 1
            matched[best] = 1
    return np.asarray(mate, dtype=np.int64)


def _contract(
    g: CsrGraph, mate: np.ndarray, assignment: np.ndarray, vweight: np.ndarray
) -> tuple[CsrGraph, np.ndarray, np.ndarray, np.ndarray]:
    """Contract matched pairs; returns (coarse graph, fine_to_coarse map,
    coarse vertex weights, coarse partition)."""
    n = g.n
    ids = np.arange(n, dtype=np.int64)
    rep = np.minimum(ids, mate)
    is_rep = rep == ids
    coarse_id = np.cumsum(is_rep) - 1
    f2c = coarse_id[rep]
    nc = int(is_rep.sum())

    cweight = np.bincount(f2c, weights=vweight, minlength=nc).astype(np.int64)
    cpart = np.zeros(nc, dtype=np.int64)
    cpart[f2c] = assignment

    src = f2c[g.edge_sources()]
    dst = f2c[g.col_idx]
    w = g.weights_or_ones()
    keep = src != dst
    src, dst, w = src[keep], dst[keep], w[keep]
    key = src * np.int64(nc) + dst
    order = np.argsort(key, kind="stable")
    key, w = key[order], w[order]
    if len(key):
        starts = np.concatenate([[0], np.flatnonzero(np.diff(key)) + 1])
        ukey = key[starts]
        sums = np.add.reduceat(w, starts)
    else:
        ukey = np.empty(0, dtype=np.int64)
        sums = np.empty(0, dtype=np.int64)
    cu = ukey // nc
    cv = ukey % nc
    row_ptr = np.zeros(nc + 1, dtype=np.int64)
    np.cumsum(np.bincount(cu, minlength=nc), out=row_ptr[1:])
    cg = CsrGraph(n=nc, m=len(cu) // 2, row_ptr=row_ptr, col_idx=cv, edge_weight=sums)
    return cg, f2c, cweight, cpart


def coarsen(g: CsrGraph, p: Partition, params: RefineParams | None = None) -> list[CoarseLevel]:
    """Per-block heavy-edge coarsening until every block is at most
    ``min_coarse_size`` fine vertices (or the level cap is hit)."""
    params = params or RefineParams()
    levels: list[CoarseLevel] = []
    cur_g = g
    cur_p = p.assignment
    vweight = np.ones(g.n, dtype=np.int64)
    for level in range(params.max_levels):
        block_load = np.bincount(cur_p, weights=vweight, minlength=p.k)
        active = block_load > params.min_coarse_size
        if not active.any():
            break
        mate = _heavy_edge_matching(cur_g, cur_p, active, params.seed + level)
        cg, f2c, cweight, cpart = _contract(cur_g, mate, cur_p, vweight)
        if cg.n >= cur_g.n:  # no pair matched anywhere
            break
        levels.append(CoarseLevel(cg, f2c, cweight))
        cur_g, cur_p, vweight = cg, cpart, cweight
    return levels


class _FmScratch:
    """Reusable per-graph buffers for pairwise FM."""

    def __init__(self, n: int):
        self.local = np.full(n, -1, dtype=np.int64)
        self.seen = np.zeros(n, dtype=bool)


def _pair_candidates(
    g: CsrGraph,
    assignment: np.ndarray,
    a: int,
    b: int,
    verts_a: np.ndarray,
    verts_b: np.ndarray,
    depth: int,
    scratch: _FmScratch,
) -> np.ndarray:
    """Vertices of blocks a, b within ``depth`` BFS hops of the a-b boundary."""
    verts = np.concatenate([verts_a, verts_b])
    if len(verts) == 0:
        return verts
    deg = g.degrees()[verts]
    cols = g.col_idx[gather_ranges(g.row_ptr[verts], deg)]
    srcrep = np.repeat(verts, deg)
    opposite = np.where(assignment[srcrep] == a, b, a)
    touching = assignment[cols] == opposite
    boundary = np.unique(srcrep[touching])

    seen = scratch.seen
    seen[boundary] = True
    collected = [boundary]
    frontier = boundary
    for _ in range(depth):
        if len(frontier) == 0:
            break
        fdeg = g.degrees()[frontier]
        fcols = g.col_idx[gather_ranges(g.row_ptr[frontier], fdeg)]
        blk = assignment[fcols]
        cand = fcols[((blk == a) | (blk == b))]
        cand = cand[~seen[cand]]
        frontier = np.unique(cand)
        seen[frontier] = True
        collected.append(frontier)
    result = np.unique(np.concatenate(collected))
    seen[result] = False  # reset scratch
    return result


def _fm_single_pass(
    cand_count: int,
    side: bytearray,
    gain: list[int],
    adj_start: list[int],
    adj_nbr: list[int],
    adj_w: list[int],
    vw: list[int],
    size_a: int,
    size_b: int,
    soft_a: float,
    soft_b: float,
    hard_a: int,
    hard_b: int,
    tie_sign: int,
    global_ids: list[int],
) -> tuple[list[int], int]:
    """One gain-ordered pass; returns (prefix of moved local ids, best gain).

    ``side[v]`` is 0 for block a, 1 for block b.  ``tie_sign`` +1 prefers
    lower global ids on gain ties, -1 higher ids.
    """
    heap_a: list[tuple[int, int, int]] = []  # moves a -> b
    heap_b: list[tuple[int, int, int]] = []
    for v in range(cand_count):
        entry = (-gain[v], tie_sign * global_ids[v], v)
        (heap_b if side[v] else heap_a).append(entry)
    heapq.heapify(heap_a)
    heapq.heapify(heap_b)
    locked = bytearray(cand_count)

    moves: list[int] = []
    gains: list[int] = []
    cum = 0
    best_cum = 0
    best_len = 0
    valid0 = size_a <= soft_a and size_b <= soft_b

    def pop_admissible(heap: list, want_side: int, room: int):
        """Best non-stale entry whose vertex fits into ``room``; skipped
        oversize entries are pushed back."""
        skipped = []
        found = None
        while heap:
            item = heapq.heappop(heap)
            v = item[2]
            if locked[v] or side[v] != want_side or -item[0] != gain[v]:
                continue  # stale
            if vw[v] > room:
                skipped.append(item)
                if len(skipped) >= 8:
                    break
                continue
            found = item
            break
        for item in skipped:
            heapq.heappush(heap, item)
        return found

    while True:
        a_over = size_a > soft_a
        b_over = size_b > soft_b
        cand_a = cand_b = None
        if not b_over:  # move a -> b allowed unless b must drain first
            cand_a = pop_admissible(heap_a, 0, hard_b - size_b)
        if not a_over:
            cand_b = pop_admissible(heap_b, 1, hard_a - size_a)
        if cand_a is None and cand_b is None:
            break
        if cand_a is not None and (cand_b is None or cand_a[:2] < cand_b[:2]):
            chosen, returned = cand_a, cand_b
            from_side = 0
        else:
            chosen, returned = cand_b, cand_a
            from_side = 1
        if returned is not None:
            heapq.heappush(heap_a if from_side == 1 else heap_b, returned)

        v = chosen[2]
        g_v = gain[v]
        w_v = vw[v]
        if from_side == 0:
            size_a -= w_v
            size_b += w_v
            side[v] = 1
        else:
            size_b -= w_v
            size_a += w_v
            side[v] = 0
        locked[v] = 1
        cum += g_v
        moves.append(v)
        gains.append(g_v)
        for e in range(adj_start[v], adj_start[v + 1]):
            u = adj_nbr[e]
            if locked[u]:
                continue
            w = adj_w[e]
            if side[u] == from_side:
                gain[u] += 2 * w
            else:
                gain[u] -= 2 * w
            entry = (-gain[u], tie_sign * global_ids[u], u)
            heapq.heappush(heap_b if side[u] else heap_a, entry)
        if size_a <= soft_a and size_b <= soft_b and (cum > best_cum or not valid0):
            valid0 = True
            best_cum = cum
            best_len = len(moves)

    # roll back past the best prefix
    for v in moves[best_len:]:
        w_v = vw[v]
        if side[v]:
            side[v] = 0
            size_b -= w_v
            size_a += w_v
        else:
            side[v] = 1
            size_a -= w_v
            size_b += w_v
    return moves[:best_len], best_cum


def _fm_engine(
    g: CsrGraph,
    assignment: np.ndarray,
    vweight: np.ndarray,
    block_sizes: np.ndarray,
    a: int,
    b: int,
    soft: np.ndarray,
    hard: np.ndarray,
    params: RefineParams,
    scratch: _FmScratch,
    verts_a: np.ndarray | None = None,
    verts_b: np.ndarray | None = None,
) -> tuple[int, int, int]:
    """Two-sided pairwise FM between blocks a and b, applied in place.

    Returns (gain, moved count, candidate count)."""
    if verts_a is None:
        verts_a = np.flatnonzero(assignment == a)
    if verts_b is None:
        verts_b = np.flatnonzero(assignment == b)
    cand = _pair_candidates(g, assignment, a, b, verts_a, verts_b, params.bfs_depth, scratch)
    if len(cand) == 0:
        return 0, 0, 0

    local = scratch.local
    local[cand] = np.arange(len(cand))
    deg = g.degrees()[cand]
    entry_idx = gather_ranges(g.row_ptr[cand], deg)
    cols = g.col_idx[entry_idx]
    wts = g.weights_or_ones()[entry_idx]
    src_local = np.repeat(np.arange(len(cand), dtype=np.int64), deg)
    nbr_block = assignment[cols]
    in_a = nbr_block == a
    in_b = nbr_block == b
    w_to_a = np.bincount(src_local[in_a], weights=wts[in_a], minlength=len(cand)).astype(np.int64)
    w_to_b = np.bincount(src_local[in_b], weights=wts[in_b], minlength=len(cand)).astype(np.int64)

    side0 = (assignment[cand] == b).astype(np.int8)
    gain0 = np.where(side0 == 0, w_to_b - w_to_a, w_to_a - w_to_b)

    is_cand_nbr = local[cols] >= 0
    cc_src = src_local[is_cand_nbr]
    cc_nbr = local[cols[is_cand_nbr]]
    cc_w = wts[is_cand_nbr]
    counts = np.bincount(cc_src, minlength=len(cand))
    adj_start = np.zeros(len(cand) + 1, dtype=np.int64)
    np.cumsum(counts, out=adj_start[1:])

    vw_list = vweight[cand].tolist()
    ids_list = cand.tolist()
    adj_start_l = adj_start.tolist()
    adj_nbr_l = cc_nbr.tolist()
    adj_w_l = cc_w.tolist()
    size_a0 = int(block_sizes[a])
    size_b0 = int(block_sizes[b])

    best_moves: list[int] | None = None
    best_gain = -1
    for tie_sign in (1, -1):
        moves, gain_val = _fm_single_pass(
            len(cand),
            bytearray(side0.tolist()),
            gain0.tolist(),
            adj_start_l,
            adj_nbr_l,
            adj_w_l,
            vw_list,
            size_a0,
            size_b0,
            float(soft[a]),
            float(soft[b]),
            int(hard[a]),
            int(hard[b]),
            tie_sign,
            ids_list,
        )
        if gain_val > best_gain:
            best_gain = gain_val
            best_moves = moves

    local[cand] = -1  # reset scratch
    if not best_moves:
        return 0, 0, len(cand)
    moved_ids = cand[np.asarray(best_moves, dtype=np.int64)]
    was_a = assignment[moved_ids] == a
    assignment[moved_ids] = np.where(was_a, b, a)
    delta = int(vweight[moved_ids][was_a].sum() - vweight[moved_ids][~was_a].sum())
    block_sizes[a] -= delta
    block_sizes[b] += delta
    return max(best_gain, 0), len(best_moves), len(cand)


def fm_pair_refine(
    g: CsrGraph,
    p: Partition,
    a: int,
    b: int,
    targets: IntegerTargets,
    caps,
    params: RefineParams | None = None,
    vertex_weight: np.ndarray | None = None,
) -> tuple[Partition, int]:
    """Pairwise FM between blocks a and b; the returned cut never exceeds
    the input cut."""
    if a == b:
        raise ValidationError("blocks a and b must differ")
    params = params or RefineParams()
    vweight = (
        np.ones(g.n, dtype=np.int64) if vertex_weight is None else np.asarray(vertex_weight)
    )
    sizes_t = np.asarray(targets.sizes, dtype=np.int64)
    hard = np.floor(np.asarray(caps, dtype=np.float64)).astype(np.int64)
    soft = np.minimum(sizes_t * (1.0 + params.epsilon), hard.astype(np.float64))
    assignment = p.assignment.copy()
    block_sizes = np.bincount(assignment, weights=vweight, minlength=p.k).astype(np.int64)
    scratch = _FmScratch(g.n)
    gain, _, _ = _fm_engine(
        g, assignment, vweight, block_sizes, a, b, soft, hard, params, scratch
    )
    return Partition(assignment, p.k), gain


def _repair_overloads(
    g: CsrGraph, assignment: np.ndarray, block_sizes: np.ndarray, hard: np.ndarray, k: int
) -> bool:
    """One greedy sweep moving boundary vertices out of memory-overloaded
    blocks; True when every block fits afterwards."""
    for b in np.flatnonzero(block_sizes > hard):
        verts = np.flatnonzero(assignment == b)
        deg = g.degrees()[verts]
        cols = g.col_idx[gather_ranges(g.row_ptr[verts], deg)]
        outside = assignment[cols] != b
        boundary = np.unique(np.repeat(verts, deg)[outside])
        for v in boundary.tolist():
            if block_sizes[b] <= hard[b]:
                break
            nbrs = g.neighbors(v)
            wts = g.neighbor_weights(v)
            best_dst = -1
            best_gain = None
            for dst in np.unique(assignment[nbrs]).tolist():
                if dst == b or block_sizes[dst] + 1 > hard[dst]:
                    continue
                gain_v = int(wts[assignment[nbrs] == dst].sum() - wts[assignment[nbrs] == b].sum())
                if best_gain is None or gain_v > best_gain:
                    best_gain = gain_v
                    best_dst = dst
            if best_dst >= 0:
                assignment[v] = best_dst
                block_sizes[b] -= 1
                block_sizes[best_dst] += 1
    return bool(np.all(block_sizes <= hard))


def multilevel_refine(
    g: CsrGraph,
    p0: Partition,
    targets: IntegerTargets,
    caps,
    tree: TopologyTree | None = None,
    params: RefineParams | None = None,
) -> Partition:
    part, _ = multilevel_refine_with_stats(g, p0, targets, caps, tree, params)
    return part


def multilevel_refine_with_stats(
    g: CsrGraph,
    p0: Partition,
    targets: IntegerTargets,
    caps,
    tree: TopologyTree | None = None,
    params: RefineParams | None = None,
) -> tuple[Partition, RefineStats]:
    """Coarsen under ``p0``, refine every level in colored rounds, project
    back up.  The final cut never exceeds the initial cut and every block
    respects min(target*(1+epsilon), floor(capacity))."""
    params = params or RefineParams()
    k = p0.k
    sizes_t = np.asarray(targets.sizes, dtype=np.int64)
    if len(sizes_t) != k:
        raise ValidationError(f"{len(sizes_t)} targets for k={k} blocks")
    hard = np.floor(np.asarray(caps, dtype=np.float64)).astype(np.int64)
    soft = np.minimum(sizes_t * (1.0 + params.epsilon), hard.astype(np.float64))

    assignment = p0.assignment.copy()
    fine_sizes = np.bincount(assignment, minlength=k).astype(np.int64)
    if np.any(fine_sizes > hard):
        if not _repair_overloads(g, assignment, fine_sizes, hard, k):
            over = np.flatnonzero(fine_sizes > hard)
            raise InfeasibleStartError(
                f"initial partition overloads blocks {over.tolist()} beyond their memory"
            )

    stats = RefineStats()
    stats.cut_initial = edge_cut(g, Partition(assignment, k))

    levels = coarsen(g, Partition(assignment, k), params)
    stats.levels = len(levels) + 1

    graphs = [g] + [lv.graph for lv in levels]
    vweights = [np.ones(g.n, dtype=np.int64)] + [lv.vertex_weight for lv in levels]
    parts: list[np.ndarray] = [assignment]
    for lv in levels:
        coarse_part = np.zeros(lv.graph.n, dtype=np.int64)
        coarse_part[lv.fine_to_coarse] = parts[-1]
        parts.append(coarse_part)

    total_candidates = 0
    total_vertices = 0
    last_cut = stats.cut_initial
    for li in range(len(graphs) - 1, -1, -1):
        graph_l = graphs[li]
        part_l = parts[li]
        vweight_l = vweights[li]
        if li < len(levels):  # project the refined coarser partition down
            part_l = parts[li + 1][levels[li].fine_to_coarse]
        block_sizes = np.bincount(part_l, weights=vweight_l, minlength=k).astype(np.int64)
        scratch = _FmScratch(graph_l.n)
        for _ in range(params.rounds):
            qg = build_quotient(graph_l, Partition(part_l, k))
            for pair_round in color_quotient(qg):
                block_lists = _split_blocks(part_l, k)
                for a, b in pair_round:
                    gain, moved, cand_count = _fm_engine(
                        graph_l,
                        part_l,
                        vweight_l,
                        block_sizes,
                        a,
                        b,
                        soft,
                        hard,
                        params,
                        scratch,
                        block_lists[a],
                        block_lists[b],
                    )
                    stats.gain += gain
                    stats.moves += moved
                    total_candidates += cand_count
                stats.rounds += 1
                round_cut = edge_cut(graph_l, Partition(part_l, k))
                if round_cut > last_cut:
                    raise AssertionError(
                        f"cut increased within a round: {last_cut} -> {round_cut}"
                    )
                last_cut = round_cut
                stats.cut_per_round.append(round_cut)
        total_vertices += graph_l.n
        parts[li] = part_l

    final = Partition(parts[0], k)
    stats.cut_final = edge_cut(g, final)
    stats.candidate_fraction = total_candidates / max(total_vertices, 1)
    final_sizes = final.block_sizes()
    if np.any(final_sizes > np.maximum(soft, fine_sizes)) or np.any(final_sizes > hard):
        raise AssertionError("refinement produced an out-of-bounds block")
    return final, stats


def _split_blocks(assignment: np.ndarray, k: int) -> list[np.ndarray]:
    """Vertex ids per block, ascending (one argsort for all blocks)."""
    order = np.argsort(assignment, kind="stable")
    counts = np.bincount(assignment, minlength=k)
    bounds = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(counts, out=bounds[1:])
    return [order[bounds[i] : bounds[i + 1]] for i in range(k)]
