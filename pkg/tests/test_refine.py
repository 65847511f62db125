from itertools import combinations

import numpy as np
import pytest

from conftest import path_graph, random_graph
from hetpart.errors import InfeasibleStartError, ValidationError
from hetpart.generators import gen_grid, gen_rgg, radius_for_avg_degree
from hetpart.graph import Partition, from_edges
from hetpart.metrics import edge_cut
from hetpart.refine import (
    QuotientGraph,
    RefineParams,
    build_quotient,
    coarsen,
    color_quotient,
    fm_pair_refine,
    multilevel_refine,
    multilevel_refine_with_stats,
)
from hetpart.sfc import partition_sfc
from hetpart.target_weights import IntegerTargets


def _equal_targets(n, k):
    sizes = np.full(k, n // k, dtype=np.int64)
    sizes[: n % k] += 1
    return IntegerTargets(sizes)


AMPLE = 10**9


def test_quotient_path():
    qg = build_quotient(path_graph(4), Partition(np.array([0, 0, 1, 1]), 2))
    assert qg.pairs.tolist() == [[0, 1]]
    assert qg.weights.tolist() == [1]


def test_quotient_cycle_opposite():
    cyc = from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    qg = build_quotient(cyc, Partition(np.array([0, 1, 0, 1]), 2))
    assert qg.pairs.tolist() == [[0, 1]]
    assert qg.weights.tolist() == [4]


def test_quotient_disconnected_blocks():
    g = from_edges(4, [(0, 1), (2, 3)])
    qg = build_quotient(g, Partition(np.array([0, 0, 1, 1]), 2))
    assert qg.edge_count == 0


@pytest.mark.parametrize("seed", range(6))
def test_quotient_weight_equals_cut(seed):
    g = random_graph(seed + 11, 90, avg_degree=5)
    p = Partition(np.array([(v * 17 + seed) % 5 for v in range(90)]), 5)
    qg = build_quotient(g, p)
    assert qg.total_weight() == edge_cut(g, p)


def test_coloring_examples():
    tri = QuotientGraph(3, np.array([[0, 1], [0, 2], [1, 2]]), np.array([5, 3, 1]))
    rounds = color_quotient(tri)
    assert [len(r) for r in rounds] == [1, 1, 1]
    assert rounds[0] == [(0, 1)]  # heaviest pair first

    single = QuotientGraph(2, np.array([[0, 1]]), np.array([2]))
    assert color_quotient(single) == [[(0, 1)]]

    star = QuotientGraph(5, np.array([[0, 1], [0, 2], [0, 3], [0, 4]]), np.array([4, 3, 2, 1]))
    assert [len(r) for r in color_quotient(star)] == [1, 1, 1, 1]


@pytest.mark.parametrize("seed", range(6))
def test_coloring_properties(seed):
    g = random_graph(seed + 50, 60, avg_degree=6)
    p = Partition(np.array([(v * 7 + seed) % 8 for v in range(60)]), 8)
    qg = build_quotient(g, p)
    rounds = color_quotient(qg)
    seen = set()
    for rnd in rounds:
        blocks = [b for pair in rnd for b in pair]
        assert len(blocks) == len(set(blocks))  # vertex-disjoint pairs
        seen.update(tuple(pair) for pair in rnd)
    assert len(seen) == qg.edge_count  # every edge exactly once
    if qg.edge_count:
        assert len(rounds) <= 2 * qg.max_degree() - 1


def test_fm_path_example():
    path = path_graph(4)
    p = Partition(np.array([0, 1, 0, 1]), 2)
    assert edge_cut(path, p) == 3
    newp, gain = fm_pair_refine(path, p, 0, 1, IntegerTargets(np.array([2, 2])), [AMPLE, AMPLE])
    assert gain == 2
    assert edge_cut(path, newp) == 1
    assert newp.assignment.tolist() == [0, 0, 1, 1]


def test_fm_local_optimum_unchanged():
    path = path_graph(4)
    p = Partition(np.array([0, 0, 1, 1]), 2)
    newp, gain = fm_pair_refine(path, p, 0, 1, IntegerTargets(np.array([2, 2])), [AMPLE, AMPLE])
    assert gain == 0
    assert np.array_equal(newp.assignment, p.assignment)


def test_fm_memory_blocked():
    path = path_graph(4)
    p = Partition(np.array([0, 0, 0, 1]), 2)
    newp, gain = fm_pair_refine(path, p, 0, 1, IntegerTargets(np.array([3, 1])), [3, 1])
    assert gain == 0
    assert np.array_equal(newp.assignment, p.assignment)


def test_fm_same_block_rejected():
    with pytest.raises(ValidationError):
        fm_pair_refine(path_graph(4), Partition(np.zeros(4, dtype=np.int64), 1), 0, 0,
                       IntegerTargets(np.array([4])), [AMPLE])


def _exhaustive_best_cut(g, half):
    best = None
    for left in combinations(range(g.n), half):
        assign = np.ones(g.n, dtype=np.int64)
        assign[list(left)] = 0
        best = min(best, edge_cut(g, Partition(assign, 2))) if best is not None else edge_cut(
            g, Partition(assign, 2)
        )
    return best


@pytest.mark.parametrize("seed", range(5))
def test_fm_near_optimal_on_small_graphs(seed):
    n = 10
    g = random_graph(seed + 400, n, avg_degree=3.5)
    opt = _exhaustive_best_cut(g, n // 2)
    targets = IntegerTargets(np.array([n // 2, n // 2]))
    for left in combinations(range(n), n // 2):
        assign = np.ones(n, dtype=np.int64)
        assign[list(left)] = 0
        p = Partition(assign, 2)
        for _ in range(8):  # iterate to a fixed point
            p, gain = fm_pair_refine(g, p, 0, 1, targets, [AMPLE, AMPLE])
            if gain == 0:
                break
        assert edge_cut(g, p) <= max(1.5 * opt, opt)


def test_coarsen_path_single_level():
    path = path_graph(4)
    p = Partition(np.zeros(4, dtype=np.int64), 1)
    levels = coarsen(path, p, RefineParams(min_coarse_size=1, max_levels=1, seed=1))
    assert len(levels) == 1
    assert levels[0].graph.n == 2 and levels[0].graph.m == 1
    assert levels[0].vertex_weight.tolist() == [2, 2]


def test_coarsen_isolated_vertices_copied():
    g = from_edges(3, [(0, 1)])
    levels = coarsen(g, Partition(np.zeros(3, dtype=np.int64), 1),
                     RefineParams(min_coarse_size=1, max_levels=1, seed=0))
    assert levels[0].graph.n == 2
    assert sorted(levels[0].vertex_weight.tolist()) == [1, 2]


@pytest.mark.parametrize("seed", [3, 4])
def test_coarsen_preserves_lifted_cut(seed):
    n = 500
    g, coords = gen_rgg(n, 2, radius_for_avg_degree(n, 2, 6), seed=seed)
    p = partition_sfc(coords, _equal_targets(n, 4))
    fine_cut = edge_cut(g, p)
    levels = coarsen(g, p, RefineParams(min_coarse_size=20, seed=seed))
    assert levels, "expected at least one coarse level"
    assignment = p.assignment
    total_fine = np.ones(n, dtype=np.int64)
    for lv in levels:
        lifted = np.zeros(lv.graph.n, dtype=np.int64)
        lifted[lv.fine_to_coarse] = assignment
        assert lv.graph.n * 2 >= len(assignment)  # matching halves at most
        assert int(lv.vertex_weight.sum()) == n
        assert edge_cut(lv.graph, Partition(lifted, 4)) == fine_cut
        lv.graph.validate()
        assignment = lifted


def test_multilevel_optimal_path_unchanged():
    path = path_graph(4)
    p = Partition(np.array([0, 0, 1, 1]), 2)
    out = multilevel_refine(path, p, IntegerTargets(np.array([2, 2])), [AMPLE, AMPLE])
    assert np.array_equal(out.assignment, p.assignment)


def test_multilevel_improves_sfc_grid():
    # 6 blocks on a 128x128 grid: curve runs are ragged, refinement must win
    g, coords = gen_grid(128, 128)
    t = _equal_targets(g.n, 6)
    p0 = partition_sfc(coords, t)
    cut0 = edge_cut(g, p0)
    out, stats = multilevel_refine_with_stats(
        g, p0, t, np.full(6, AMPLE), None, RefineParams(min_coarse_size=300, seed=2)
    )
    assert stats.cut_final < cut0
    assert stats.cut_final == edge_cut(g, out)
    trace = [stats.cut_initial] + stats.cut_per_round
    assert all(a >= b for a, b in zip(trace, trace[1:]))  # monotone per round
    assert np.all(out.block_sizes() <= np.ceil(t.sizes * 1.03))


def test_multilevel_single_level_degenerates_to_fm():
    g, coords = gen_grid(16, 16)
    t = _equal_targets(g.n, 4)
    p0 = partition_sfc(coords, t)
    out, stats = multilevel_refine_with_stats(
        g, p0, t, np.full(4, AMPLE), None, RefineParams(min_coarse_size=10**6, seed=0)
    )
    assert stats.levels == 1
    assert stats.cut_final <= stats.cut_initial


def test_multilevel_respects_memory_caps():
    n = 2000
    g, coords = gen_rgg(n, 2, radius_for_avg_degree(n, 2, 6), seed=6)
    k = 5
    sizes = np.array([400, 400, 400, 400, 400], dtype=np.int64)
    caps = np.array([410.0, 410.0, 410.0, 410.0, 2000.0])
    p0 = partition_sfc(coords, IntegerTargets(sizes))
    out = multilevel_refine(g, p0, IntegerTargets(sizes), caps,
                            params=RefineParams(min_coarse_size=100, seed=3, epsilon=0.5))
    final = out.block_sizes()
    assert np.all(final <= np.floor(caps))
    assert edge_cut(g, out) <= edge_cut(g, p0)


def test_infeasible_start_repair_and_error():
    path = path_graph(4)
    # block 0 overloaded but one boundary move fixes it
    p = Partition(np.array([0, 0, 0, 1]), 2)
    out = multilevel_refine(path, p, IntegerTargets(np.array([2, 2])), [2, 2])
    assert np.all(out.block_sizes() <= 2)
    # no room anywhere: unrepairable
    with pytest.raises(InfeasibleStartError):
        multilevel_refine(path, p, IntegerTargets(np.array([2, 1])), [2, 1])


def test_refine_params_validation():
    with pytest.raises(ValidationError):
        RefineParams(bfs_depth=0)
    with pytest.raises(ValidationError):
        RefineParams(epsilon=-0.1)
    with pytest.raises(ValidationError):
        RefineParams(rounds=0)
