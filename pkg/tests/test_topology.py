import json

import numpy as np
import pytest

from hetpart.errors import (
    DivisibilityError,
    EmptyTopologyError,
    FormatError,
    NonPositiveSpecError,
)
from hetpart.target_weights import compute_target_weights
from hetpart.topology import (
    FAST_PU_STEPS,
    FanoutList,
    build_tree,
    gen_topo1,
    gen_topo2,
    parse_topology,
    scale_memory,
    write_topology,
)


def test_parse_flat_homogeneous():
    doc = json.dumps({"pus": [{"speed": 1, "memory": 2}] * 4})
    tree = parse_topology(doc)
    assert tree.k == 4
    assert tree.total_speed == 4.0
    assert tree.total_memory == 8.0
    assert [pu.id for pu in tree.pus] == [0, 1, 2, 3]


def test_parse_rejects_zero_speed():
    doc = json.dumps({"pus": [{"speed": 0, "memory": 2}]})
    with pytest.raises(NonPositiveSpecError):
        parse_topology(doc)


def test_parse_rejects_negative_memory():
    with pytest.raises(NonPositiveSpecError):
        build_tree([(1.0, -3.0)])


def test_parse_nested_fanouts():
    doc = json.dumps({"fanouts": [2, 3], "pus": [{"speed": 1, "memory": 2}] * 6})
    tree = parse_topology(doc)
    assert tree.fanouts == (2, 3)
    assert len(tree.root.children) == 2
    for child in tree.root.children:
        assert len(child.children) == 3
        assert all(grand.is_leaf for grand in child.children)
        assert child.aggregate_speed == 3.0
        assert child.aggregate_memory == 6.0


@pytest.mark.parametrize(
    "doc",
    [
        "not json at all {",
        json.dumps({"nope": []}),
        json.dumps({"pus": []}),
        json.dumps({"pus": [{"speed": 1}]}),
        json.dumps({"pus": [{"speed": "fast", "memory": 1}]}),
        json.dumps({"fanouts": [2, 2], "pus": [{"speed": 1, "memory": 2}] * 6}),
        json.dumps({"fanouts": [1, 6], "pus": [{"speed": 1, "memory": 2}] * 6}),
        json.dumps({"fanouts": "2x3", "pus": [{"speed": 1, "memory": 2}] * 6}),
    ],
)
def test_parse_rejects_malformed(doc):
    with pytest.raises((FormatError, EmptyTopologyError)):
        parse_topology(doc)


def test_write_parse_round_trip():
    tree = build_tree([(1.5, 2.25), (0.1, 7.125), (16.0, 13.8)], fanouts=None)
    again = parse_topology(write_topology(tree))
    assert [(p.speed, p.memory) for p in again.pus] == [(p.speed, p.memory) for p in tree.pus]

    nested = build_tree([(1 / 3, 2 / 7)] * 6, fanouts=[2, 3])
    again = parse_topology(write_topology(nested))
    assert again.fanouts == (2, 3)
    # 17 significant digits reproduce doubles exactly
    assert again.pus[0].speed == 1 / 3
    assert again.pus[0].memory == 2 / 7


def test_gen_topo1_step3():
    tree = gen_topo1(24, 1 / 12, 3)
    fast = [pu for pu in tree.pus if pu.speed != 1.0]
    slow = [pu for pu in tree.pus if pu.speed == 1.0]
    assert len(fast) == 2 and len(slow) == 22
    assert all((pu.speed, pu.memory) == (4.0, 5.2) for pu in fast)
    assert all((pu.speed, pu.memory) == (1.0, 2.0) for pu in slow)


def test_gen_topo1_step1_homogeneous():
    tree = gen_topo1(24, 1 / 12, 1)
    assert all((pu.speed, pu.memory) == (1.0, 2.0) for pu in tree.pus)
    # homogeneous baseline: all target weights equal (n within the 2k memory)
    tw = compute_target_weights(36, tree)
    assert np.allclose(tw.weights, 1.5)
    assert not tw.saturated.any()


def test_gen_topo1_divisibility():
    with pytest.raises(DivisibilityError):
        gen_topo1(25, 1 / 12, 2)
    with pytest.raises(DivisibilityError):
        gen_topo1(16, 1 / 12, 1)
    with pytest.raises(DivisibilityError):
        gen_topo1(24, 1 / 12, 6)
    with pytest.raises(DivisibilityError):
        gen_topo1(24, 0.5, 2)


def test_gen_topo2_step4_specs():
    tree = gen_topo2(24, 1 / 6, 4)
    fast = tree.pus[:4]
    s1 = tree.pus[4:14]
    s2 = tree.pus[14:]
    assert all((pu.speed, pu.memory) == (8.0, 8.5) for pu in fast)
    # half the fast speed/memory ratio at memory 2: speed = 8/8.5
    assert all(pu.memory == 2.0 for pu in s1)
    assert all(pu.speed == pytest.approx(8.0 / 8.5, abs=0) for pu in s1)
    assert all((pu.speed, pu.memory) == (1.0, 2.0) for pu in s2)


def test_gen_topo2_step1_s1_speed():
    tree = gen_topo2(24, 1 / 12, 1)
    s1 = tree.pus[2:13]
    assert all(pu.speed == 0.5 and pu.memory == 2.0 for pu in s1)


@pytest.mark.parametrize("frac", [1 / 12, 1 / 6])
@pytest.mark.parametrize("step", [1, 2, 3, 4, 5])
def test_gen_topo2_ratio_identity(frac, step):
    tree = gen_topo2(24, frac, step)
    n_fast = int(round(24 * frac))
    fast = tree.pus[0]
    s1 = tree.pus[n_fast]
    assert (s1.speed / s1.memory) / (fast.speed / fast.memory) == 0.5


def test_gen_topo2_divisibility():
    with pytest.raises(DivisibilityError):
        gen_topo2(12, 1 / 12, 2)  # 11 remaining PUs cannot split evenly


def test_gen_topo2_assignment_order():
    # F always precedes S1 in speed/memory-sorted order (ratio factor 2);
    # S1 precedes S2 only once the fast ratio exceeds S2's 0.5 (step 5)
    from hetpart.target_weights import sorted_pu_order

    for step in range(2, 6):
        tree = gen_topo2(24, 1 / 6, step)
        order = sorted_pu_order(tree)
        groups = np.asarray([0] * 4 + [1] * 10 + [2] * 10)[order]
        f_pos = np.flatnonzero(groups == 0)
        s1_pos = np.flatnonzero(groups == 1)
        assert f_pos.max() < s1_pos.min()
        if step == 5:
            assert s1_pos.max() < np.flatnonzero(groups == 2).min()


def _leaf_sums(node):
    if node.is_leaf:
        return node.pu.speed, node.pu.memory
    s = m = 0.0
    for child in node.children:
        cs, cm = _leaf_sums(child)
        s += cs
        m += cm
    return s, m


@pytest.mark.parametrize("seed", range(10))
def test_aggregates_match_leaf_sums(seed):
    from hetpart import rng

    u = rng.doubles(seed, 24)
    specs = [(0.1 + 31.9 * a, 0.5 + 10 * b) for a, b in zip(u[:12], u[12:])]
    fanouts = [[2, 2, 3], [12], [3, 4], None][seed % 4]
    tree = build_tree(specs, fanouts)
    for node in tree.nodes():
        s, m = _leaf_sums(node)
        assert node.aggregate_speed == pytest.approx(s, rel=1e-12)
        assert node.aggregate_memory == pytest.approx(m, rel=1e-12)


def test_fast_pu_table_values():
    assert FAST_PU_STEPS == {1: (1.0, 2.0), 2: (2.0, 3.2), 3: (4.0, 5.2), 4: (8.0, 8.5), 5: (16.0, 13.8)}


def test_fanout_list_validation():
    assert FanoutList((4, 6)).block_count == 24
    with pytest.raises(FormatError):
        FanoutList((1, 6))
    with pytest.raises(FormatError):
        FanoutList(())


def test_scale_memory():
    tree = gen_topo1(12, 1 / 6, 2)
    scaled = scale_memory(tree, 100.0)
    assert scaled.total_memory == pytest.approx(tree.total_memory * 100.0)
    assert [p.speed for p in scaled.pus] == [p.speed for p in tree.pus]
    with pytest.raises(NonPositiveSpecError):
        scale_memory(tree, 0.0)


def test_empty_topology():
    with pytest.raises(EmptyTopologyError):
        build_tree([])


def test_leaf_groups():
    tree = gen_topo1(24, 1 / 6, 1)
    groups = tree.leaf_groups(4)
    assert [list(g)[:2] for g in groups] == [[0, 1], [6, 7], [12, 13], [18, 19]]
    with pytest.raises(DivisibilityError):
        tree.leaf_groups(5)
