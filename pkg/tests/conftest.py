"""Shared fixtures and helpers.

BLAS pools are pinned to one thread before numpy is first imported so
every run is single-threaded and bit-reproducible.
"""

import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from hetpart import rng, topology
from hetpart.graph import CsrGraph, Partition, from_edges


def path_graph(n: int = 4) -> CsrGraph:
    return from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int = 4) -> CsrGraph:
    return from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(leaves: int = 3) -> CsrGraph:
    return from_edges(leaves + 1, [(0, i + 1) for i in range(leaves)])


def random_graph(seed: int, n: int, avg_degree: float = 4.0) -> CsrGraph:
    """Seeded sparse random graph (simple, symmetric, no self-loops)."""
    m_target = max(1, int(n * avg_degree / 2))
    raw = rng.raw_stream(seed, 0, 4 * m_target)
    u = (raw[0::2] % np.uint64(n)).astype(np.int64)
    v = (raw[1::2] % np.uint64(n)).astype(np.int64)
    keep = u != v
    u, v = u[keep], v[keep]
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    key = np.unique(lo * np.int64(n) + hi)[:m_target]
    return from_edges(n, np.stack([key // n, key % n], axis=1))


def random_feasible_instance(seed: int, n: int = 10_000, k_min: int = 2, k_max: int = 12):
    """Random heterogeneous topology, feasible for n by rejection.

    Speeds log-uniform in [1, 32]; memories log-uniform in [n/2k, 4n/k].
    """
    for attempt in range(64):
        u = rng.doubles(seed * 1009 + attempt, 2 * k_max + 1)
        k = k_min + int(u[-1] * (k_max - k_min + 1))
        k = min(k, k_max)
        speeds = np.exp(u[:k] * np.log(32.0))
        lo, hi = n / (2.0 * k), 4.0 * n / k
        mems = lo * np.exp(u[k_max : k_max + k] * np.log(hi / lo))
        if mems.sum() >= n:
            return topology.build_tree(list(zip(speeds.tolist(), mems.tolist())))
    raise AssertionError("no feasible topology found")


def brute_edge_cut(g: CsrGraph, p: Partition) -> int:
    total = 0
    a = p.assignment
    w = g.weights_or_ones()
    for v in range(g.n):
        for e in range(g.row_ptr[v], g.row_ptr[v + 1]):
            u = g.col_idx[e]
            if v < u and a[v] != a[u]:
                total += int(w[e])
    return total


def brute_comm_volume(g: CsrGraph, p: Partition) -> list[int]:
    vols = [0] * p.k
    a = p.assignment
    for v in range(g.n):
        foreign = {int(a[u]) for u in g.neighbors(v) if a[u] != a[v]}
        vols[int(a[v])] += len(foreign)
    return vols


@pytest.fixture
def path4() -> CsrGraph:
    return path_graph(4)
