import math

import numpy as np
import pytest

from hetpart import rng
from hetpart.errors import ValidationError
from hetpart.generators import gen_grid, gen_rgg, radius_for_avg_degree


def _splitmix64_reference(x: int) -> int:
    """Independent pure-int implementation of the published mix function."""
    mask = (1 << 64) - 1
    z = x & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return (z ^ (z >> 31)) & mask


def test_prng_matches_reference():
    golden = 0x9E3779B97F4A7C15
    for seed in (0, 1, 42, 2**63):
        out = rng.raw_stream(seed, 0, 4)
        expect = [_splitmix64_reference((seed + (j + 1) * golden) & ((1 << 64) - 1)) for j in range(4)]
        assert out.tolist() == expect


def test_doubles_range_and_determinism():
    d1 = rng.doubles(7, 1000)
    d2 = rng.doubles(7, 1000)
    assert np.array_equal(d1, d2)
    assert d1.min() >= 0.0 and d1.max() < 1.0
    # chunked generation agrees with one-shot generation
    chunked = np.concatenate([rng.doubles(7, 400), rng.doubles(7, 600, start=400)])
    assert np.array_equal(chunked, d1)


def test_grid_examples():
    g, c = gen_grid(2, 2)
    assert (g.n, g.m) == (4, 4)
    assert all(len(g.neighbors(v)) == 2 for v in range(4))  # a 4-cycle

    g, c = gen_grid(1, 5)
    assert (g.n, g.m) == (5, 4)
    assert len(g.neighbors(0)) == 1 and len(g.neighbors(2)) == 2

    g, c = gen_grid(3, 3)
    assert (g.n, g.m) == (9, 12)
    assert c.points[4].tolist() == [1.0, 1.0]


@pytest.mark.parametrize("nx,ny", [(1, 1), (7, 3), (12, 12), (2, 9)])
def test_grid_edge_formula(nx, ny):
    g, c = gen_grid(nx, ny)
    g.validate()
    assert g.n == nx * ny
    assert g.m == nx * (ny - 1) + ny * (nx - 1)
    assert c.n == g.n


def test_grid_validation():
    with pytest.raises(ValidationError):
        gen_grid(0, 5)


def test_rgg_trivial_cases():
    g, c = gen_rgg(2, 2, 1.5, seed=1)  # radius exceeds the max possible distance
    assert g.m == 1
    g0, _ = gen_rgg(2, 2, 0.0, seed=1)
    assert g0.m == 0
    ge, ce = gen_rgg(0, 2, 0.5, seed=1)
    assert ge.n == 0 and ce.n == 0
    with pytest.raises(ValidationError):
        gen_rgg(5, 4, 0.1, seed=1)
    with pytest.raises(ValidationError):
        gen_rgg(5, 2, -0.1, seed=1)


def test_rgg_determinism():
    a, ca = gen_rgg(2000, 3, radius_for_avg_degree(2000, 3, 6), seed=77)
    b, cb = gen_rgg(2000, 3, radius_for_avg_degree(2000, 3, 6), seed=77)
    assert np.array_equal(ca.points, cb.points)
    assert np.array_equal(a.row_ptr, b.row_ptr)
    assert np.array_equal(a.col_idx, b.col_idx)
    other, _ = gen_rgg(2000, 3, radius_for_avg_degree(2000, 3, 6), seed=78)
    assert not np.array_equal(a.col_idx, other.col_idx)


def _brute_rgg_edges(points: np.ndarray, radius: float) -> set[tuple[int, int]]:
    n = len(points)
    out = set()
    for i in range(n):
        d2 = np.einsum("ij,ij->i", points[i + 1 :] - points[i], points[i + 1 :] - points[i])
        for j in np.flatnonzero(d2 <= radius * radius):
            out.add((i, i + 1 + int(j)))
    return out


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("n,target", [(200, 4.0), (1100, 6.0), (2000, 9.0)])
def test_bucketed_rgg_equals_brute_force(dim, n, target):
    radius = radius_for_avg_degree(n, dim, target)
    g, c = gen_rgg(n, dim, radius, seed=dim * 1000 + n)
    g.validate()
    src = g.edge_sources()
    got = {(int(u), int(v)) for u, v in zip(src, g.col_idx) if u < v}
    assert got == _brute_rgg_edges(c.points, radius)


def test_radius_formula():
    r2 = radius_for_avg_degree(10_000, 2, 6.0)
    assert 10_000 * math.pi * r2 * r2 == pytest.approx(6.0, rel=1e-12)
    r3 = radius_for_avg_degree(10_000, 3, 6.0)
    assert 10_000 * (4.0 / 3.0) * math.pi * r3**3 == pytest.approx(6.0, rel=1e-12)
    with pytest.raises(ValidationError):
        radius_for_avg_degree(0, 2, 6.0)


def test_rgg_density_near_three():
    n = 20_000
    g, _ = gen_rgg(n, 2, radius_for_avg_degree(n, 2, 6.0), seed=5)
    assert 2.7 <= g.m / n <= 3.3
