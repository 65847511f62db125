"""Application graphs (CSR), vertex coordinates, partitions, and file I/O.

Graphs are undirected, stored as symmetric CSR with rows sorted
ascending; vertex weights are fixed at one (one vertex = one memory
unit), edge weights are optional positive integers.  The text formats
are line-based: the graph format uses a ``n m [fmt]`` header and
1-indexed adjacency lines (fmt 0/1; vertex-weight codes are rejected),
coordinates are one line of ``dim`` reals per vertex, partitions one
block id per line.  Readers validate; writers emit the canonical form so
read(write(g)) round-trips bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AsymmetricAdjacencyError,
    DuplicateNeighborError,
    EdgeCountMismatchError,
    FormatError,
    IndexOutOfRangeError,
    SelfLoopError,
    ValidationError,
    VertexWeightsUnsupportedError,
)


@dataclass(eq=False)
class CsrGraph:
    """Symmetric compressed adjacency: ``col_idx[row_ptr[v]:row_ptr[v+1]]``
    are the neighbors of v, sorted ascending."""

    n: int
    m: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    edge_weight: np.ndarray | None = None

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.col_idx[self.row_ptr[v] : self.row_ptr[v + 1]]

    def neighbor_weights(self, v: int) -> np.ndarray:
        if self.edge_weight is None:
            return np.ones(self.row_ptr[v + 1] - self.row_ptr[v], dtype=np.int64)
        return self.edge_weight[self.row_ptr[v] : self.row_ptr[v + 1]]

    def weights_or_ones(self) -> np.ndarray:
        if self.edge_weight is None:
            return np.ones(2 * self.m, dtype=np.int64)
        return self.edge_weight

    def edge_sources(self) -> np.ndarray:
        """Directed source vertex per CSR entry (cached)."""
        if not hasattr(self, "_sources"):
            self._sources = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees())
        return self._sources

    def validate(self) -> None:
        rp, ci = self.row_ptr, self.col_idx
        if rp.shape != (self.n + 1,) or rp[0] != 0 or rp[-1] != len(ci):
            raise FormatError("row_ptr must have length n+1, start at 0 and end at len(col_idx)")
        if np.any(np.diff(rp) < 0):
            raise FormatError("row_ptr must be non-decreasing")
        if len(ci) != 2 * self.m:
            raise EdgeCountMismatchError(
                f"header claims m={self.m} edges but adjacency holds {len(ci)} entries"
            )
        if len(ci) and (ci.min() < 0 or ci.max() >= self.n):
            raise IndexOutOfRangeError("neighbor index outside 0..n-1")
        src = self.edge_sources()
        if np.any(src == ci):
            v = int(src[np.argmax(src == ci)])
            raise SelfLoopError(f"vertex {v} lists itself as neighbor")
        # sorted rows imply duplicate neighbors are adjacent entries
        same_row = src[1:] == src[:-1]
        if np.any(same_row & (np.diff(ci) < 0)):
            raise FormatError("adjacency rows must be sorted ascending")
        if np.any(same_row & (np.diff(ci) == 0)):
            raise DuplicateNeighborError("a vertex lists the same neighbor twice")
        w = self.weights_or_ones()
        if self.edge_weight is not None and np.any(w <= 0):
            raise FormatError("edge weights must be positive")
        fwd = np.lexsort((ci, src))
        rev = np.lexsort((src, ci))
        if not (
            np.array_equal(src[fwd], ci[rev])
            and np.array_equal(ci[fwd], src[rev])
            and np.array_equal(w[fwd], w[rev])
        ):
            raise AsymmetricAdjacencyError("adjacency is not symmetric with equal weights")


def from_edges(
    n: int,
    endpoints: Sequence[tuple[int, int]] | np.ndarray,
    weights: Sequence[int] | np.ndarray | None = None,
) -> CsrGraph:
    """Build a validated CSR graph from undirected edge pairs."""
    edges = np.asarray(endpoints, dtype=np.int64).reshape(-1, 2)
    m = len(edges)
    w = None if weights is None else np.asarray(weights, dtype=np.int64)
    if w is not None and len(w) != m:
        raise ValidationError(f"{m} edges but {len(w)} weights")
    u = np.concatenate([edges[:, 0], edges[:, 1]])
    v = np.concatenate([edges[:, 1], edges[:, 0]])
    ww = None if w is None else np.concatenate([w, w])
    order = np.lexsort((v, u))
    u, v = u[order], v[order]
    if ww is not None:
        ww = ww[order]
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(u, minlength=n), out=row_ptr[1:])
    g = CsrGraph(n=n, m=m, row_ptr=row_ptr, col_idx=v, edge_weight=ww)
    g.validate()
    return g


def _strip_comments(text: str) -> list[str]:
    return [line for line in text.splitlines() if not line.lstrip().startswith("%")]


def _parse_fmt(fmt: str) -> bool:
    """Return True when edges carry weights; reject vertex weight codes."""
    if not fmt.isdigit():
        raise FormatError(f"invalid fmt field {fmt!r}")
    padded = fmt.zfill(3)
    if padded[0] != "0" or padded[1] != "0":
        raise VertexWeightsUnsupportedError(
            f"fmt {fmt!r} declares vertex weights/sizes; only unit vertex weights are supported"
        )
    return padded[2] == "1"


def read_metis(text: str) -> CsrGraph:
    """Parse the 1-indexed adjacency-list graph format (fmt 0 or 1)."""
    lines = _strip_comments(text)
    if not lines or not lines[0].strip():
        raise FormatError("empty graph document")
    header = lines[0].split()
    if len(header) < 2 or len(header) > 3:
        raise FormatError(f"header must be 'n m [fmt]', got {lines[0]!r}")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise FormatError(f"non-integer header fields in {lines[0]!r}") from None
    has_ew = _parse_fmt(header[2]) if len(header) == 3 else False
    if n < 0 or m < 0:
        raise FormatError("n and m must be non-negative")
    body = lines[1:]
    while len(body) > n and body[-1].strip() == "":
        body.pop()  # tolerate trailing blank lines, but keep empty adjacency rows
    if len(body) != n:
        raise FormatError(f"expected {n} adjacency lines, found {len(body)}")

    cols: list[int] = []
    wts: list[int] = []
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    for v, line in enumerate(body):
        try:
            tokens = [int(t) for t in line.split()]
        except ValueError:
            raise FormatError(f"vertex {v + 1}: non-integer token in adjacency line") from None
        if has_ew:
            if len(tokens) % 2 != 0:
                raise FormatError(f"vertex {v + 1}: expected neighbor/weight pairs")
            cols.extend(tokens[0::2])
            wts.extend(tokens[1::2])
            row_ptr[v + 1] = row_ptr[v] + len(tokens) // 2
        else:
            cols.extend(tokens)
            row_ptr[v + 1] = row_ptr[v] + len(tokens)

    col_idx = np.asarray(cols, dtype=np.int64)
    if len(col_idx) != 2 * m:
        raise EdgeCountMismatchError(
            f"header claims m={m} edges but adjacency lists {len(col_idx)} entries"
        )
    if len(col_idx) and (col_idx.min() < 1 or col_idx.max() > n):
        raise IndexOutOfRangeError("neighbor index outside 1..n")
    col_idx -= 1
    weight = np.asarray(wts, dtype=np.int64) if has_ew else None

    # canonicalize row order so round-trips are exact
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(row_ptr))
    order = np.lexsort((col_idx, src))
    col_idx = col_idx[order]
    if weight is not None:
        weight = weight[order]
    g = CsrGraph(n=n, m=m, row_ptr=row_ptr, col_idx=col_idx, edge_weight=weight)
    g.validate()
    return g


def write_metis(g: CsrGraph) -> str:
    """Emit the canonical graph document for ``g``."""
    out = [f"{g.n} {g.m} 1" if g.edge_weight is not None else f"{g.n} {g.m}"]
    rp, ci = g.row_ptr, g.col_idx
    if g.edge_weight is not None:
        ew = g.edge_weight
        for v in range(g.n):
            lo, hi = rp[v], rp[v + 1]
            out.append(" ".join(f"{ci[e] + 1} {ew[e]}" for e in range(lo, hi)))
    else:
        for v in range(g.n):
            out.append(" ".join(str(c + 1) for c in ci[rp[v] : rp[v + 1]]))
    return "\n".join(out) + "\n"


@dataclass(eq=False)
class Coordinates:
    """n x dim array of finite vertex positions (dim 2 or 3)."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValidationError(f"coordinates must be n x 2 or n x 3, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("coordinates must be finite")
        self.points = pts

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def read_coords(text: str, dim: int) -> Coordinates:
    if dim not in (2, 3):
        raise ValidationError(f"dim must be 2 or 3, got {dim}")
    rows = []
    for i, line in enumerate(_strip_comments(text)):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != dim:
            raise FormatError(f"coordinate line {i + 1}: expected {dim} values, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise FormatError(f"coordinate line {i + 1}: non-numeric value") from None
    return Coordinates(np.asarray(rows, dtype=np.float64).reshape(-1, dim))


def write_coords(coords: Coordinates) -> str:
    return "\n".join(" ".join(f"{x:.17g}" for x in row) for row in coords.points) + "\n"


@dataclass(eq=False)
class Partition:
    """Block assignment vector over k blocks."""

    assignment: np.ndarray
    k: int

    def __post_init__(self) -> None:
        a = np.asarray(self.assignment, dtype=np.int64)
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if len(a) and (a.min() < 0 or a.max() >= self.k):
            raise IndexOutOfRangeError(f"block id outside 0..{self.k - 1}")
        self.assignment = a

    @property
    def n(self) -> int:
        return len(self.assignment)

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def read_partition(text: str, k: int) -> Partition:
    values = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            values.append(int(line))
        except ValueError:
            raise FormatError(f"partition line {i + 1}: expected one integer") from None
    return Partition(np.asarray(values, dtype=np.int64), k)


def write_partition(p: Partition) -> str:
    return "\n".join(str(b) for b in p.assignment) + "\n"


def extract_block_subgraph(g: CsrGraph, p: Partition, block: int) -> tuple[CsrGraph, np.ndarray]:
    """Induced subgraph on one block plus the local-to-global id map."""
    if p.n != g.n:
        raise ValidationError(f"partition covers {p.n} vertices, graph has {g.n}")
    verts = np.flatnonzero(p.assignment == block)
    local = np.full(g.n, -1, dtype=np.int64)
    local[verts] = np.arange(len(verts))

    deg = g.degrees()[verts]
    cols = g.col_idx[gather_ranges(g.row_ptr[verts], deg)]
    keep = p.assignment[cols] == block
    src_local = np.repeat(np.arange(len(verts), dtype=np.int64), deg)[keep]
    col_local = local[cols[keep]]
    row_ptr = np.zeros(len(verts) + 1, dtype=np.int64)
    np.cumsum(np.bincount(src_local, minlength=len(verts)), out=row_ptr[1:])
    weight = None
    if g.edge_weight is not None:
        weight = g.edge_weight[gather_ranges(g.row_ptr[verts], deg)][keep]
    sub = CsrGraph(
        n=len(verts), m=len(col_local) // 2, row_ptr=row_ptr, col_idx=col_local, edge_weight=weight
    )
    return sub, verts


def gather_ranges(starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Indices covering [starts[i], starts[i]+counts[i]) for every i, concatenated."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    before = np.zeros(len(counts), dtype=np.int64)
    np.cumsum(counts[:-1], out=before[1:])
    return np.arange(total, dtype=np.int64) + np.repeat(np.asarray(starts, dtype=np.int64) - before, counts)


def connected_component_count(g: CsrGraph) -> int:
    """Number of connected components (isolated vertices count)."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    if g.n == 0:
        return 0
    mat = csr_matrix(
        (np.ones(len(g.col_idx), dtype=np.int8), g.col_idx, g.row_ptr), shape=(g.n, g.n)
    )
    count, _ = connected_components(mat, directed=False)
    return int(count)
