"""Graph and partition data model, file I/O, and synthetic community networks.

Graphs are simple and undirected with dense 0-based node ids.  A partition
splits the node set into ordered, disjoint, nonempty cells (communities).
Edges inside a cell carry weight 1, edges between cells carry weight
``epsilon``; the weighted adjacency matrix is the coupling matrix used by
every dynamic model in this package.

File formats
------------
Graph file:      line 1 is the node count N, then one ``u v`` pair per line.
Partition file:  one line per cell, whitespace-separated node ids.
Community spec:  ``key = value`` lines, see :func:`load_community_spec`.
Lines starting with ``#`` are comments in all three formats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GraphFormatError, InfeasibleSpecError, PartitionError

__all__ = [
    "Graph",
    "Partition",
    "WeightedAdjacency",
    "CommunitySpec",
    "load_graph",
    "save_graph",
    "load_partition",
    "save_partition",
    "load_community_spec",
    "weighted_adjacency",
    "build_community_graph",
    "fig1_spec",
    "path_of_cliques_spec",
    "ring_family_spec",
    "regular_cliques_spec",
    "add_chords",
]


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph; nodes are 0..n_nodes-1, edges stored once as (u, v) with u < v."""

    n_nodes: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n_nodes <= 0:
            raise ValueError("graph needs at least one node")
        canon = []
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise ValueError(f"edge ({u}, {v}) outside node range 0..{self.n_nodes - 1}")
            canon.append((u, v) if u < v else (v, u))
        if len(set(canon)) != len(canon):
            dup = sorted(e for e in set(canon) if canon.count(e) > 1)[0]
            raise ValueError(f"duplicate edge {dup}")
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix (float, read-only)."""
        a = np.zeros((self.n_nodes, self.n_nodes))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        a.setflags(write=False)
        return a

    @cached_property
    def neighbors(self) -> tuple[np.ndarray, ...]:
        """Per-node sorted neighbor-id arrays."""
        nbr: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for u, v in self.edges:
            nbr[u].append(v)
            nbr[v].append(u)
        return tuple(np.array(sorted(x), dtype=np.intp) for x in nbr)

    def degree(self, v: int) -> int:
        return len(self.neighbors[v])

    def has_edge(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        return (u, v) in self._edge_set

    @cached_property
    def _edge_set(self) -> frozenset:
        return frozenset(self.edges)


@dataclass(frozen=True)
class Partition:
    """Ordered list of disjoint nonempty node cells covering 0..n_nodes-1."""

    n_nodes: int
    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen: dict[int, int] = {}
        canon = []
        for i, cell in enumerate(self.cells):
            if len(cell) == 0:
                raise PartitionError(f"cell {i} is empty")
            for v in cell:
                if not (0 <= v < self.n_nodes):
                    raise PartitionError(f"unknown node id {v} in cell {i}")
                if v in seen:
                    raise PartitionError(f"node {v} appears in cells {seen[v]} and {i}")
                seen[v] = i
            canon.append(tuple(sorted(cell)))
        if len(seen) != self.n_nodes:
            missing = min(set(range(self.n_nodes)) - seen.keys())
            raise PartitionError(f"node {missing} belongs to no cell")
        object.__setattr__(self, "cells", tuple(canon))

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @cached_property
    def sizes(self) -> np.ndarray:
        s = np.array([len(c) for c in self.cells], dtype=np.intp)
        s.setflags(write=False)
        return s

    @cached_property
    def cell_of(self) -> np.ndarray:
        m = np.empty(self.n_nodes, dtype=np.intp)
        for i, cell in enumerate(self.cells):
            for v in cell:
                m[v] = i
        m.setflags(write=False)
        return m

    @cached_property
    def cell_arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(np.array(c, dtype=np.intp) for c in self.cells)


@dataclass(frozen=True)
class WeightedAdjacency:
    """Symmetric coupling matrix: 1 on intra-cell edges, epsilon on inter-cell edges."""

    matrix: np.ndarray
    epsilon: float

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("weighted adjacency must be square")
        if not np.array_equal(m, m.T):
            raise ValueError("weighted adjacency must be symmetric")
        if m.min() < 0 or np.diag(m).any():
            raise ValueError("weights must be nonnegative with a zero diagonal")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.matrix)

    @cached_property
    def max_row_sum(self) -> float:
        """Largest weighted degree; sets the time scale of the mean-field dynamics."""
        return float(self.matrix.sum(axis=1).max())

    @cached_property
    def neighbor_lists(self) -> tuple[tuple[list[int], list[float]], ...]:
        """Per-node (ids, weights) lists; the simulator's hot-loop view."""
        out = []
        for i in range(self.n_nodes):
            idx = np.nonzero(self.matrix[i])[0]
            out.append((idx.tolist(), self.matrix[i, idx].tolist()))
        return tuple(out)


# ---------------------------------------------------------------------------
# file I/O


def _data_lines(path: Path) -> list[tuple[int, str]]:
    lines = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        lines.append((lineno, stripped))
    return lines


def load_graph(path) -> Graph:
    """Read a graph file: node count on the first data line, then one edge per line."""
    path = Path(path)
    lines = _data_lines(path)
    if not lines:
        raise GraphFormatError(f"{path}: empty graph file")
    lineno, head = lines[0]
    try:
        n = int(head)
    except ValueError:
        raise GraphFormatError(f"{path}:{lineno}: expected node count, got {head!r}") from None
    if n <= 0:
        raise GraphFormatError(f"{path}:{lineno}: node count must be positive")
    edges = []
    seen = set()
    for lineno, line in lines[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"{path}:{lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
        if u == v:
            raise GraphFormatError(f"{path}:{lineno}: self-loop at node {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"{path}:{lineno}: node id out of range in {line!r} (N={n})")
        key = (u, v) if u < v else (v, u)
        if key in seen:
            raise GraphFormatError(f"{path}:{lineno}: duplicate edge {key}")
        seen.add(key)
        edges.append(key)
    return Graph(n, tuple(edges))


def save_graph(graph: Graph, path) -> None:
    """Write the canonical byte form: N, then sorted 'u v' lines."""
    out = [str(graph.n_nodes)]
    out.extend(f"{u} {v}" for u, v in graph.edges)
    Path(path).write_text("\n".join(out) + "\n")


def load_partition(path, graph: Graph) -> Partition:
    """Read a partition file: one whitespace-separated cell per line, cells in index order."""
    path = Path(path)
    cells = []
    for lineno, line in _data_lines(path):
        try:
            cell = tuple(int(t) for t in line.split())
        except ValueError:
            raise PartitionError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
        cells.append(cell)
    if not cells:
        raise PartitionError(f"{path}: empty partition file")
    try:
        return Partition(graph.n_nodes, tuple(cells))
    except PartitionError as exc:
        raise PartitionError(f"{path}: {exc}") from None


def save_partition(partition: Partition, path) -> None:
    Path(path).write_text(
        "\n".join(" ".join(str(v) for v in cell) for cell in partition.cells) + "\n"
    )


def weighted_adjacency(graph: Graph, partition: Partition, epsilon: float) -> WeightedAdjacency:
    """Weight the adjacency matrix: intra-cell edges 1, inter-cell edges epsilon."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    a = graph.adjacency
    cm = partition.cell_of
    intra = cm[:, None] == cm[None, :]
    w = np.where(a > 0, np.where(intra, 1.0, float(epsilon)), 0.0)
    return WeightedAdjacency(w, float(epsilon))


# ---------------------------------------------------------------------------
# synthetic community networks


@dataclass(frozen=True)
class CommunitySpec:
    """Blueprint for an equitable community network.

    ``templates[i]`` is one of ``clique``, ``ring``, ``empty`` or ``regular:<d>``
    and fixes the internal structure of cell i.  ``cross`` lists quotient edges
    as (i, j, d_ij, d_ji): every node of cell i gets d_ij neighbors in cell j.
    """

    sizes: tuple[int, ...]
    templates: tuple[str, ...]
    cross: tuple[tuple[int, int, int, int], ...]

    @property
    def n_cells(self) -> int:
        return len(self.sizes)

    @property
    def n_nodes(self) -> int:
        return sum(self.sizes)


def _template_degree(template: str, k: int) -> int:
    if template == "clique":
        return k - 1
    if template == "empty":
        return 0
    if template == "ring":
        if k < 3:
            raise InfeasibleSpecError(f"ring template needs k >= 3, got {k}")
        return 2
    if template.startswith("regular:"):
        try:
            d = int(template.split(":", 1)[1])
        except ValueError:
            raise InfeasibleSpecError(f"bad template {template!r}") from None
        if not (0 <= d <= k - 1) or (d * k) % 2 != 0:
            raise InfeasibleSpecError(f"no {d}-regular graph on {k} nodes")
        return d
    raise InfeasibleSpecError(f"unsupported template {template!r}")


def _circulant_edges(k: int, d: int) -> list[tuple[int, int]]:
    """Local edges of a d-regular circulant on k nodes (offsets 1..d//2, plus k/2 if d is odd)."""
    offsets = list(range(1, d // 2 + 1))
    if d % 2 == 1:
        offsets.append(k // 2)
    edges = set()
    for s in range(k):
        for off in offsets:
            u, v = s, (s + off) % k
            edges.add((u, v) if u < v else (v, u))
    return sorted(edges)


def _template_edges(template: str, k: int) -> list[tuple[int, int]]:
    d = _template_degree(template, k)
    if template == "clique":
        return [(u, v) for u in range(k) for v in range(u + 1, k)]
    return _circulant_edges(k, d)


def build_community_graph(spec: CommunitySpec) -> tuple[Graph, Partition]:
    """Realize a community spec as a concrete graph with an equitable partition.

    Cells occupy consecutive id ranges.  Cross links follow a fixed circulant
    rule: local node a of cell i connects to local nodes (a*d_ij + t) mod k_j,
    t = 0..d_ij-1, which meets the requested d matrix exactly whenever the
    edge-count consistency k_i*d_ij == k_j*d_ji holds.
    """
    n = spec.n_cells
    if n == 0:
        raise InfeasibleSpecError("spec has no cells")
    if len(spec.templates) != n:
        raise InfeasibleSpecError("one template per cell required")
    sizes = spec.sizes
    if any(k < 1 for k in sizes):
        raise InfeasibleSpecError("cell sizes must be >= 1")
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    edges: list[tuple[int, int]] = []
    for i, (k, template) in enumerate(zip(sizes, spec.templates)):
        base = int(offsets[i])
        edges.extend((base + u, base + v) for u, v in _template_edges(template, k))

    seen_pairs = set()
    for i, j, dij, dji in spec.cross:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise InfeasibleSpecError(f"bad quotient edge ({i}, {j})")
        pair = (i, j) if i < j else (j, i)
        if pair in seen_pairs:
            raise InfeasibleSpecError(f"quotient edge {pair} listed twice")
        seen_pairs.add(pair)
        ki, kj = sizes[i], sizes[j]
        if dij < 1 or dji < 1:
            raise InfeasibleSpecError(f"quotient edge ({i}, {j}) needs positive cross-degrees")
        if ki * dij != kj * dji:
            raise InfeasibleSpecError(
                f"cross-degrees on ({i}, {j}) miscount edges: {ki}*{dij} != {kj}*{dji}"
            )
        if dij > kj or dji > ki:
            raise InfeasibleSpecError(f"cross-degree exceeds target cell size on ({i}, {j})")
        bi, bj = int(offsets[i]), int(offsets[j])
        for a in range(ki):
            for t in range(dij):
                edges.append((bi + a, bj + (a * dij + t) % kj))

    graph = Graph(spec.n_nodes, tuple(edges))
    cells = tuple(
        tuple(range(int(offsets[i]), int(offsets[i + 1]))) for i in range(n)
    )
    return graph, Partition(spec.n_nodes, cells)


def load_community_spec(path) -> CommunitySpec:
    """Parse a community-spec file.

    Keys: ``n`` (cell count), ``sizes`` (n integers), ``templates`` (n names),
    and one ``edge = i j d_ij d_ji`` line per quotient edge.
    """
    path = Path(path)
    n = None
    sizes: tuple[int, ...] | None = None
    templates: tuple[str, ...] | None = None
    cross: list[tuple[int, int, int, int]] = []
    for lineno, line in _data_lines(path):
        if "=" not in line:
            raise GraphFormatError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key == "n":
                n = int(value)
            elif key == "sizes":
                sizes = tuple(int(t) for t in value.split())
            elif key == "templates":
                templates = tuple(value.split())
            elif key == "edge":
                i, j, dij, dji = (int(t) for t in value.split())
                cross.append((i, j, dij, dji))
            else:
                raise GraphFormatError(f"{path}:{lineno}: unknown key {key!r}")
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: bad value for {key!r}: {value!r}") from None
    if n is None or sizes is None or templates is None:
        raise GraphFormatError(f"{path}: keys 'n', 'sizes' and 'templates' are required")
    if len(sizes) != n or len(templates) != n:
        raise GraphFormatError(f"{path}: expected {n} sizes and {n} templates")
    return CommunitySpec(sizes, templates, tuple(cross))


# --- bundled experiment topologies -----------------------------------------


def fig1_spec() -> CommunitySpec:
    """13-node example with cells of sizes 1, 2, 4, 6.

    Cross-degree matrix d = [[0,2,4,0],[1,1,2,3],[1,1,2,0],[0,1,0,3]] and
    internal degrees (0, 1, 2, 3); its quotient matrix at coupling epsilon is
    [[0, e*sqrt(2), 2e, 0], [e*sqrt(2), 1, e*sqrt(2), e*sqrt(3)],
    [2e, e*sqrt(2), 2, 0], [0, e*sqrt(3), 0, 3]].
    """
    return CommunitySpec(
        sizes=(1, 2, 4, 6),
        templates=("empty", "regular:1", "ring", "regular:3"),
        cross=((0, 1, 2, 1), (0, 2, 4, 1), (1, 2, 2, 1), (1, 3, 3, 1)),
    )


def path_of_cliques_spec(n_cells: int = 4, k: int = 20) -> CommunitySpec:
    """Path of fully-joined cliques: d_ii = k-1 and d_ij = k on consecutive cells."""
    cross = tuple((i, i + 1, k, k) for i in range(n_cells - 1))
    return CommunitySpec((k,) * n_cells, ("clique",) * n_cells, cross)


def ring_family_spec(n_cells: int = 40, k: int = 10, cross_degree: int = 2) -> CommunitySpec:
    """Ring of ring-communities: cells are k-rings on a cycle quotient with d_ij = cross_degree."""
    if n_cells < 3:
        raise InfeasibleSpecError("ring quotient needs at least 3 cells")
    cross = tuple(
        (i, (i + 1) % n_cells, cross_degree, cross_degree) for i in range(n_cells)
    )
    return CommunitySpec((k,) * n_cells, ("ring",) * n_cells, cross)


def regular_cliques_spec(n_nodes: int = 500, degree: int = 10, k: int = 5) -> CommunitySpec:
    """Clique communities of size k on a circulant quotient; every node has the given total degree."""
    if n_nodes % k != 0:
        raise InfeasibleSpecError(f"{k} does not divide {n_nodes}")
    n_cells = n_nodes // k
    r = degree - (k - 1)
    if r < 0:
        raise InfeasibleSpecError(f"clique of {k} already exceeds degree {degree}")
    if r % 2 == 1 and n_cells % 2 == 1:
        raise InfeasibleSpecError(f"no {r}-regular quotient on {n_cells} cells")
    if r >= n_cells:
        raise InfeasibleSpecError(f"quotient degree {r} needs more than {n_cells} cells")
    quotient = _circulant_edges(n_cells, r)
    cross = tuple((i, j, 1, 1) for i, j in quotient)
    return CommunitySpec((k,) * n_cells, ("clique",) * n_cells, cross)


def add_chords(graph: Graph, partition: Partition, per_cell: int) -> Graph:
    """Add the same number of deterministic intra-cell chords to every cell.

    Candidate chords are scanned at increasing local-index gap, so the result
    is reproducible; the partition stays almost equitable (cross-degrees are
    untouched).
    """
    if per_cell < 0:
        raise ValueError("per_cell must be >= 0")
    if per_cell == 0:
        return graph
    new_edges = list(graph.edges)
    existing = set(graph.edges)
    for ci, cell in enumerate(partition.cells):
        k = len(cell)
        added = 0
        for gap in range(2, k // 2 + 1):
            for s in range(k):
                if added == per_cell:
                    break
                u, v = cell[s], cell[(s + gap) % k]
                key = (u, v) if u < v else (v, u)
                if key in existing:
                    continue
                existing.add(key)
                new_edges.append(key)
                added += 1
            if added == per_cell:
                break
        if added < per_cell:
            raise InfeasibleSpecError(
                f"cell {ci} has room for only {added} extra chords, {per_cell} requested"
            )
    return Graph(graph.n_nodes, tuple(new_edges))
