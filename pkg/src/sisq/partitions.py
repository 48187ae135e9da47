"""Equitable and almost-equitable partition analysis.

A partition is equitable when every node of cell i has the same number d_ij
of neighbors in cell j, for all i and j; almost equitable when that holds for
i != j only, leaving the internal structure of the cells free.  An equitable
partition admits the quotient matrix

    Q = diag(d_ii) + (sqrt(d_ij * d_ji) * eps * b_ij),

which shares its spectral radius with the weighted adjacency matrix and
drives the reduced dynamics through Q~ = diag(1/sqrt(k_j)) Q diag(sqrt(k_j)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NotEquitableError, PerturbationError
from .graphs import Graph, Partition

__all__ = [
    "CellDegreeMatrix",
    "Violation",
    "QuotientModel",
    "PerturbationReport",
    "cell_degree_table",
    "check_equitable",
    "check_almost_equitable",
    "feasibility_check",
    "quotient_matrix",
    "quotient_model",
    "perturbation_decompose",
]


@dataclass(frozen=True)
class Violation:
    """First node whose cross-degree disagrees with its cell, in node-id order."""

    node: int
    cell: int
    observed: int
    expected: int

    def __str__(self):
        return (
            f"node {self.node} has {self.observed} neighbors in cell {self.cell}, "
            f"expected {self.expected}"
        )


@dataclass(frozen=True)
class CellDegreeMatrix:
    """Cross-degree matrix d of a partition.

    ``equitable`` is True when the diagonal is constant per cell as well; for
    merely almost-equitable input the diagonal stores the per-cell maximum
    internal degree and must not feed the quotient matrix.
    """

    d: np.ndarray
    sizes: np.ndarray
    equitable: bool

    def __post_init__(self):
        d = np.array(self.d, dtype=np.intp)
        k = np.array(self.sizes, dtype=np.intp)
        d.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "sizes", k)

    @property
    def n_cells(self) -> int:
        return len(self.sizes)


def cell_degree_table(graph: Graph, partition: Partition) -> np.ndarray:
    """(N, n) table of deg(v, V_j) counts."""
    a = graph.adjacency
    n = partition.n_cells
    table = np.empty((graph.n_nodes, n), dtype=np.intp)
    for j, cell in enumerate(partition.cell_arrays):
        table[:, j] = a[:, cell].sum(axis=1).astype(np.intp)
    return table


def _scan(graph, partition, table, off_diagonal_only):
    """Return the d matrix or the first Violation in (node, target-cell) order."""
    n = partition.n_cells
    expected = np.vstack([table[cell[0]] for cell in partition.cells])
    cm = partition.cell_of
    for v in range(graph.n_nodes):
        i = cm[v]
        for j in range(n):
            if off_diagonal_only and j == i:
                continue
            if table[v, j] != expected[i, j]:
                return Violation(v, j, int(table[v, j]), int(expected[i, j]))
    return expected


def check_equitable(graph: Graph, partition: Partition) -> CellDegreeMatrix | Violation:
    """Full equitability test, diagonal included."""
    table = cell_degree_table(graph, partition)
    result = _scan(graph, partition, table, off_diagonal_only=False)
    if isinstance(result, Violation):
        return result
    return CellDegreeMatrix(result, partition.sizes, equitable=True)


def check_almost_equitable(graph: Graph, partition: Partition) -> CellDegreeMatrix | Violation:
    """Off-diagonal equitability test; internal cell structure is unconstrained."""
    table = cell_degree_table(graph, partition)
    result = _scan(graph, partition, table, off_diagonal_only=True)
    if isinstance(result, Violation):
        return result
    d = result.copy()
    equitable = True
    for i, cell in enumerate(partition.cell_arrays):
        internal = table[cell, i]
        if np.all(internal == internal[0]):
            d[i, i] = internal[0]
        else:
            d[i, i] = internal.max()
            equitable = False
    return CellDegreeMatrix(d, partition.sizes, equitable=equitable)


def feasibility_check(sizes, d) -> bool:
    """Integrality test for cross-degrees: d_ij = alpha * lcm(k_i, k_j) / k_i
    with 1 <= alpha <= gcd(k_i, k_j), or d_ij = d_ji = 0."""
    k = np.asarray(sizes, dtype=int)
    d = np.asarray(d, dtype=int)
    n = len(k)
    for i in range(n):
        for j in range(i + 1, n):
            dij, dji = int(d[i, j]), int(d[j, i])
            if dij == 0 and dji == 0:
                continue
            if dij <= 0 or dji <= 0:
                return False
            g = math.gcd(int(k[i]), int(k[j]))
            step = math.lcm(int(k[i]), int(k[j])) // int(k[i])
            if dij % step != 0:
                return False
            alpha = dij // step
            if not (1 <= alpha <= g):
                return False
            if k[i] * dij != k[j] * dji:
                return False
    return True


@dataclass(frozen=True)
class QuotientModel:
    """Quotient matrix Q, its similarity transform Q~, and the quotient-graph adjacency B.

    epsilon lives here rather than on the graph so a single partition analysis
    can be re-weighted cheaply across a coupling sweep.
    """

    d: np.ndarray
    sizes: np.ndarray
    epsilon: float
    B: np.ndarray
    Q: np.ndarray
    Q_tilde: np.ndarray
    s_vec: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.sizes)

    @cached_property
    def b_hat(self) -> np.ndarray:
        """Off-diagonal coupling part of Q (Q minus its diagonal)."""
        m = self.Q - np.diag(np.diag(self.Q))
        m.setflags(write=False)
        return m

    @cached_property
    def row_sums(self) -> np.ndarray:
        """Row sums of Q~; the per-cell rates r_j of the steady-state bounds."""
        r = self.Q_tilde.sum(axis=1)
        r.setflags(write=False)
        return r


def quotient_matrix(cdm: CellDegreeMatrix, epsilon: float) -> QuotientModel:
    """Build Q, Q~ and B from an equitable cell-degree matrix."""
    if not cdm.equitable:
        raise NotEquitableError(
            message="quotient matrix is defined only for equitable partitions"
        )
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    d = cdm.d.astype(float)
    k = cdm.sizes.astype(float)
    n = cdm.n_cells
    if not np.array_equal(d * k[:, None], (d * k[:, None]).T):
        raise NotEquitableError(message="cross-degrees violate k_i*d_ij == k_j*d_ji")
    off = ~np.eye(n, dtype=bool)
    b = ((d > 0) & off).astype(np.intp)
    q = np.diag(np.diag(d)) + np.sqrt(d * d.T) * epsilon * b
    if np.abs(q - q.T).max() > 1e-12:
        raise NotEquitableError(message="quotient matrix failed the symmetry check")
    s = np.sqrt(k)
    q_tilde = (1.0 / s)[:, None] * q * s[None, :]
    for m in (b, q, q_tilde, s):
        m.setflags(write=False)
    return QuotientModel(cdm.d, cdm.sizes, float(epsilon), b, q, q_tilde, s)


def quotient_model(graph: Graph, partition: Partition, epsilon: float) -> QuotientModel:
    """Check equitability and build the quotient model in one step."""
    result = check_equitable(graph, partition)
    if isinstance(result, Violation):
        raise NotEquitableError(result)
    return quotient_matrix(result, epsilon)


@dataclass(frozen=True)
class PerturbationReport:
    """Per-cell description of the intra-cell edges added to an equitable base graph.

    For cell i: ``r_blocks[i]`` is the local adjacency of the added edges,
    ``e[i]`` their count, ``k_prime[i]`` the number of touched nodes,
    ``max_deg[i]`` the maximal degree among them, and ``connected[i]`` whether
    the added-edge graph on its endpoints is connected (vacuously True when
    nothing was added).
    """

    r_blocks: tuple[np.ndarray, ...]
    e: np.ndarray
    k_prime: np.ndarray
    max_deg: np.ndarray
    connected: np.ndarray
    sizes: np.ndarray


def perturbation_decompose(
    g_equitable: Graph, g_almost: Graph, partition: Partition
) -> PerturbationReport:
    """Split A~ = A + R where R holds the intra-cell edges added to the base graph."""
    if g_equitable.n_nodes != g_almost.n_nodes or g_equitable.n_nodes != partition.n_nodes:
        raise PerturbationError("graphs and partition must share one node set")
    base = set(g_equitable.edges)
    pert = set(g_almost.edges)
    if not base <= pert:
        missing = sorted(base - pert)[0]
        raise PerturbationError(f"perturbed graph lost edge {missing}; only additions are supported")
    added = sorted(pert - base)
    cm = partition.cell_of
    per_cell: list[list[tuple[int, int]]] = [[] for _ in range(partition.n_cells)]
    for u, v in added:
        if cm[u] != cm[v]:
            raise PerturbationError(f"added edge ({u}, {v}) crosses cells; R must be block diagonal")
        per_cell[cm[u]].append((u, v))

    blocks, e, kp, dmax, conn = [], [], [], [], []
    for cell, cell_edges in zip(partition.cells, per_cell):
        k = len(cell)
        local = {v: a for a, v in enumerate(cell)}
        r = np.zeros((k, k))
        for u, v in cell_edges:
            r[local[u], local[v]] = r[local[v], local[u]] = 1.0
        deg = r.sum(axis=1)
        touched = np.nonzero(deg)[0]
        blocks.append(r)
        e.append(len(cell_edges))
        kp.append(len(touched))
        dmax.append(int(deg.max()))
        conn.append(_connected_on(touched, r))
    return PerturbationReport(
        tuple(blocks),
        np.array(e, dtype=np.intp),
        np.array(kp, dtype=np.intp),
        np.array(dmax, dtype=np.intp),
        np.array(conn, dtype=bool),
        partition.sizes,
    )


def _connected_on(nodes: np.ndarray, adj: np.ndarray) -> bool:
    if len(nodes) == 0:
        return True
    todo = [int(nodes[0])]
    seen = {int(nodes[0])}
    while todo:
        u = todo.pop()
        for v in np.nonzero(adj[u])[0]:
            if int(v) not in seen:
                seen.add(int(v))
                todo.append(int(v))
    return len(seen) == len(nodes)
