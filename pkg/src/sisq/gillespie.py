"""Exact continuous-time Markov simulation of the SIS process.

Direct stochastic simulation: with I the infected set, the total event rate
is Lambda = delta*|I| + beta * sum of w_ij over infected-susceptible pairs;
the jump time is Exponential(Lambda) and the event is drawn proportionally
to its rate.  Per-node infection pressure (sum of infected-neighbor weights)
is maintained incrementally, giving O(deg) updates per event, and is rebuilt
from scratch periodically so float drift cannot accumulate.

Replica r of an ensemble runs on the seed hash(master_seed, r), so ensembles
are reproducible, order-independent, and safely parallel.
"""

from __future__ import annotations

import hashlib
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graphs import Partition, WeightedAdjacency
from .meanfield import EpidemicParams

__all__ = [
    "SimPath",
    "EnsembleStats",
    "SteadyFraction",
    "replica_seed",
    "simulate_run",
    "ensemble",
    "steady_fraction",
    "resolve_workers",
]

_REFRESH_EVERY = 4096
_CHUNK = 256


def replica_seed(master_seed: int, index: int) -> int:
    """Deterministic per-replica seed, independent of execution order."""
    digest = hashlib.blake2b(f"{master_seed}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def resolve_workers(workers: int | None = None) -> int:
    """Explicit argument, else the SISQ_WORKERS environment variable, else 1."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("SISQ_WORKERS")
    return max(1, int(env)) if env else 1


@dataclass(frozen=True)
class SimPath:
    """One sample path observed on a time grid."""

    times: np.ndarray
    states: np.ndarray  # (grid, N) bool
    absorbed_at: float | None
    n_events: int


class _SisState:
    """Mutable simulation state with incremental rate bookkeeping."""

    __slots__ = ("n", "infected", "inf_nodes", "pos", "pressure", "s_pressure", "nbr")

    def __init__(self, w: WeightedAdjacency, init):
        self.n = w.n_nodes
        self.nbr = w.neighbor_lists
        self.infected = bytearray(self.n)
        self.inf_nodes: list[int] = []
        self.pos = [-1] * self.n
        for v in sorted(set(init)):
            if not (0 <= v < self.n):
                raise ValueError(f"initial infected node {v} out of range")
            self.infected[v] = 1
            self.pos[v] = len(self.inf_nodes)
            self.inf_nodes.append(v)
        self.refresh()

    def refresh(self):
        """Recompute pressures and the susceptible pressure sum from scratch."""
        pressure = [0.0] * self.n
        for i in self.inf_nodes:
            idx, wts = self.nbr[i]
            for j, w in zip(idx, wts):
                pressure[j] += w
        self.pressure = pressure
        self.s_pressure = sum(
            pressure[j] for j in range(self.n) if not self.infected[j]
        )

    def cure(self, i: int):
        infected, pressure = self.infected, self.pressure
        infected[i] = 0
        nodes, pos = self.inf_nodes, self.pos
        last = nodes.pop()
        p = pos[i]
        if last != i:
            nodes[p] = last
            pos[last] = p
        pos[i] = -1
        self.s_pressure += pressure[i]
        idx, wts = self.nbr[i]
        for j, w in zip(idx, wts):
            pressure[j] -= w
            if not infected[j]:
                self.s_pressure -= w

    def infect(self, j: int):
        infected, pressure = self.infected, self.pressure
        infected[j] = 1
        self.pos[j] = len(self.inf_nodes)
        self.inf_nodes.append(j)
        self.s_pressure -= pressure[j]
        idx, wts = self.nbr[j]
        for l, w in zip(idx, wts):
            pressure[l] += w
            if not infected[l]:
                self.s_pressure += w

    def pick_infection_target(self, target_pressure: float) -> int:
        """Susceptible node drawn proportionally to its pressure."""
        acc = 0.0
        fallback = -1
        infected, pressure = self.infected, self.pressure
        for j in range(self.n):
            if not infected[j]:
                pj = pressure[j]
                if pj > 0.0:
                    fallback = j
                    acc += pj
                    if acc > target_pressure:
                        return j
        return fallback  # float drift: land on the last eligible node


def _check_rates(state: _SisState):
    incremental = state.s_pressure
    pressure = [0.0] * state.n
    for i in state.inf_nodes:
        idx, wts = state.nbr[i]
        for j, w in zip(idx, wts):
            pressure[j] += w
    scratch = sum(pressure[j] for j in range(state.n) if not state.infected[j])
    if abs(incremental - scratch) > 1e-9:
        raise AssertionError(
            f"rate bookkeeping drifted: incremental {incremental!r} vs scratch {scratch!r}"
        )


def simulate_run(
    w: WeightedAdjacency,
    params: EpidemicParams,
    init,
    t_max: float,
    seed: int,
    grid,
    check_rates: bool = False,
) -> SimPath:
    """One exact sample path, with the infection state recorded at the grid times.

    The grid must be sorted and lie in [0, t_max].  An empty initial set is a
    valid (immediately absorbed) run.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size and (np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > t_max + 1e-9):
        raise ValueError("grid must be strictly increasing within [0, t_max]")
    beta, delta = params.beta, params.delta
    rng = random.Random(seed)
    state = _SisState(w, init)
    out = np.zeros((grid.size, w.n_nodes), dtype=bool)

    t = 0.0
    g = 0
    n_events = 0
    absorbed_at = None
    grid_list = grid.tolist()
    n_grid = len(grid_list)

    def record_through(t_limit: float):
        """Record current state at all pending grid points strictly before t_limit."""
        nonlocal g
        while g < n_grid and grid_list[g] < t_limit:
            if state.inf_nodes:
                out[g, state.inf_nodes] = True
            g += 1

    while True:
        n_inf = len(state.inf_nodes)
        if n_inf == 0:
            absorbed_at = t
            g_all = float("inf")
            record_through(g_all)
            break
        lam_cure = delta * n_inf
        lam = lam_cure + beta * state.s_pressure
        t_next = t + rng.expovariate(lam)
        record_through(t_next)
        if t_next > t_max:
            record_through(float("inf"))
            break
        u = rng.random() * lam
        if u < lam_cure:
            idx = min(int(u / delta), n_inf - 1)
            state.cure(state.inf_nodes[idx])
        else:
            target = (u - lam_cure) / beta
            j = state.pick_infection_target(target)
            if j >= 0:
                state.infect(j)
        t = t_next
        n_events += 1
        if check_rates and n_events % 1000 == 0:
            _check_rates(state)
        if n_events % _REFRESH_EVERY == 0:
            state.refresh()

    return SimPath(grid, out, absorbed_at, n_events)


@dataclass(frozen=True)
class EnsembleStats:
    """Per-group Monte-Carlo means over replicas, on a shared time grid.

    ``mean[t, j]`` is the average infected fraction of group j at grid time t;
    ``se`` the sample standard deviation over replicas divided by sqrt(runs);
    ``survivors[t]`` counts replicas still carrying infection at that time.
    """

    times: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    runs: int
    survivors: np.ndarray


def _group_matrix(n_nodes: int, partition: Partition | None) -> np.ndarray:
    if partition is None:
        return np.eye(n_nodes)
    m = np.zeros((n_nodes, partition.n_cells))
    for j, cell in enumerate(partition.cell_arrays):
        m[cell, j] = 1.0 / len(cell)
    return m


def _chunk_worker(args):
    w, params, init, t_max, grid, seeds, gm = args
    g = len(grid)
    m = gm.shape[1]
    total = np.zeros((g, m))
    total_sq = np.zeros((g, m))
    survivors = np.zeros(g, dtype=np.int64)
    for seed in seeds:
        path = simulate_run(w, params, init, t_max, seed, grid)
        states = path.states.astype(float)
        frac = states @ gm
        total += frac
        total_sq += frac * frac
        survivors += path.states.any(axis=1)
    return total, total_sq, survivors


def ensemble(
    w: WeightedAdjacency,
    params: EpidemicParams,
    init,
    t_max: float,
    grid,
    runs: int,
    master_seed: int,
    partition: Partition | None = None,
    workers: int | None = None,
) -> EnsembleStats:
    """Monte-Carlo ensemble; per-cell statistics when a partition is given, else per-node.

    Replicas are aggregated in fixed-size chunks merged in index order, so the
    result is bit-identical for any worker count.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    grid = np.asarray(grid, dtype=float)
    gm = _group_matrix(w.n_nodes, partition)
    seeds = [replica_seed(master_seed, r) for r in range(runs)]
    chunks = [
        (w, params, init, t_max, grid, seeds[lo : lo + _CHUNK], gm)
        for lo in range(0, runs, _CHUNK)
    ]
    n_workers = resolve_workers(workers)
    if n_workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            partials = list(pool.map(_chunk_worker, chunks))
    else:
        partials = [_chunk_worker(c) for c in chunks]

    total = np.zeros((grid.size, gm.shape[1]))
    total_sq = np.zeros_like(total)
    survivors = np.zeros(grid.size, dtype=np.int64)
    for part_sum, part_sq, part_surv in partials:
        total += part_sum
        total_sq += part_sq
        survivors += part_surv
    mean = total / runs
    if runs > 1:
        var = np.maximum(total_sq - runs * mean * mean, 0.0) / (runs - 1)
        se = np.sqrt(var / runs)
    else:
        se = np.zeros_like(mean)
    return EnsembleStats(grid, mean, se, runs, survivors)


@dataclass(frozen=True)
class SteadyFraction:
    """Quasi-stationary infected fraction: windowed time average over surviving runs."""

    mean: float
    se: float
    survivors: int
    runs: int


def _window_average(w, params, init, t_burn, t_window, seed) -> float | None:
    """Time-averaged infected fraction over the window, or None if absorbed first."""
    beta, delta = params.beta, params.delta
    rng = random.Random(seed)
    state = _SisState(w, init)
    t_hi = t_burn + t_window
    t = 0.0
    acc = 0.0
    n_events = 0
    while True:
        n_inf = len(state.inf_nodes)
        if n_inf == 0:
            return None
        lam = delta * n_inf + beta * state.s_pressure
        t_next = t + rng.expovariate(lam)
        overlap = min(t_next, t_hi) - max(t, t_burn)
        if overlap > 0:
            acc += n_inf * overlap
        if t_next >= t_hi:
            return acc / (w.n_nodes * t_window)
        u = rng.random() * lam
        lam_cure = delta * n_inf
        if u < lam_cure:
            idx = min(int(u / delta), n_inf - 1)
            state.cure(state.inf_nodes[idx])
        else:
            j = state.pick_infection_target((u - lam_cure) / beta)
            if j >= 0:
                state.infect(j)
        t = t_next
        n_events += 1
        if n_events % _REFRESH_EVERY == 0:
            state.refresh()


def _window_chunk_worker(args):
    w, params, init, t_burn, t_window, seeds = args
    return [_window_average(w, params, init, t_burn, t_window, s) for s in seeds]


def steady_fraction(
    w: WeightedAdjacency,
    params: EpidemicParams,
    init,
    t_burn: float | None = None,
    t_window: float | None = None,
    runs: int = 1000,
    master_seed: int = 0,
    workers: int | None = None,
) -> SteadyFraction:
    """Empirical quasi-stationary infected fraction.

    Each replica contributes its time average over [t_burn, t_burn + t_window]
    if it is still unabsorbed when the window closes; absorbed replicas are
    dropped (conditioning on survival).  Defaults: t_burn = 10/delta,
    t_window = 40/delta.  A survivors count of 0 flags a meaningless estimate.
    """
    if t_burn is None:
        t_burn = 10.0 / params.delta
    if t_window is None:
        t_window = 40.0 / params.delta
    if runs < 1:
        raise ValueError("runs must be >= 1")
    seeds = [replica_seed(master_seed, r) for r in range(runs)]
    chunks = [
        (w, params, init, t_burn, t_window, seeds[lo : lo + _CHUNK])
        for lo in range(0, runs, _CHUNK)
    ]
    n_workers = resolve_workers(workers)
    if n_workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(_window_chunk_worker, chunks))
    else:
        parts = [_window_chunk_worker(c) for c in chunks]
    values = [v for part in parts for v in part if v is not None]
    survivors = len(values)
    if survivors == 0:
        return SteadyFraction(0.0, 0.0, 0, runs)
    arr = np.array(values)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / np.sqrt(survivors)) if survivors > 1 else 0.0
    return SteadyFraction(mean, se, survivors, runs)
