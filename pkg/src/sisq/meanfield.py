"""Mean-field SIS dynamics on the full graph and on the quotient.

Full system (one equation per node, W the weighted adjacency):

    dp_i/dt = beta * (1 - p_i) * sum_j w_ij p_j - delta * p_i

Reduced system (one equation per cell, valid on equitable partitions for
cell-constant starts):

    dpbar/dt = beta * (I - diag(pbar)) Q~ pbar - delta * pbar

Both flows leave [0, 1]^dim invariant; the integrator enforces that as a
step-size sanity check.  Steady states solve p = tau * (I - diag(p)) W p and
are computed by the monotone fixed-point map p <- 1 - 1/(1 + tau * (W p)),
iterated from the all-ones vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError
from .graphs import Partition, WeightedAdjacency
from .partitions import QuotientModel
from .spectral import spectral_radius, threshold

__all__ = [
    "EpidemicParams",
    "Trajectory",
    "SteadyState",
    "SteadyStateBound",
    "FractionEstimate",
    "ContractionReport",
    "full_rhs",
    "reduced_rhs",
    "default_dt",
    "dt_limit",
    "integrate",
    "integrate_full",
    "integrate_reduced",
    "lift",
    "steady_state_reduced",
    "steady_state_full",
    "steady_state_bound",
    "avg_fraction_approx",
    "cell_contraction_check",
]


@dataclass(frozen=True)
class EpidemicParams:
    """Infection rate beta, curing rate delta, inter-community factor epsilon."""

    beta: float
    delta: float
    epsilon: float = 1.0

    def __post_init__(self):
        if self.beta <= 0 or self.delta <= 0 or self.epsilon <= 0:
            raise ValueError("beta, delta and epsilon must be positive")

    @property
    def tau(self) -> float:
        """Effective spreading rate beta/delta."""
        return self.beta / self.delta


@dataclass(frozen=True)
class Trajectory:
    """Probability trajectory on a strictly increasing time grid."""

    times: np.ndarray
    states: np.ndarray
    kind: str

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class SteadyState:
    p_inf: np.ndarray
    residual: float
    iterations: int
    below_threshold: bool
    converged: bool


def _coupling(w) -> np.ndarray:
    return w.matrix if isinstance(w, WeightedAdjacency) else np.asarray(w, dtype=float)


def full_rhs(w, params: EpidemicParams, p: np.ndarray) -> np.ndarray:
    """Node-level infection-pressure balance (beta*W - delta*I)p - beta*diag(p)Wp."""
    m = _coupling(w)
    wp = m @ p
    return params.beta * (1.0 - p) * wp - params.delta * p


def reduced_rhs(qm: QuotientModel, params: EpidemicParams, pbar: np.ndarray) -> np.ndarray:
    """Cell-level dynamics through Q~ (not Q: the two differ when cell sizes differ)."""
    qp = qm.Q_tilde @ pbar
    return params.beta * (1.0 - pbar) * qp - params.delta * pbar


def default_dt(params: EpidemicParams, max_row_sum: float) -> float:
    """Conservative fixed step 0.01 / max(beta * d_max, delta)."""
    return 0.01 / max(params.beta * max_row_sum, params.delta)


def dt_limit(params: EpidemicParams, max_row_sum: float) -> float:
    """Largest admissible step 0.1 / (beta * d_max + delta)."""
    return 0.1 / (params.beta * max_row_sum + params.delta)


def integrate(rhs, x0, t_end: float, dt: float, record_every: int = 1, kind: str = "full") -> Trajectory:
    """Classical fixed-step RK4 on dx/dt = rhs(x).

    Records every ``record_every``-th step (plus the last).  Any excursion of
    the state beyond [-1e-9, 1 + 1e-9], or a NaN, aborts: the exact flow is
    positively invariant in the unit box, so leaving it means dt is too large.
    """
    x = np.array(x0, dtype=float)
    if x.min() < 0 or x.max() > 1:
        raise ValueError("initial state must lie in [0, 1]")
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    n_steps = max(1, math.ceil(t_end / dt - 1e-12))
    times = [0.0]
    states = [x.copy()]
    for step in range(1, n_steps + 1):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * dt * k1)
        k3 = rhs(x + 0.5 * dt * k2)
        k4 = rhs(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.isnan(x).any():
            raise IntegrationError(f"NaN state at t={step * dt:.6g}; reduce dt")
        if x.min() < -1e-9 or x.max() > 1.0 + 1e-9:
            raise IntegrationError(
                f"state left [0,1] at t={step * dt:.6g} "
                f"(min={x.min():.3e}, max={x.max():.6g}); reduce dt"
            )
        if step % record_every == 0 or step == n_steps:
            times.append(step * dt)
            states.append(x.copy())
    return Trajectory(np.array(times), np.array(states), kind)


def _checked_dt(params, d_max, dt):
    if dt is None:
        return default_dt(params, d_max)
    cap = dt_limit(params, d_max)
    if dt > cap:
        raise ValueError(f"dt={dt:.3g} exceeds the stability guard {cap:.3g}")
    return dt


def integrate_full(
    w: WeightedAdjacency, params: EpidemicParams, p0, t_end, dt=None, record_every: int = 1
) -> Trajectory:
    dt = _checked_dt(params, w.max_row_sum, dt)
    return integrate(lambda x: full_rhs(w, params, x), p0, t_end, dt, record_every, kind="full")


def integrate_reduced(
    qm: QuotientModel, params: EpidemicParams, pbar0, t_end, dt=None, record_every: int = 1
) -> Trajectory:
    d_max = float(qm.Q_tilde.sum(axis=1).max())
    dt = _checked_dt(params, d_max, dt)
    return integrate(
        lambda x: reduced_rhs(qm, params, x), pbar0, t_end, dt, record_every, kind="reduced"
    )


def lift(pbar, partition: Partition) -> np.ndarray:
    """Embed a per-cell vector into the cell-constant subspace of the node space."""
    pbar = np.asarray(pbar, dtype=float)
    if len(pbar) != partition.n_cells:
        raise ValueError("length mismatch with the partition")
    return pbar[partition.cell_of]


def _fixed_point(coupling: np.ndarray, lam1: float, params, tol, max_iter):
    tau = params.tau
    if tau <= threshold(lam1):
        zero = np.zeros(coupling.shape[0])
        return SteadyState(zero, 0.0, 0, True, True)
    x = np.ones(coupling.shape[0])
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = coupling @ x
        x_new = 1.0 - 1.0 / (1.0 + tau * g)
        change = float(np.abs(x_new - x).max())
        x = x_new
        if change < tol:
            converged = True
            break
    residual = float(np.abs(x - (1.0 - 1.0 / (1.0 + tau * (coupling @ x)))).max())
    return SteadyState(x, residual, iterations, False, converged)


def steady_state_reduced(
    qm: QuotientModel, params: EpidemicParams, tol: float = 1e-12, max_iter: int = 1_000_000
) -> SteadyState:
    """Largest fixed point of pbar_j = 1 - 1/(1 + tau * (Q~ pbar)_j).

    Below the threshold tau <= 1/lambda_1(Q) the zero vector is returned
    directly; iterating the map there converges to 0 so slowly near tau_c
    that it would masquerade as non-convergence.
    """
    lam1 = spectral_radius(qm.Q).lambda1
    return _fixed_point(qm.Q_tilde, lam1, params, tol, max_iter)


def steady_state_full(
    w: WeightedAdjacency, params: EpidemicParams, tol: float = 1e-12, max_iter: int = 1_000_000
) -> SteadyState:
    """Node-level fixed point p_i = 1 - 1/(1 + tau * sum_j w_ij p_j)."""
    lam1 = spectral_radius(w.matrix).lambda1
    return _fixed_point(w.matrix, lam1, params, tol, max_iter)


@dataclass(frozen=True)
class SteadyStateBound:
    """Componentwise bound pbar_j <= 1 - 1/(1 + tau * r_j), r_j the row sums of Q~."""

    r: np.ndarray
    bound: np.ndarray


def steady_state_bound(qm: QuotientModel, params: EpidemicParams) -> SteadyStateBound:
    r = qm.row_sums
    return SteadyStateBound(r, 1.0 - 1.0 / (1.0 + params.tau * r))


@dataclass(frozen=True)
class FractionEstimate:
    """Approximate steady-state infected fraction 1 - (1/(tau*N)) sum_j k_j / r_j.

    r1 and r2 are the two smallest per-cell rates; the approximation sharpens
    as r2 - r1 shrinks and is exact for equal rates.
    """

    y_inf: float
    r: np.ndarray
    r1: float
    r2: float


def avg_fraction_approx(qm: QuotientModel, params: EpidemicParams) -> FractionEstimate:
    r = qm.row_sums
    k = qm.sizes.astype(float)
    n_nodes = k.sum()
    y = 1.0 - (k / r).sum() / (params.tau * n_nodes)
    r_sorted = np.sort(r)
    r2 = float(r_sorted[1]) if len(r_sorted) > 1 else float(r_sorted[0])
    return FractionEstimate(float(y), r, float(r_sorted[0]), r2)


@dataclass(frozen=True)
class ContractionReport:
    """Exponential-envelope check for within-cell spread of a full trajectory."""

    cells: tuple[int, ...]
    spread0: np.ndarray
    max_excess: np.ndarray
    passed: bool


def cell_contraction_check(
    traj: Trajectory, partition: Partition, params: EpidemicParams, tol: float = 1e-8
) -> ContractionReport:
    """Verify |p_h(t) - p_w(t)| <= spread(0) * exp(-delta t) per cell.

    The envelope is exact for clique communities with fully joined neighbor
    cells, where same-cell nodes see identical outside pressure.
    """
    cells = tuple(i for i, c in enumerate(partition.cells) if len(c) > 1)
    spread0 = []
    excess = []
    rel_t = traj.times - traj.times[0]
    for i in cells:
        sub = traj.states[:, partition.cell_arrays[i]]
        spread = sub.max(axis=1) - sub.min(axis=1)
        envelope = spread[0] * np.exp(-params.delta * rel_t)
        spread0.append(spread[0])
        excess.append(float((spread - envelope).max()))
    excess = np.array(excess) if excess else np.zeros(0)
    return ContractionReport(
        cells, np.array(spread0), excess, bool(np.all(excess <= tol)) if len(excess) else True
    )
