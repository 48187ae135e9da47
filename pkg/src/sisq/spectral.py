"""Spectral radius and epidemic-threshold bounds.

The epidemic threshold of the mean-field model is tau_c = 1/lambda_1 of the
coupling matrix; on an equitable partition lambda_1 of the small quotient
matrix Q equals lambda_1 of the full weighted adjacency, so power iteration
on Q is all that is ever needed.  Splitting Q = diag(d_ii) + B_hat gives the
Weyl lower bound

    tau_star = min_i 1 / (d_ii + lambda_1(B_hat)) <= tau_c,

with equality when all cells share one internal degree.  For almost-equitable
perturbations A~ = A + R the block structure of R bounds lambda_1(R) by edge
counts, which extends the threshold bound to irregular cell interiors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .partitions import PerturbationReport, QuotientModel

__all__ = [
    "SpectralResult",
    "ThresholdBounds",
    "spectral_radius",
    "threshold",
    "weyl_lower_bound",
    "homogeneous_exact_lambda1",
    "perturbation_bound",
    "almost_equitable_lower_bound",
    "compute_bounds",
]


@dataclass(frozen=True)
class SpectralResult:
    """Dominant eigenpair estimate; residual is ||M v - lambda v||_inf."""

    lambda1: float
    eigvec: np.ndarray
    iterations: int
    residual: float
    converged: bool


def _validate(m):
    if sp.issparse(m):
        if m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        if m.nnz and m.min() < 0:
            raise ValueError("matrix must be nonnegative")
        if abs(m - m.T).max() > 1e-12:
            raise ValueError("matrix must be symmetric")
        if m.nnz == 0 or m.max() == 0:
            raise ValueError("matrix must be nonzero")
        return m
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if m.min() < 0:
        raise ValueError("matrix must be nonnegative")
    if np.abs(m - m.T).max() > 1e-12:
        raise ValueError("matrix must be symmetric")
    if m.max() == 0:
        raise ValueError("matrix must be nonzero")
    return m


def spectral_radius(m, tol: float = 1e-12, max_iter: int = 100_000) -> SpectralResult:
    """Spectral radius and Perron vector of a symmetric nonnegative matrix.

    Power iteration on M + cI with c the maximal row sum; the shift makes the
    top of the spectrum dominant even when lambda_min = -lambda_1 (bipartite
    structure), where the unshifted iteration would oscillate.  Accepts dense
    arrays or scipy sparse matrices.  On a reducible matrix with a repeated
    top eigenvalue the returned lambda_1 is still correct but the eigenvector
    is one of many.
    """
    m = _validate(m)
    n = m.shape[0]
    c = float(np.max(np.asarray(m.sum(axis=1)).ravel()))
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        w = m @ v
        w = np.asarray(w).ravel()
        lam = float(v @ w)
        residual = float(np.abs(w - lam * v).max())
        if residual <= tol:
            return SpectralResult(lam, v, iterations, residual, True)
        u = w + c * v
        v = u / np.linalg.norm(u)
    return SpectralResult(lam, v, iterations, residual, False)


def threshold(lambda1: float) -> float:
    """Mean-field epidemic threshold 1/lambda_1."""
    if lambda1 <= 0:
        raise ValueError("lambda1 must be positive")
    return 1.0 / lambda1


def _lambda1_b_hat(qm: QuotientModel, tol: float = 1e-12) -> float:
    bh = qm.b_hat
    if bh.max() == 0:
        return 0.0
    return spectral_radius(bh, tol=tol).lambda1


def weyl_lower_bound(qm: QuotientModel) -> float:
    """Threshold lower bound min_i 1/(d_ii + lambda_1(B_hat))."""
    denom = float(np.diag(qm.Q).max()) + _lambda1_b_hat(qm)
    if denom <= 0:
        raise ValueError("quotient matrix is identically zero")
    return 1.0 / denom


def homogeneous_exact_lambda1(qm: QuotientModel) -> float | None:
    """Closed form lambda_1 = d + k*eps*lambda_1(B) for equal cells of size k,
    equal internal degree d, and fully joined neighboring cells (d_ij = k).
    Returns None when the model is not of that shape."""
    k = qm.sizes
    d = np.diag(qm.d)
    if not (np.all(k == k[0]) and np.all(d == d[0])):
        return None
    off = qm.d[~np.eye(qm.n_cells, dtype=bool)]
    if not np.all((off == 0) | (off == k[0])):
        return None
    if qm.B.max() == 0:
        lam_b = 0.0
    else:
        lam_b = spectral_radius(qm.B.astype(float)).lambda1
    return float(d[0]) + float(k[0]) * qm.epsilon * lam_b


def perturbation_bound(report: PerturbationReport) -> float:
    """Upper bound on lambda_1(R) for a block-diagonal perturbation.

    Per cell the tightest applicable of sqrt(2 e_i (k_i - 1) / k_i), the
    maximal degree, and (for connected added-edge graphs) sqrt(2 e_i - k'_i + 1);
    the block structure makes the overall bound the maximum over cells.
    """
    best = 0.0
    for e, k, kp, dmax, conn in zip(
        report.e, report.sizes, report.k_prime, report.max_deg, report.connected
    ):
        if e == 0:
            continue
        cands = [np.sqrt(2.0 * e * (k - 1) / k), float(dmax)]
        if conn:
            cands.append(np.sqrt(2.0 * e - kp + 1))
        best = max(best, float(min(cands)))
    return best


def almost_equitable_lower_bound(
    qm: QuotientModel, lambda1_cells, pert_bound: float, deletion: bool = False
) -> float:
    """Threshold lower bound for a perturbed equitable partition.

    Edge additions: 1 / (max_i lambda_1(C_i) + lambda_1(B_hat) + pert_bound),
    with lambda1_cells the internal spectral radii of the base cells (equal to
    d_ii on the equitable base).  Edge deletions never raise lambda_1, so the
    unperturbed bound is returned unchanged.
    """
    if deletion:
        return weyl_lower_bound(qm)
    denom = float(np.max(lambda1_cells)) + _lambda1_b_hat(qm) + float(pert_bound)
    if denom <= 0:
        raise ValueError("degenerate bound denominator")
    return 1.0 / denom


@dataclass(frozen=True)
class ThresholdBounds:
    """Threshold tau_c = 1/lambda_1 with its cheaper companions."""

    lambda1: float
    tau_c: float
    tau_star: float
    exact_homogeneous: float | None = None
    almost_equitable_lower: float | None = None


def compute_bounds(
    qm: QuotientModel,
    report: PerturbationReport | None = None,
    lambda1_cells=None,
    deletion: bool = False,
) -> ThresholdBounds:
    """Assemble every bound the quotient model supports."""
    lam = spectral_radius(qm.Q).lambda1
    tau_c = threshold(lam)
    tau_star = weyl_lower_bound(qm)
    ae = None
    if report is not None:
        if lambda1_cells is None:
            lambda1_cells = np.diag(qm.d).astype(float)
        ae = almost_equitable_lower_bound(
            qm, lambda1_cells, perturbation_bound(report), deletion=deletion
        )
    elif deletion:
        ae = almost_equitable_lower_bound(qm, np.diag(qm.d), 0.0, deletion=True)
    return ThresholdBounds(lam, tau_c, tau_star, homogeneous_exact_lambda1(qm), ae)
