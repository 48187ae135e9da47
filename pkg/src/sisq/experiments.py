"""Scripted desk-scale reproductions of the reference experiments.

Each experiment builds its network, runs the relevant analyses, and writes a
fixed set of files into the output directory:

    graph.edges / graph.cells   the network actually used
    trajectory.csv              mean-field trajectories (dynamics experiments)
    ensemble.csv                Monte-Carlo statistics on the same grid
    sweep.csv                   parameter sweeps (bound/fraction experiments)
    summary.txt                 parameters, seeds, thresholds, check outcomes
    figure.png                  rendered view of the data (unless disabled)

Everything is deterministic given the spec and master seed; stochastic
experiments run far fewer replicas than the reference figures (which used
5e5), so the statistical tolerances quoted in the summaries are wider.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plotting
from .errors import SisqError
from .gillespie import ensemble, steady_fraction
from .graphs import (
    add_chords,
    build_community_graph,
    fig1_spec,
    path_of_cliques_spec,
    regular_cliques_spec,
    ring_family_spec,
    save_graph,
    save_partition,
    weighted_adjacency,
)
from .meanfield import (
    EpidemicParams,
    avg_fraction_approx,
    default_dt,
    integrate_full,
    integrate_reduced,
    steady_state_full,
    steady_state_reduced,
)
from .partitions import perturbation_decompose, quotient_model
from .spectral import (
    almost_equitable_lower_bound,
    homogeneous_exact_lambda1,
    perturbation_bound,
    spectral_radius,
    threshold,
    weyl_lower_bound,
)

__all__ = ["ExperimentSpec", "EXPERIMENT_IDS", "run_experiment"]

EXPERIMENT_IDS = (
    "fig2",
    "fig3",
    "completo2",
    "averaged",
    "low",
    "ae_bound",
    "frac",
    "sis_k_sweep",
)


@dataclass
class ExperimentSpec:
    """Experiment selector plus optional parameter overrides (None = per-id default)."""

    id: str
    out_dir: Path
    beta: float | None = None
    delta: float | None = None
    epsilon: float | None = None
    runs: int | None = None
    seed: int = 1
    t_max: float | None = None
    grid_step: float | None = None
    k_values: tuple[int, ...] | None = None
    chords: tuple[int, ...] | None = None
    tau_factors: tuple[float, ...] | None = None
    plots: bool = True
    workers: int | None = None


_DEFAULTS = {
    "fig2": dict(beta=0.29, delta=1.0, epsilon=0.3, runs=10_000, t_max=25.0, grid_step=0.25),
    "fig3": dict(beta=1.5, delta=0.3, epsilon=0.3, runs=10_000, t_max=40.0, grid_step=0.5),
    "completo2": dict(beta=5.0, delta=2.0, epsilon=0.3, runs=2_000, t_max=6.0, grid_step=0.05),
    "averaged": dict(epsilon=0.3),
    "low": dict(epsilon=0.3, k_values=tuple(range(3, 13))),
    "ae_bound": dict(epsilon=0.3, chords=tuple(range(0, 11))),
    "frac": dict(delta=1.0, epsilon=0.3, tau_factors=(1.05, 1.2, 1.5, 2.0, 3.0, 5.0, 8.0, 10.0)),
    "sis_k_sweep": dict(
        delta=1.0, epsilon=0.3, runs=100, tau_factors=(1.5, 2.0, 3.0), k_values=(1, 2, 5, 10)
    ),
}


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        return f"{float(x):.12g}"
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_summary(path: Path, entries: dict) -> None:
    path.write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in entries.items()))


def _resolved(spec: ExperimentSpec, key: str):
    value = getattr(spec, key)
    if value is not None:
        return value
    return _DEFAULTS[spec.id].get(key)


def _passfail(ok: bool) -> str:
    return "pass" if ok else "FAIL"


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run one scripted experiment; returns the summary that was written."""
    if spec.id not in EXPERIMENT_IDS:
        raise SisqError(f"unknown experiment id {spec.id!r}; known: {', '.join(EXPERIMENT_IDS)}")
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = {
        "fig2": _run_dynamics,
        "fig3": _run_dynamics,
        "completo2": _run_dynamics,
        "averaged": _run_averaged,
        "low": _run_low,
        "ae_bound": _run_ae_bound,
        "frac": _run_frac,
        "sis_k_sweep": _run_sis_k_sweep,
    }[spec.id]
    summary = runner(spec, out)
    _write_summary(out / "summary.txt", summary)
    return summary


# ---------------------------------------------------------------------------


def _dynamics_network(spec_id: str):
    if spec_id == "completo2":
        return build_community_graph(path_of_cliques_spec())
    return build_community_graph(fig1_spec())


def _run_dynamics(spec: ExperimentSpec, out: Path) -> dict:
    """fig2 / fig3 / completo2: reduced mean-field curves vs ensemble means."""
    beta = _resolved(spec, "beta")
    delta = _resolved(spec, "delta")
    eps = _resolved(spec, "epsilon")
    runs = _resolved(spec, "runs")
    t_max = _resolved(spec, "t_max")
    grid_step = _resolved(spec, "grid_step")

    graph, partition = _dynamics_network(spec.id)
    save_graph(graph, out / "graph.edges")
    save_partition(partition, out / "graph.cells")
    params = EpidemicParams(beta, delta, eps)
    w = weighted_adjacency(graph, partition, eps)
    qm = quotient_model(graph, partition, eps)
    lam1 = spectral_radius(qm.Q).lambda1
    tau_c = threshold(lam1)

    # infect the first cell at t = 0
    pbar0 = np.zeros(qm.n_cells)
    pbar0[0] = 1.0
    init_nodes = list(partition.cells[0])

    # integrate so that every grid point is a recorded RK4 step
    base_dt = default_dt(params, float(qm.Q_tilde.sum(axis=1).max()))
    per = max(1, int(np.ceil(grid_step / base_dt)))
    dt = grid_step / per
    traj = integrate_reduced(qm, params, pbar0, t_max, dt=dt, record_every=per)

    stats = ensemble(
        w, params, init_nodes, t_max, traj.times, runs, spec.seed,
        partition=partition, workers=spec.workers,
    )

    _write_csv(
        out / "trajectory.csv",
        ["t"] + [f"p_{j + 1}" for j in range(qm.n_cells)],
        ([t] + list(row) for t, row in zip(traj.times, traj.states)),
    )
    header = ["t"]
    for j in range(qm.n_cells):
        header += [f"cell_{j}_mean", f"cell_{j}_se"]
    header.append("survivors")
    rows = (
        [t] + [v for j in range(qm.n_cells) for v in (stats.mean[i, j], stats.se[i, j])]
        + [int(stats.survivors[i])]
        for i, t in enumerate(stats.times)
    )
    _write_csv(out / "ensemble.csv", header, rows)

    slack = stats.mean - traj.states - 3.0 * stats.se
    upper_ok = bool(slack.max() <= 1e-12)
    summary = {
        "experiment": spec.id,
        "beta": beta,
        "delta": delta,
        "epsilon": eps,
        "tau": params.tau,
        "runs": runs,
        "seed": spec.seed,
        "t_max": t_max,
        "grid_step": grid_step,
        "n_nodes": graph.n_nodes,
        "n_cells": qm.n_cells,
        "lambda1": lam1,
        "tau_c": tau_c,
        "regime": "subcritical" if params.tau <= tau_c else "supercritical",
        "check_mean_field_upper_bound": _passfail(upper_ok),
        "max_excess_over_3se": float(slack.max()),
    }
    if spec.id == "completo2":
        closed = homogeneous_exact_lambda1(qm)
        summary["lambda1_closed_form"] = closed
        summary["check_closed_form"] = _passfail(abs(closed - lam1) <= 1e-9 * lam1)
        summary["check_tau_c_reference"] = _passfail(abs(tau_c - 0.0348) <= 2e-4)
    if spec.id in ("fig2", "fig3"):
        summary["check_tau_c_reference"] = _passfail(abs(tau_c - 0.3178) <= 5e-4)

    if spec.plots:
        plotting.plot_dynamics(
            out / "figure.png",
            traj.times,
            traj.states,
            stats,
            [f"cell {j + 1}" for j in range(qm.n_cells)],
            f"{spec.id}: tau={params.tau:.4g}, tau_c={tau_c:.4g}",
        )
    return summary


def _run_averaged(spec: ExperimentSpec, out: Path) -> dict:
    """Full-system trajectories with scattered starts inside one cell vs the reduced flow."""
    eps = _resolved(spec, "epsilon")
    graph, partition = build_community_graph(fig1_spec())
    save_graph(graph, out / "graph.edges")
    save_partition(partition, out / "graph.cells")
    w = weighted_adjacency(graph, partition, eps)
    qm = quotient_model(graph, partition, eps)
    target_cell = 2  # the 4-node cell
    nodes = partition.cell_arrays[target_cell]
    p0_nodes = np.array([0.2, 0.4, 0.6, 0.8])

    regimes = [("a_subcritical", 0.29, 1.0, 25.0), ("b_supercritical", 1.5, 0.3, 40.0)]
    rows = []
    panels = []
    summary: dict = {
        "experiment": spec.id,
        "epsilon": eps,
        "cell": target_cell,
        "initial_spread": float(p0_nodes.max() - p0_nodes.min()),
    }
    for name, beta, delta, t_max in regimes:
        params = EpidemicParams(beta, delta, eps)
        p0 = np.zeros(graph.n_nodes)
        p0[nodes] = p0_nodes
        pbar0 = np.zeros(qm.n_cells)
        pbar0[target_cell] = p0_nodes.mean()
        base_dt = default_dt(params, w.max_row_sum)
        per = max(1, int(np.ceil(0.25 / base_dt)))
        dt = 0.25 / per
        full = integrate_full(w, params, p0, t_max, dt=dt, record_every=per)
        red = integrate_reduced(qm, params, pbar0, t_max, dt=dt, record_every=per)
        node_curves = full.states[:, nodes]
        reduced_curve = red.states[:, target_cell]
        for i, t in enumerate(full.times):
            rows.append([name, t] + list(node_curves[i]) + [reduced_curve[i]])
        spread = node_curves.max(axis=1) - node_curves.min(axis=1)
        gap_end = float(np.abs(node_curves[-1] - reduced_curve[-1]).max())
        summary[f"{name}_final_spread"] = float(spread[-1])
        summary[f"{name}_final_gap_to_reduced"] = gap_end
        summary[f"check_{name}_approaches_invariant_set"] = _passfail(
            spread[-1] < 0.1 * spread[0] and gap_end < 0.05
        )
        panels.append((name, full.times, node_curves, reduced_curve))

    _write_csv(
        out / "trajectory.csv",
        ["regime", "t"] + [f"p_node_{v}" for v in nodes] + ["p_reduced"],
        rows,
    )
    if spec.plots:
        plotting.plot_node_trajectories(
            out / "figure.png", panels, "scattered starts collapse onto the reduced flow"
        )
    return summary


def _run_low(spec: ExperimentSpec, out: Path) -> dict:
    """Threshold lower bound vs exact threshold across ring-community sizes."""
    eps = _resolved(spec, "epsilon")
    k_values = _resolved(spec, "k_values")
    rows = []
    ok_order = True
    ok_quotient = True
    for k in k_values:
        graph, partition = build_community_graph(ring_family_spec(40, int(k), 2))
        qm = quotient_model(graph, partition, eps)
        w = weighted_adjacency(graph, partition, eps)
        tau_star = weyl_lower_bound(qm)
        lam_q = spectral_radius(qm.Q).lambda1
        lam_full = spectral_radius(w.csr, tol=1e-11).lambda1
        tau_q = threshold(lam_q)
        tau_full = threshold(lam_full)
        ok_order &= tau_star <= tau_q + 1e-12
        ok_quotient &= abs(lam_q - lam_full) <= 1e-8 * lam_q
        rows.append([int(k), graph.n_nodes, tau_star, tau_q, tau_full])
    _write_csv(
        out / "sweep.csv", ["k", "n_nodes", "tau_star", "tau_c_quotient", "tau_c_full"], rows
    )
    summary = {
        "experiment": spec.id,
        "epsilon": eps,
        "n_cells": 40,
        "k_values": " ".join(str(int(k)) for k in k_values),
        "check_bound_below_threshold": _passfail(ok_order),
        "check_quotient_matches_full": _passfail(ok_quotient),
    }
    if spec.plots:
        arr = np.array([r[2:] for r in rows])
        plotting.plot_sweep(
            out / "figure.png",
            [r[0] for r in rows],
            {"tau_star (bound)": arr[:, 0], "tau_c (exact)": arr[:, 1]},
            "community size k",
            "threshold",
            "Weyl lower bound vs exact threshold (40 ring communities)",
        )
    return summary


def _run_ae_bound(spec: ExperimentSpec, out: Path) -> dict:
    """Spectral radius of a chord-perturbed ring network vs its additive bound."""
    eps = _resolved(spec, "epsilon")
    chords = _resolved(spec, "chords")
    base_graph, partition = build_community_graph(ring_family_spec(40, 25, 2))
    save_graph(base_graph, out / "graph.edges")
    save_partition(partition, out / "graph.cells")
    qm = quotient_model(base_graph, partition, eps)
    lam_bhat = spectral_radius(qm.b_hat).lambda1 if qm.b_hat.max() > 0 else 0.0
    lambda1_cells = np.diag(qm.d).astype(float)

    rows = []
    ok = True
    for c in chords:
        pert_graph = add_chords(base_graph, partition, int(c))
        w = weighted_adjacency(pert_graph, partition, eps)
        lam_actual = spectral_radius(w.csr, tol=1e-11).lambda1
        report = perturbation_decompose(base_graph, pert_graph, partition)
        pb = perturbation_bound(report)
        lam_bound = float(lambda1_cells.max()) + lam_bhat + pb
        tau_exact = threshold(lam_actual)
        tau_ae = almost_equitable_lower_bound(qm, lambda1_cells, pb)
        ok &= (lam_actual <= lam_bound + 1e-9) and (tau_ae <= tau_exact + 1e-12)
        rows.append([int(c), lam_actual, lam_bound, pb, tau_exact, tau_ae])
    _write_csv(
        out / "sweep.csv",
        ["chords", "lambda1_actual", "lambda1_bound", "perturbation_bound", "tau_c", "tau_ae_lower"],
        rows,
    )
    summary = {
        "experiment": spec.id,
        "epsilon": eps,
        "n_cells": 40,
        "k": 25,
        "chords": " ".join(str(int(c)) for c in chords),
        "check_bound_dominates": _passfail(ok),
    }
    if spec.plots:
        arr = np.array(rows, dtype=float)
        plotting.plot_sweep(
            out / "figure.png",
            arr[:, 0],
            {"lambda1 (actual)": arr[:, 1], "lambda1 (bound)": arr[:, 2]},
            "chords added per community",
            "spectral radius",
            "almost-equitable perturbation bound (40 rings of 25)",
        )
    return summary


def _run_frac(spec: ExperimentSpec, out: Path) -> dict:
    """Closed-form steady-fraction approximation vs the exact fixed point."""
    eps = _resolved(spec, "epsilon")
    delta = _resolved(spec, "delta")
    tau_factors = _resolved(spec, "tau_factors")
    rows = []
    panels = []
    summary = {
        "experiment": spec.id,
        "epsilon": eps,
        "delta": delta,
        "tau_factors": " ".join(_fmt(f) for f in tau_factors),
    }
    for name, builder in (("fig1", fig1_spec), ("completo2", path_of_cliques_spec)):
        graph, partition = build_community_graph(builder())
        w = weighted_adjacency(graph, partition, eps)
        qm = quotient_model(graph, partition, eps)
        tau_c = threshold(spectral_radius(qm.Q).lambda1)
        taus, exacts, approxs = [], [], []
        worst = 0.0
        for f in tau_factors:
            tau = f * tau_c
            params = EpidemicParams(tau * delta, delta, eps)
            exact = float(steady_state_full(w, params).p_inf.mean())
            approx = avg_fraction_approx(qm, params).y_inf
            err = abs(exact - approx)
            if f >= 2.0:
                worst = max(worst, err)
            rows.append([name, f, tau, exact, approx, err])
            taus.append(tau)
            exacts.append(exact)
            approxs.append(approx)
        est = avg_fraction_approx(qm, EpidemicParams(1.0, 1.0, eps))
        summary[f"{name}_tau_c"] = tau_c
        summary[f"{name}_r_gap"] = est.r2 - est.r1
        summary[f"{name}_max_abs_err_tau_ge_2tauc"] = worst
        summary[f"check_{name}_approx_within_0.05"] = _passfail(worst <= 0.05)
        panels.append((name, np.array(taus), np.array(exacts), np.array(approxs)))
    _write_csv(
        out / "sweep.csv",
        ["graph", "tau_factor", "tau", "y_exact", "y_approx", "abs_err"],
        rows,
    )
    if spec.plots:
        plotting.plot_fraction_panels(
            out / "figure.png", panels, "steady-state infected fraction: approximation quality"
        )
    return summary


def _run_sis_k_sweep(spec: ExperimentSpec, out: Path) -> dict:
    """Simulated quasi-stationary fraction vs mean-field across community sizes."""
    eps = _resolved(spec, "epsilon")
    delta = _resolved(spec, "delta")
    runs = _resolved(spec, "runs")
    k_values = _resolved(spec, "k_values")
    tau_factors = _resolved(spec, "tau_factors")
    rows = []
    rms_by_k = {}
    for k in k_values:
        graph, partition = build_community_graph(regular_cliques_spec(500, 10, int(k)))
        w = weighted_adjacency(graph, partition, eps)
        qm = quotient_model(graph, partition, eps)
        tau_c = threshold(spectral_radius(qm.Q).lambda1)
        errs = []
        for f in tau_factors:
            tau = f * tau_c
            params = EpidemicParams(tau * delta, delta, eps)
            nimfa = steady_state_reduced(qm, params)
            y_nimfa = float((qm.sizes * nimfa.p_inf).sum() / qm.sizes.sum())
            sim = steady_fraction(
                w, params, range(graph.n_nodes), t_burn=5.0 / delta, t_window=10.0 / delta,
                runs=runs, master_seed=spec.seed, workers=spec.workers,
            )
            errs.append((sim.mean - y_nimfa) ** 2)
            rows.append([int(k), f, tau, sim.mean, sim.se, sim.survivors, y_nimfa])
        rms_by_k[int(k)] = float(np.sqrt(np.mean(errs)))
    _write_csv(
        out / "sweep.csv",
        ["k", "tau_factor", "tau", "y_sim", "y_se", "survivors", "y_nimfa"],
        rows,
    )
    ks = sorted(rms_by_k)
    summary = {
        "experiment": spec.id,
        "epsilon": eps,
        "delta": delta,
        "runs": runs,
        "seed": spec.seed,
        "n_nodes": 500,
        "degree": 10,
    }
    for k in ks:
        summary[f"rms_k_{k}"] = rms_by_k[k]
    summary["check_rms_decreases_with_k"] = _passfail(rms_by_k[ks[-1]] < rms_by_k[ks[0]])
    if spec.plots:
        arr = np.array([[r[0], r[2], r[3], r[6]] for r in rows], dtype=float)
        series = {}
        for k in ks:
            mask = arr[:, 0] == k
            series[f"sim k={k}"] = arr[mask, 2]
        plotting.plot_sweep(
            out / "figure.png",
            np.array(tau_factors, dtype=float),
            series,
            "tau / tau_c",
            "steady infected fraction",
            "quasi-stationary fraction vs mean-field (N=500, degree 10)",
        )
    return summary
