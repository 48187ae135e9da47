"""Command-line interface.

Subcommands: check-partition, quotient, threshold, bounds, nimfa,
steady-state, simulate, experiment.  Exit codes: 0 success, 1 domain error,
2 usage error.  A ``--config`` file of ``key = value`` lines can stand in for
any flag (command-line flags win); list-valued keys are whitespace-separated.
All output is deterministic given the flags.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import SisqError
from .experiments import EXPERIMENT_IDS, ExperimentSpec, run_experiment
from .gillespie import ensemble, steady_fraction
from .graphs import load_graph, load_partition, weighted_adjacency
from .meanfield import (
    EpidemicParams,
    full_rhs,
    integrate_full,
    integrate_reduced,
    lift,
    reduced_rhs,
    steady_state_full,
    steady_state_reduced,
)
from .partitions import (
    Violation,
    check_almost_equitable,
    check_equitable,
    perturbation_decompose,
    quotient_model,
)
from .spectral import compute_bounds, spectral_radius, threshold

_FMT = "{:.12g}"


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return _FMT.format(float(x))


def _emit(lines, out_path):
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_config(path) -> dict:
    config = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SisqError(f"config line without '=': {line!r}")
        key, _, value = line.partition("=")
        config[key.strip().replace("-", "_")] = value.strip()
    return config


class _Options:
    """Flag values merged with the config file; unset flags fall back to defaults."""

    def __init__(self, args):
        self.args = args
        self.config = _load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, key, default=None, cast=float):
        value = getattr(self.args, key, None)
        if value is None and key in self.config:
            raw = self.config[key]
            if cast is bool:
                value = raw.lower() in ("1", "true", "yes", "on")
            elif cast in (tuple, list):
                value = tuple(raw.split())
            else:
                value = cast(raw)
        if value is None:
            value = default
        return value

    def require(self, key, cast=str):
        value = self.get(key, cast=cast)
        if value is None:
            raise SisqError(f"missing required option --{key.replace('_', '-')}")
        return value


def _load_network(opt):
    graph = load_graph(opt.require("graph"))
    partition = load_partition(opt.require("cells"), graph)
    return graph, partition


def _params(opt) -> EpidemicParams:
    return EpidemicParams(
        float(opt.require("beta", float)),
        float(opt.require("delta", float)),
        float(opt.get("eps", 0.3)),
    )


def _parse_init_probs(text, partition, system):
    """Initial probabilities: 'cell:p1,p2,...' or a file with one value per line."""
    dim = partition.n_cells if system == "reduced" else partition.n_nodes
    if text.startswith("cell:"):
        probs = np.array([float(t) for t in text[5:].split(",")])
        if len(probs) != partition.n_cells:
            raise SisqError(f"init lists {len(probs)} cells, partition has {partition.n_cells}")
        return probs if system == "reduced" else lift(probs, partition)
    values = np.array([float(t) for t in Path(text).read_text().split()])
    if len(values) != dim:
        raise SisqError(f"init file has {len(values)} values, expected {dim}")
    return values


def _parse_init_nodes(text, partition):
    """Initially infected nodes: 'cells:i,j' or 'nodes:u,v' or a file of node ids."""
    if text.startswith("cells:"):
        nodes = []
        for tok in text[6:].split(","):
            nodes.extend(partition.cells[int(tok)])
        return nodes
    if text.startswith("nodes:"):
        return [int(t) for t in text[6:].split(",")]
    return [int(t) for t in Path(text).read_text().split()]


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_check_partition(args) -> int:
    opt = _Options(args)
    graph, partition = _load_network(opt)
    checker = check_almost_equitable if opt.get("almost", False, bool) else check_equitable
    result = checker(graph, partition)
    if isinstance(result, Violation):
        print(f"not equitable: {result}", file=sys.stderr)
        return 1
    kind = "almost_equitable" if opt.get("almost", False, bool) else "equitable"
    lines = [f"status,{kind}"]
    lines += [",".join(str(int(v)) for v in row) for row in result.d]
    _emit(lines, opt.get("out", cast=str))
    return 0


def _cmd_quotient(args) -> int:
    opt = _Options(args)
    graph, partition = _load_network(opt)
    qm = quotient_model(graph, partition, float(opt.get("eps", 0.3)))
    lines = [",".join(_fmt(v) for v in row) for row in qm.Q]
    _emit(lines, opt.get("out", cast=str))
    return 0


def _cmd_threshold(args) -> int:
    opt = _Options(args)
    graph, partition = _load_network(opt)
    eps = float(opt.get("eps", 0.3))
    if opt.get("method", "quotient", str) == "full":
        w = weighted_adjacency(graph, partition, eps)
        lam = spectral_radius(w.csr).lambda1
    else:
        qm = quotient_model(graph, partition, eps)
        lam = spectral_radius(qm.Q).lambda1
    lines = [f"lambda1,{_fmt(lam)}", f"tau_c,{_fmt(threshold(lam))}"]
    _emit(lines, opt.get("out", cast=str))
    return 0


def _cmd_bounds(args) -> int:
    opt = _Options(args)
    graph, partition = _load_network(opt)
    eps = float(opt.get("eps", 0.3))
    qm = quotient_model(graph, partition, eps)
    report = None
    perturbed = opt.get("perturbed_graph", cast=str)
    if perturbed:
        g_pert = load_graph(perturbed)
        report = perturbation_decompose(graph, g_pert, partition)
    bounds = compute_bounds(qm, report=report)
    lines = [
        f"lambda1,{_fmt(bounds.lambda1)}",
        f"tau_c,{_fmt(bounds.tau_c)}",
        f"tau_star,{_fmt(bounds.tau_star)}",
    ]
    if bounds.exact_homogeneous is not None:
        lines.append(f"lambda1_homogeneous,{_fmt(bounds.exact_homogeneous)}")
    if bounds.almost_equitable_lower is not None:
        lines.append(f"tau_ae_lower,{_fmt(bounds.almost_equitable_lower)}")
    _emit(lines, opt.get("out", cast=str))
    return 0


def _cmd_nimfa(args) -> int:
    opt = _Options(args)
    graph, partition = _load_network(opt)
    params = _params(opt)
    system = opt.get("system", "reduced", str)
    if system not in ("full", "reduced"):
        raise SisqError(f"unknown system {system!r}")
    t_max = float(opt.require("tmax", float))
    dt = opt.get("dt", cast=float)
    record = int(opt.get("record_every", 1, int))
    x0 = _parse_init_probs(opt.get("init", "cell:" + ",".join(["1"] + ["0"] * (partition.n_cells - 1)), str), partition, system)
    if system == "reduced":
        qm = quotient_model(graph, partition, params.epsilon)
        traj = integrate_reduced(qm, params, x0, t_max, dt=dt, record_every=record)
    else:
        w = weighted_adjacency(graph, partition, params.epsilon)
        traj = integrate_full(w, params, x0, t_max, dt=dt, record_every=record)
    header = "t," + ",".join(f"p_{i + 1}" for i in range(traj.dim))
    lines = [header]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in row]))
    _emit(lines, opt.get("out", cast=str))
    return 0


def _cmd_steady_state(args) -> int:
    opt = _Options(args)
    graph, partition = _load_network(opt)
    params = _params(opt)
    tol = float(opt.get("tol", 1e-12))
    system = opt.get("system", "reduced", str)
    method = opt.get("method", "fixedpoint", str)
    if method not in ("fixedpoint", "ode"):
        raise SisqError(f"unknown method {method!r}")
    qm = quotient_model(graph, partition, params.epsilon) if system == "reduced" else None
    w = weighted_adjacency(graph, partition, params.epsilon)
    if method == "fixedpoint":
        state = steady_state_reduced(qm, params, tol=tol) if system == "reduced" else steady_state_full(w, params, tol=tol)
        p = state.p_inf
        note = f"method=fixedpoint iterations={state.iterations} residual={state.residual:.3e} below_threshold={state.below_threshold}"
    else:
        t_end = float(opt.get("tmax", 200.0 / params.delta))
        if system == "reduced":
            traj = integrate_reduced(qm, params, np.full(qm.n_cells, 0.5), t_end)
            rhs_val = reduced_rhs(qm, params, traj.final())
        else:
            traj = integrate_full(w, params, np.full(graph.n_nodes, 0.5), t_end)
            rhs_val = full_rhs(w, params, traj.final())
        p = traj.final()
        note = f"method=ode t_end={t_end:.6g} rhs_residual={np.abs(rhs_val).max():.3e}"
    label = "cell" if system == "reduced" else "node"
    lines = [f"{label},p_inf"] + [f"{i},{_fmt(v)}" for i, v in enumerate(p)]
    _emit(lines, opt.get("out", cast=str))
    print(note, file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    opt = _Options(args)
    graph, partition = _load_network(opt)
    params = _params(opt)
    runs = int(opt.get("runs", 1000, int))
    seed = int(opt.get("seed", 0, int))
    init = _parse_init_nodes(opt.get("init", "cells:0", str), partition)
    workers = opt.get("workers", cast=int)
    w = weighted_adjacency(graph, partition, params.epsilon)
    if opt.get("steady", False, bool):
        burn = opt.get("burn", cast=float)
        window = opt.get("window", cast=float)
        result = steady_fraction(
            w, params, init, t_burn=burn, t_window=window,
            runs=runs, master_seed=seed, workers=workers,
        )
        _emit(
            [
                "fraction,se,survivors,runs",
                f"{_fmt(result.mean)},{_fmt(result.se)},{result.survivors},{result.runs}",
            ],
            opt.get("out", cast=str),
        )
        return 0
    t_max = float(opt.require("tmax", float))
    step = float(opt.get("grid_step", t_max / 100.0))
    n_pts = int(np.floor(t_max / step + 1e-9)) + 1
    grid = np.arange(n_pts) * step
    per_node = opt.get("per_node", False, bool)
    stats = ensemble(
        w, params, init, t_max, grid, runs, seed,
        partition=None if per_node else partition, workers=workers,
    )
    label = "node" if per_node else "cell"
    header = ["t"]
    for j in range(stats.mean.shape[1]):
        header += [f"{label}_{j}_mean", f"{label}_{j}_se"]
    header.append("survivors")
    lines = [",".join(header)]
    for i, t in enumerate(stats.times):
        row = [_fmt(t)]
        for j in range(stats.mean.shape[1]):
            row += [_fmt(stats.mean[i, j]), _fmt(stats.se[i, j])]
        row.append(str(int(stats.survivors[i])))
        lines.append(",".join(row))
    _emit(lines, opt.get("out", cast=str))
    return 0


def _cmd_experiment(args) -> int:
    opt = _Options(args)
    exp_id = opt.require("id")
    out_dir = opt.require("out")

    def _int_tuple(key):
        v = opt.get(key, cast=tuple)
        return tuple(int(x) for x in v) if v is not None else None

    def _float_tuple(key):
        v = opt.get(key, cast=tuple)
        return tuple(float(x) for x in v) if v is not None else None

    spec = ExperimentSpec(
        id=exp_id,
        out_dir=Path(out_dir),
        beta=opt.get("beta", cast=float),
        delta=opt.get("delta", cast=float),
        epsilon=opt.get("eps", cast=float),
        runs=opt.get("runs", cast=int),
        seed=int(opt.get("seed", 1, int)),
        t_max=opt.get("tmax", cast=float),
        grid_step=opt.get("grid_step", cast=float),
        k_values=_int_tuple("k_values"),
        chords=_int_tuple("chords"),
        tau_factors=_float_tuple("tau_factors"),
        plots=not opt.get("no_plots", False, bool),
        workers=opt.get("workers", cast=int),
    )
    summary = run_experiment(spec)
    for key, value in summary.items():
        print(f"{key} = {value}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_network_flags(p):
    p.add_argument("--graph", help="graph file (N, then 'u v' lines)")
    p.add_argument("--cells", help="partition file (one cell per line)")
    p.add_argument("--eps", type=float, help="inter-community coupling (default 0.3)")


def _add_common(p):
    p.add_argument("--config", help="key=value file supplying defaults for any flag")
    p.add_argument("--out", help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sisq",
        description="SIS epidemics on community networks via quotient-graph reduction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-partition", help="test a partition for (almost-)equitability")
    _add_network_flags(p)
    _add_common(p)
    p.add_argument("--almost", action="store_true", default=None,
                   help="check the almost-equitable condition (off-diagonal only)")
    p.set_defaults(func=_cmd_check_partition)

    p = sub.add_parser("quotient", help="print the quotient matrix Q as CSV")
    _add_network_flags(p)
    _add_common(p)
    p.set_defaults(func=_cmd_quotient)

    p = sub.add_parser("threshold", help="epidemic threshold tau_c = 1/lambda1")
    _add_network_flags(p)
    _add_common(p)
    p.add_argument("--method", choices=["quotient", "full"],
                   help="power-iterate Q (default) or the full weighted adjacency")
    p.set_defaults(func=_cmd_threshold)

    p = sub.add_parser("bounds", help="threshold bounds (Weyl, homogeneous, almost-equitable)")
    _add_network_flags(p)
    _add_common(p)
    p.add_argument("--perturbed-graph", dest="perturbed_graph",
                   help="graph file with intra-cell edges added to --graph")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("nimfa", help="integrate the mean-field dynamics")
    _add_network_flags(p)
    _add_common(p)
    p.add_argument("--system", choices=["full", "reduced"])
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--init", help="'cell:p1,p2,...' or a file with one probability per line")
    p.set_defaults(func=_cmd_nimfa)

    p = sub.add_parser("steady-state", help="nonzero steady state of the mean-field model")
    _add_network_flags(p)
    _add_common(p)
    p.add_argument("--system", choices=["full", "reduced"])
    p.add_argument("--method", choices=["ode", "fixedpoint"])
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--tmax", type=float)
    p.set_defaults(func=_cmd_steady_state)

    p = sub.add_parser("simulate", help="exact stochastic SIS ensemble")
    _add_network_flags(p)
    _add_common(p)
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tmax", type=float)
    p.add_argument("--grid-step", dest="grid_step", type=float)
    p.add_argument("--init", help="'cells:i,j' or 'nodes:u,v' or a file of node ids")
    p.add_argument("--steady", action="store_true", default=None,
                   help="estimate the quasi-stationary infected fraction instead")
    p.add_argument("--burn", type=float, help="burn-in time (default 10/delta)")
    p.add_argument("--window", type=float, help="averaging window (default 40/delta)")
    p.add_argument("--per-cell", dest="per_cell", action="store_true", default=None)
    p.add_argument("--per-node", dest="per_node", action="store_true", default=None)
    p.add_argument("--workers", type=int, help="parallel workers (or SISQ_WORKERS)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("experiment", help="run a scripted experiment")
    _add_common(p)
    p.add_argument("--id", choices=list(EXPERIMENT_IDS))
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tmax", type=float)
    p.add_argument("--grid-step", dest="grid_step", type=float)
    p.add_argument("--no-plots", dest="no_plots", action="store_true", default=None)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SisqError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
