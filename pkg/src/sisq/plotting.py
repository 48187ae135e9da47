"""Figure rendering for experiment outputs.

Every experiment writes its CSV data first; these helpers turn the in-memory
results into a PNG next to it.  Rendering always goes through the Agg backend
so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "apply_style",
    "plot_dynamics",
    "plot_sweep",
    "plot_node_trajectories",
    "plot_fraction_panels",
]

_STYLE = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 130,
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.3,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.bbox": "tight",
}


def apply_style():
    matplotlib.rcParams.update(_STYLE)


def plot_dynamics(path, nimfa_times, nimfa_states, sim, labels, title):
    """Mean-field curves (lines) against ensemble means with 3*SE bars (markers)."""
    apply_style()
    fig, ax = plt.subplots()
    colors = plt.cm.tab10(np.linspace(0, 1, 10))
    for j, label in enumerate(labels):
        c = colors[j % 10]
        ax.plot(nimfa_times, nimfa_states[:, j], color=c, label=label)
        if sim is not None:
            stride = max(1, len(sim.times) // 40)
            ax.errorbar(
                sim.times[::stride],
                sim.mean[::stride, j],
                yerr=3.0 * sim.se[::stride, j],
                color=c,
                fmt="o",
                ms=2.5,
                lw=0.7,
                capsize=1.5,
            )
    ax.set_xlabel("t")
    ax.set_ylabel("infection probability")
    ax.set_ylim(bottom=0)
    ax.set_title(title)
    ax.legend(ncol=2)
    fig.savefig(path)
    plt.close(fig)


def plot_sweep(path, x, series, xlabel, ylabel, title, logy=False):
    """Simple multi-series sweep plot; ``series`` maps label -> y array."""
    apply_style()
    fig, ax = plt.subplots()
    markers = ["o", "s", "^", "d", "v", "*"]
    for i, (label, y) in enumerate(series.items()):
        ax.plot(x, y, marker=markers[i % len(markers)], ms=3.5, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.savefig(path)
    plt.close(fig)


def plot_node_trajectories(path, panels, title):
    """Per-node full-system curves next to the reduced one, one panel per regime.

    ``panels`` is a list of (subtitle, times, node_curves, reduced_curve).
    """
    apply_style()
    fig, axes = plt.subplots(1, len(panels), figsize=(6.0 * len(panels), 3.8), squeeze=False)
    for ax, (subtitle, times, node_curves, reduced) in zip(axes[0], panels):
        for col in range(node_curves.shape[1]):
            ax.plot(times, node_curves[:, col], lw=0.9, alpha=0.8)
        ax.plot(times, reduced, "k--", lw=1.6, label="reduced (cell mean start)")
        ax.set_xlabel("t")
        ax.set_ylabel("infection probability")
        ax.set_title(subtitle)
        ax.legend()
    fig.suptitle(title)
    fig.savefig(path)
    plt.close(fig)


def plot_fraction_panels(path, panels, title):
    """Steady-fraction approximation vs exact value, one panel per graph."""
    apply_style()
    fig, axes = plt.subplots(1, len(panels), figsize=(6.0 * len(panels), 3.8), squeeze=False)
    for ax, (subtitle, tau, exact, approx) in zip(axes[0], panels):
        ax.plot(tau, exact, "o-", ms=3.5, label="exact fixed point")
        ax.plot(tau, approx, "s--", ms=3.5, label="approximation")
        ax.set_xlabel("tau")
        ax.set_ylabel("steady infected fraction")
        ax.set_title(subtitle)
        ax.legend()
    fig.suptitle(title)
    fig.savefig(path)
    plt.close(fig)
