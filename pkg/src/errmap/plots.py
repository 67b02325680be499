"""Matplotlib figure rendering for reports and sweeps (SVG output).

Figures are written deterministically by default: SVG element ids are
seeded and date/creator metadata is stripped.
"""

from __future__ import annotations

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_SLICE_TIMES = (0.25, 0.5, 0.75, 1.0)


def _savefig(fig, path, deterministic=True):
    if deterministic:
        with plt.rc_context({"svg.hashsalt": "errmap"}):
            fig.savefig(path, metadata={"Date": None, "Creator": None})
    else:
        fig.savefig(path)
    plt.close(fig)


def _nearest_index(nodes, target):
    return int(np.argmin(np.abs(nodes - target)))


def plot_error_slices(report, path, deterministic=True):
    """Overlay e_true / e_res / e_FDM: four time slices, or steady profiles."""
    g = report.grid
    series = [("e_true", report.e_true, "k-"),
              ("e_res", report.e_res, "C0--"),
              ("e_FDM", report.e_fdm, "C1:")]
    series = [(name, f, style) for name, f, style in series if f is not None]

    if g.n_t:
        fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
        for ax, t_target in zip(axes.ravel(), _SLICE_TIMES):
            it = _nearest_index(g.t_nodes, t_target * g.t_max)
            for name, f, style in series:
                ax.plot(g.x_nodes, f.values[it], style, label=name, lw=1.4)
            ax.set_title(f"t = {g.t_nodes[it]:.3g}")
            ax.set_xlabel("x")
            ax.set_ylabel("error")
            ax.grid(alpha=0.3)
        axes[0, 0].legend(fontsize=8)
        fig.suptitle(f"{report.problem.id}: error estimates at fixed times")
    elif g.spatial_dims == 1:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for name, f, style in series:
            ax.plot(g.x_nodes, f.values, style, label=name, lw=1.4)
        ax.set_xlabel("x")
        ax.set_ylabel("error")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
        fig.suptitle(f"{report.problem.id}: error estimates")
    else:
        fig, axes = plt.subplots(1, len(series), figsize=(4 * len(series), 3.6),
                                 squeeze=False)
        vmax = max(np.max(np.abs(f.values)) for _, f, _ in series) or 1.0
        for ax, (name, f, _) in zip(axes[0], series):
            im = ax.imshow(f.values.T, origin="lower", cmap="RdBu_r",
                           vmin=-vmax, vmax=vmax,
                           extent=(*g.x_bounds, *g.y_bounds), aspect="auto")
            ax.set_title(name)
            ax.set_xlabel("x")
            ax.set_ylabel("y")
        fig.colorbar(im, ax=axes[0].tolist(), shrink=0.85)
        fig.suptitle(f"{report.problem.id}: error estimates")
    _savefig(fig, path, deterministic)


def plot_l2_over_time(report, path, deterministic=True):
    """Spatial L2 norm of each error field over time, with the bound if present."""
    curves = report.metrics.get("l2_curves")
    if not curves:
        return False
    t = np.asarray(curves["t"])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    styles = {"e_true": "k-", "e_res": "C0--", "e_fdm": "C1:"}
    for name, style in styles.items():
        if name in curves:
            label = "e_FDM" if name == "e_fdm" else name
            ax.semilogy(t, np.maximum(curves[name], 1e-300), style, label=label, lw=1.4)
    if report.bound_curve:
        bt = [pt[0] for pt in report.bound_curve]
        bb = [pt[1] for pt in report.bound_curve]
        ax.semilogy(bt, np.maximum(bb, 1e-300), "C2-.", label="e_bound", lw=1.4)
    ax.set_xlabel("t")
    ax.set_ylabel("spatial L2 norm")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.suptitle(f"{report.problem.id}: error over time")
    _savefig(fig, path, deterministic)
    return True


def plot_sweep(rows, path, deterministic=True):
    """Mean +- one standard deviation of accuracy vs grid size, log-log.

    ``rows`` are dicts with keys problem, seed, k, method, l2_accuracy.
    """
    methods = sorted({r["method"] for r in rows})
    ks = sorted({r["k"] for r in rows})
    problem = rows[0]["problem"] if rows else ""

    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for mi, method in enumerate(methods):
        means, stds = [], []
        for k in ks:
            vals = np.array([r["l2_accuracy"] for r in rows
                             if r["method"] == method and r["k"] == k])
            means.append(vals.mean())
            stds.append(vals.std())
        means = np.array(means)
        stds = np.array(stds)
        color = f"C{mi}"
        ax.plot(ks, means, "o-", color=color, label=f"e_{method}", lw=1.4)
        ax.fill_between(ks, np.maximum(means - stds, 1e-300), means + stds,
                        color=color, alpha=0.2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("grid nodes per dimension k")
    ax.set_ylabel("|| e_true - e_method ||_2")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.suptitle(f"{problem}: estimate accuracy vs discretization")
    _savefig(fig, path, deterministic)
