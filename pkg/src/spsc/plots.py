"""Figure rendering for run reports; every figure sits next to its CSV."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_fit_figure(trace, path) -> None:
    """Objective breakdown, pace schedule, and selection stats per iteration."""
    it = [row.iteration for row in trace.rows]
    fig, axes = plt.subplots(1, 3, figsize=(12.5, 3.4))

    axes[0].plot(it, [row.sc_objective for row in trace.rows], marker=".", label="data fit")
    axes[0].plot(it, [row.recon for row in trace.rows], marker=".", label="weighted recon")
    axes[0].set_xlabel("outer iteration")
    axes[0].set_ylabel("objective")
    axes[0].legend(fontsize=8)

    axes[1].semilogy(it, [row.lam for row in trace.rows], marker=".", color="tab:red")
    axes[1].set_xlabel("outer iteration")
    axes[1].set_ylabel("pace $\\lambda$")

    axes[2].plot(it, [row.mean_weight for row in trace.rows], marker=".", label="mean weight")
    axes[2].plot(
        it, [row.selected_fraction for row in trace.rows], marker=".", label="selected fraction"
    )
    axes[2].set_xlabel("outer iteration")
    axes[2].set_ylim(-0.02, 1.02)
    axes[2].legend(fontsize=8)

    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_figures(records, out_dir) -> None:
    """One line per method: mean ACC and mean NMI against the corruption level."""
    methods = sorted({rec["method"] for rec in records})
    for metric, fname in (("acc_mean", "acc_vs_rho.png"), ("nmi_mean", "nmi_vs_rho.png")):
        fig, ax = plt.subplots(figsize=(5.5, 3.6))
        for method in methods:
            pts = sorted(
                ((rec["rho"], rec[metric]) for rec in records if rec["method"] == method)
            )
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=method)
        ax.set_xlabel("corruption ratio $\\rho$")
        ax.set_ylabel(metric.replace("_mean", "").upper())
        ax.set_ylim(0, 1.02)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(f"{out_dir}/{fname}", dpi=150)
        plt.close(fig)


def render_weight_trace_figure(rows, path) -> None:
    """Noise-weight correlations and mean weight across the pace schedule."""
    it = [r["iter"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    for key, style in (("pearson", "tab:blue"), ("spearman", "tab:orange")):
        xs = [i for i, r in zip(it, rows) if r[key] is not None]
        ys = [r[key] for r in rows if r[key] is not None]
        if xs:
            ax.plot(xs, ys, marker=".", color=style, label=f"{key} corr")
    ax.plot(it, [r["mean_weight"] for r in rows], marker=".", color="tab:green", label="mean weight")
    ax.axhline(0.0, color="gray", lw=0.8)
    ax.set_xlabel("outer iteration")
    ax.set_ylim(-1.05, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
