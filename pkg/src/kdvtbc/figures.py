"""Matplotlib rendering for the report path: snapshots and convergence plots."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["snapshot_figure", "convergence_figure"]


def snapshot_figure(grid, values, t, path, reference=None) -> None:
    """Line plot of one solution snapshot, reference overlaid as crosses."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(grid, values, "-", color="tab:blue", lw=1.4, label="numerical")
    if reference is not None:
        ax.plot(grid[::4], np.asarray(reference)[::4], "x", color="tab:red",
                ms=4.5, mew=1.0, label="reference")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title(f"t = {t:g}")
    ax.grid(alpha=0.3)
    if reference is not None:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def convergence_figure(vary, values, errors, path) -> None:
    """Error plot: semilog in N^2 for spatial sweeps, loglog in M for time."""
    values = np.asarray(values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    if vary == "N":
        ax.semilogy(values**2, errors, "o-", color="tab:blue")
        ax.set_xlabel(r"$N^2$")
    else:
        ax.loglog(values, errors, "o-", color="tab:blue", label="error")
        guide = errors[0] * (values / values[0]) ** -2.0
        ax.loglog(values, guide, "k-", lw=1.0, label="slope -2")
        ax.set_xlabel("M")
        ax.legend(frameon=False)
    ax.set_ylabel("error")
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
