"""Figure rendering for the CLI report paths (written next to CSV output)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_MAX_FAN_LINES = 64


def save_trajectory_figure(traj, path) -> None:
    """Level fan, energy, and step-size panels for a solver run."""
    fig, axes = plt.subplots(3, 1, figsize=(7, 9), sharex=True)
    steps = np.asarray(traj.steps)
    levels = np.stack(traj.levels, axis=0)
    q = levels.shape[1]
    picks = np.unique(np.linspace(0, q - 1, min(q, _MAX_FAN_LINES)).astype(int))
    for j in picks:
        axes[0].plot(steps, levels[:, j], lw=0.7, color="tab:blue", alpha=0.6)
    axes[0].set_ylabel("level value")
    axes[0].set_title("level evolution")

    axes[1].plot(steps, traj.energies, color="tab:orange")
    axes[1].set_ylabel("energy J")

    positive = np.asarray(traj.taus) > 0
    axes[2].semilogy(steps[positive], np.asarray(traj.taus)[positive],
                     color="tab:green")
    axes[2].set_ylabel("step size tau")
    axes[2].set_xlabel("step")
    fig.suptitle(f"run: {traj.termination}")
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)


def save_shock_study_figure(rows, path) -> None:
    """Log-log residual decay with a cubic reference slope."""
    hs = np.array([r.h for r in rows])
    res = np.array([r.residual for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(hs, res, "o-", label="residual")
    if res[0] > 0:
        ax.loglog(hs, res[0] * (hs / hs[0]) ** 3, "--", color="gray",
                  label="h^3 reference")
    for r in rows:
        if np.isfinite(r.observed_order):
            ax.annotate(f"{r.observed_order:.2f}", (r.h, r.residual),
                        textcoords="offset points", xytext=(5, 5), fontsize=8)
    ax.set_xlabel("window size h")
    ax.set_ylabel("|integral - expansion|")
    ax.invert_xaxis()
    ax.legend()
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)


def save_segmentation_figure(image, result, path) -> None:
    """Input image next to the three region masks."""
    panels = [(image, "input"), (result.background, "background"),
              (result.nucleus, "nucleus"), (result.cytoplasm, "cytoplasm")]
    fig, axes = plt.subplots(1, 4, figsize=(12, 3.2))
    for ax, (img, title) in zip(axes, panels):
        ax.imshow(np.asarray(img, dtype=float), cmap="gray")
        ax.set_title(title)
        ax.axis("off")
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
