"""Rendering of run artifacts as matplotlib figures.

Every figure is written next to its CSV counterpart; the CSVs stay the
canonical record, the PNGs are for quick inspection.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_trace_figure(records, path):
    """Training/validation loss over time with the explored fraction below."""
    rec = np.asarray(records, dtype=np.float64)
    fig, (ax, axf) = plt.subplots(2, 1, sharex=True, figsize=(7, 6),
                                  height_ratios=[2, 1])
    ax.plot(rec[:, 0], rec[:, 3], "o-", ms=3, label="training loss")
    ax.plot(rec[:, 0], rec[:, 4], "-", label="validation loss")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    axf.plot(rec[:, 0], 100.0 * rec[:, 5], "-", color="tab:blue")
    axf.set_ylabel("neighborhood explored [%]")
    axf.set_xlabel("wall time [s]")
    for t in rec[np.diff(rec[:, 2], prepend=rec[0, 2]) > 0, 0]:
        ax.axvline(t, color="gray", lw=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_grid_figure(grid, resolution, path):
    """Decision-surface map from (x, y, output) grid rows."""
    z = np.asarray(grid)[:, 2].reshape(resolution, resolution)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(z.T, origin="lower", extent=(-1, 1, -1, 1), cmap="RdBu_r",
                   vmin=0.0, vmax=1.0)
    ax.contour(np.linspace(-1, 1, resolution), np.linspace(-1, 1, resolution),
               z.T, levels=[0.5], colors="k", linewidths=1.0)
    fig.colorbar(im, ax=ax, label="network output")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_histogram_figure(bins, path):
    """Weight-value histogram from (bin_lo, bin_hi, count) rows."""
    b = np.asarray(bins, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(b[:, 0], b[:, 2], width=b[:, 1] - b[:, 0], align="edge",
           color="tab:blue", edgecolor="none")
    ax.set_xlabel("weight value")
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_trajectory_figure(traj, path):
    """Positions, applied force, and phase-space views of one simulation."""
    t = traj[:, 0]
    fig, axes = plt.subplots(2, 2, figsize=(9, 7))
    axes[0, 0].plot(t, traj[:, 1], label="x [m]")
    axes[0, 0].plot(t, traj[:, 3], label="theta [rad]")
    axes[0, 0].set_xlabel("t [s]")
    axes[0, 0].legend()
    axes[0, 1].plot(t, traj[:, 5], lw=0.6)
    axes[0, 1].set_xlabel("t [s]")
    axes[0, 1].set_ylabel("force [N]")
    axes[1, 0].plot(traj[:, 1], traj[:, 2], lw=0.5)
    axes[1, 0].set_xlabel("x")
    axes[1, 0].set_ylabel("x_dot")
    axes[1, 1].plot(traj[:, 3], traj[:, 4], lw=0.5)
    axes[1, 1].set_xlabel("theta")
    axes[1, 1].set_ylabel("theta_dot")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
