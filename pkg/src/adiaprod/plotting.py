"""Figure rendering for the report path (written alongside the CSV output)."""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .signals import PropagatorTable  # noqa: E402


def propagator_figure(path: Path, table: PropagatorTable, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    d = table.dim
    for i in range(d):
        for j in range(d):
            ax.plot(table.grid, np.abs(table.values[:, i, j]),
                    lw=1.0, label=f"|U{i + 1}{j + 1}|")
    ax.set_xlabel("t")
    ax.set_ylabel("|U_ij(t)|")
    ax.set_title(title)
    ax.legend(fontsize=7, ncol=d)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def error_figure(path: Path, grid: np.ndarray, per_t: np.ndarray,
                 title: str) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    floor = np.maximum(per_t, 1e-18)
    ax.semilogy(grid, floor, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("Frobenius error vs oracle")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def residual_figure(path: Path, residuals: list[float], title: str) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    idx = np.arange(len(residuals))
    ax.semilogy(idx, np.maximum(residuals, 1e-18), "o-")
    ax.set_xticks(idx)
    ax.set_xlabel("factor index")
    ax.set_ylabel("sup_t ||H^(l+1)||_F")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def trajectory_figure(path: Path, traj: np.ndarray,
                      reference: np.ndarray | None, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(traj[:, 0], traj[:, 1], lw=1.2, label="x(t)")
    ax.plot(traj[:, 0], traj[:, 2], lw=1.2, label="v(t)")
    if reference is not None:
        ax.plot(reference[:, 0], reference[:, 1], "k--", lw=0.8,
                label="x oracle")
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
