"""Report rendering: matplotlib figures written next to the delimited output.

Every CLI report path calls into here so that a run directory always holds
the JSON report, a CSV flattening, and the figures for quick inspection.
"""

from __future__ import annotations

import csv
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def world_figure(pixels: np.ndarray, out_path, title: str = "terrain") -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(pixels)
    ax.set_title(title)
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)


def costmap_figure(values: np.ndarray, out_path, title: str = "costmap") -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(values, cmap="viridis", vmin=0.0, vmax=1.0)
    fig.colorbar(im, ax=ax, label="cost")
    ax.set_title(title)
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)


def plan_figure(
    background: np.ndarray,
    paths: Dict[str, List],
    start,
    goal,
    out_path,
    title: str = "planned paths",
) -> None:
    """Path polylines over a world render or cost field."""
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    if background.ndim == 2:
        ax.imshow(background, cmap="viridis", vmin=0, vmax=1)
    else:
        ax.imshow(background)
    colors = ["tab:blue", "tab:red", "tab:orange", "tab:green"]
    for i, (name, cells) in enumerate(paths.items()):
        xs = [c[0] for c in cells]
        ys = [c[1] for c in cells]
        ax.plot(xs, ys, color=colors[i % len(colors)], linewidth=2, label=name)
    ax.scatter([start[0]], [start[1]], marker="o", c="white", edgecolors="black", zorder=5, label="start")
    ax.scatter([goal[0]], [goal[1]], marker="*", s=140, c="yellow", edgecolors="black", zorder=5, label="goal")
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title(title)
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)


def loss_curves_figure(phase_losses: Dict[str, List[float]], out_path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    offset = 0
    for phase, losses in phase_losses.items():
        xs = np.arange(offset, offset + len(losses))
        ax.plot(xs, losses, marker="o", markersize=3, label=phase)
        offset += len(losses)
    ax.set_xlabel("epoch (cumulative across phases)")
    ax.set_ylabel("mean masked BCE")
    ax.legend()
    ax.grid(True, linestyle=":")
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)


def ranking_matrix_figure(matrix: Dict[str, Dict[str, float]], out_path) -> None:
    models = list(matrix)
    phases = list(next(iter(matrix.values())))
    grid = np.array([[matrix[m][p] for p in phases] for m in models])
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(grid, cmap="magma_r")
    ax.set_xticks(range(len(phases)), [f"test {p}" for p in phases])
    ax.set_yticks(range(len(models)), [f"model {m}" for m in models])
    for i in range(len(models)):
        for j in range(len(phases)):
            ax.text(j, i, f"{grid[i, j]:.3f}", ha="center", va="center",
                    color="white" if grid[i, j] > grid.max() / 2 else "black")
    fig.colorbar(im, ax=ax, label="margin ranking error")
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)


def tier_bars_figure(summary: Dict, out_path) -> None:
    """Mean low-tier proportions per model/ordering, seen vs unseen worlds."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    for ax, split in zip(axes, ("seen_low", "unseen_low")):
        per = summary[split]
        models = list(per)
        canon = [per[m]["canonical"] for m in models]
        inv = [per[m]["inverted"] for m in models]
        x = np.arange(len(models))
        ax.bar(x - 0.18, canon, width=0.36, label="canonical")
        ax.bar(x + 0.18, inv, width=0.36, label="inverted")
        ax.set_xticks(x, models, rotation=15)
        ax.set_ylim(0, 1)
        ax.set_title(split.replace("_low", " worlds"))
        ax.grid(True, axis="y", linestyle=":")
    axes[0].set_ylabel("low-tier proportion of path")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)
