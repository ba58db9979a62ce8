"""Figure rendering for trial and suite outputs, written next to the CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Circle, Rectangle

from .harness import LOG_FIELDS, MetricsSummary, ScenarioSpec


def render_trial_figure(header: dict, rows: list[list], scenario: ScenarioSpec,
                        path: str | Path) -> Path:
    """Top-down trajectory plot: obstacles, agent path colored by mode, target path."""
    idx = {name: i for i, name in enumerate(LOG_FIELDS)}
    fig, ax = plt.subplots(figsize=(7, 7))
    x0, y0, x1, y1 = scenario.world.arena
    ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False, lw=1.5, color="k"))
    for ob in scenario.world.obstacles:
        if ob.is_circle:
            cx, cy, r = ob.shape
            ax.add_patch(Circle((cx, cy), r, color="0.6"))
        else:
            ox0, oy0, ox1, oy1 = ob.shape
            ax.add_patch(Rectangle((ox0, oy0), ox1 - ox0, oy1 - oy0, color="0.6"))

    ticks = [r[idx["t"]] for r in rows]
    ax_x = [r[idx["ax"]] for r in rows]
    ax_y = [r[idx["ay"]] for r in rows]
    search = [r[idx["mode"]] == "SEARCH" for r in rows]
    ax.plot([r[idx["tx"]] for r in rows], [r[idx["ty"]] for r in rows],
            color="tab:green", lw=1.2, label="target")
    ax.plot([r[idx["ix"]] for r in rows], [r[idx["iy"]] for r in rows],
            color="tab:purple", lw=0.8, alpha=0.6, label="interferer")
    ax.plot(ax_x, ax_y, color="tab:blue", lw=1.2, label="agent")
    sx = [x for x, s in zip(ax_x, search) if s]
    sy = [y for y, s in zip(ax_y, search) if s]
    if sx:
        ax.scatter(sx, sy, s=4, color="tab:red", label="search")
    ax.scatter([ax_x[0]], [ax_y[0]], marker="s", color="tab:blue", zorder=5)
    ax.set_title(f"{header.get('variant', '?')} seed={header.get('seed', '?')} "
                 f"({ticks[-1] + 1} ticks)")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def render_suite_figure(summary: MetricsSummary, path: str | Path) -> Path:
    """Bar chart per metric across variants, mirroring the results table."""
    names = [v.variant for v in summary.variants]
    panels = [
        ("Avg. speed (m/s)", [v.mean_speed for v in summary.variants]),
        ("Avg. following distance (m)", [v.mean_follow_distance for v in summary.variants]),
        ("Avg. distance to obstacles (m)", [v.mean_obstacle_distance for v in summary.variants]),
        ("# losing target", [v.lost_count for v in summary.variants]),
        ("# following wrong person", [v.wrong_count for v in summary.variants]),
    ]
    fig, axes = plt.subplots(1, 5, figsize=(22, 4.2))
    for axp, (title, values) in zip(axes, panels):
        colors = ["tab:orange" if n == "ours" else "tab:blue" for n in names]
        axp.bar(range(len(names)), values, color=colors)
        axp.set_xticks(range(len(names)))
        axp.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
        axp.set_title(title, fontsize=9)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
