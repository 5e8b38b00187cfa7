"""Matplotlib figure builders for the card report.

All figures are rendered headless to SVG, either inlined into the HTML
report or saved as standalone files next to the delimited outputs. The SVG
hash salt and stripped date metadata keep renders stable across runs.
"""

from __future__ import annotations

import io
import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGSIZE = (5.4, 3.4)
BASE_COLOR = "#2563eb"
SCENARIO_COLOR = "#dc2626"
SHADE_COLOR = "#94a3b8"
VERSION_COLORS = ("#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed")

plt.rcParams.update(
    {
        "svg.hashsalt": "iarc-kit",
        "font.size": 9,
        "axes.titlesize": 10,
        "axes.labelsize": 9,
        "legend.fontsize": 8,
        "figure.autolayout": True,
    }
)


def fig_to_svg(fig) -> str:
    """Render a figure to an inline-embeddable SVG string."""
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    svg = buf.getvalue()
    return svg[svg.index("<svg"):]


def save_svg(fig_builder, path: str, *args, **kwargs) -> None:
    fig = fig_builder(*args, **kwargs)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def kde_overlay_figure(overlay: dict):
    """Training vs scenario density for one feature, ODD range shaded."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    grid = np.asarray(overlay["grid"], dtype=float)
    ax.plot(grid, overlay["base_density"], color=BASE_COLOR, label="training")
    ax.plot(
        grid,
        overlay["scenario_density"],
        color=SCENARIO_COLOR,
        linestyle="--",
        label=overlay.get("scenario", "scenario"),
    )
    odd_range = overlay.get("odd_range")
    if odd_range:
        ax.axvspan(odd_range[0], odd_range[1], color=SHADE_COLOR, alpha=0.25,
                   label="ODD range")
    ax.set_xlabel(overlay.get("feature", "value"))
    ax.set_ylabel("density")
    ax.set_title(f"Density overlay: {overlay.get('feature', '')}")
    ax.legend(loc="best")
    return fig


def radar_figure(radar: dict):
    """Per-scenario retention polygon for every model version."""
    scenarios = list(radar["scenarios"])
    versions = list(radar["versions"])
    matrix = np.asarray(radar["matrix"], dtype=float)  # scenarios x versions
    n = len(scenarios)
    angles = [2.0 * math.pi * i / n for i in range(n)]
    closed_angles = angles + angles[:1]

    fig, ax = plt.subplots(figsize=(5.2, 5.2), subplot_kw={"projection": "polar"})
    ax.set_theta_offset(math.pi / 2)
    ax.set_theta_direction(-1)
    for k, version in enumerate(versions):
        values = list(matrix[:, k]) + [matrix[0, k]] if n else []
        color = VERSION_COLORS[k % len(VERSION_COLORS)]
        ax.plot(closed_angles, values, color=color, linewidth=1.4, label=version)
        ax.fill(closed_angles, values, color=color, alpha=0.12)
    ax.set_xticks(angles)
    ax.set_xticklabels(scenarios, fontsize=7)
    ax.set_ylim(0.0, 1.05)
    ax.set_title("Scenario retention by model version", pad=16)
    ax.legend(loc="lower right", bbox_to_anchor=(1.12, -0.08))
    return fig


def severity_curves_figure(curves: list[dict], retention_curves: dict | None = None):
    """Metric value against fault severity, one line per scenario family."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    metric = curves[0]["metric"] if curves else "metric"
    for k, curve in enumerate(curves):
        points = curve["points"]
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        color = VERSION_COLORS[k % len(VERSION_COLORS)]
        label = curve["family"]
        if curve.get("model_version"):
            label = f"{curve['family']} ({curve['model_version']})"
        ax.plot(xs, ys, marker="o", markersize=3.5, color=color, label=label)
    ax.set_xlabel("fault severity")
    ax.set_ylabel(metric)
    ax.set_title("Severity vs performance")
    ax.legend(loc="best", fontsize=7)
    return fig


def coverage_bars_figure(coverage_by_pair: dict[str, float]):
    """Empirical vs nominal interval coverage for a regression slice."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    labels = list(coverage_by_pair)
    empirical = [coverage_by_pair[k]["empirical"] for k in labels]
    nominal = [coverage_by_pair[k]["nominal"] for k in labels]
    xs = np.arange(len(labels))
    ax.bar(xs, empirical, width=0.5, color=BASE_COLOR, label="empirical")
    for x, nom in zip(xs, nominal):
        ax.hlines(nom, x - 0.33, x + 0.33, color=SCENARIO_COLOR,
                  linestyle="--", linewidth=1.4)
    ax.hlines([], [], [], color=SCENARIO_COLOR, linestyle="--", label="nominal")
    ax.set_xticks(xs)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("coverage")
    ax.set_title("Interval coverage vs nominal level")
    ax.legend(loc="lower right")
    return fig


def reliability_figure(bins: list[dict]):
    """Reliability diagram from precomputed confidence bins."""
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    ax.plot([0, 1], [0, 1], color=SHADE_COLOR, linestyle=":", label="ideal")
    xs = [b["mean_confidence"] for b in bins if b["count"]]
    ys = [b["accuracy"] for b in bins if b["count"]]
    ax.plot(xs, ys, marker="o", color=BASE_COLOR, label="observed")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("mean confidence")
    ax.set_ylabel("accuracy")
    ax.set_title("Reliability diagram")
    ax.legend(loc="best")
    return fig
