"""Figure rendering for the report paths.

All figures are written as SVG with a fixed hash salt and no embedded
date so repeated runs produce byte-identical files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["fan_chart", "forecast_fan", "crossing_by_penalty"]

matplotlib.rcParams["svg.hashsalt"] = "dynqr"

_SAVE_KW = {"metadata": {"Date": None}, "bbox_inches": "tight"}


def _nearest_levels(levels, wanted):
    idx = sorted({int(np.argmin(np.abs(levels - w))) for w in wanted})
    return idx


def fan_chart(y, paths, levels, path, shown=(0.05, 0.5, 0.95), title="In-sample fit"):
    """Observed series overlaid with selected fitted quantile paths."""
    levels = np.asarray(levels, dtype=float)
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    t = np.arange(len(y))
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(t, y, color="0.3", lw=0.8, label="observed")
    for i in _nearest_levels(levels, shown):
        ax.plot(t, paths[:, i], lw=1.2, label=f"q{levels[i]:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("y")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def forecast_fan(realized, forecasts, levels, path, shown=(0.05, 0.5, 0.95)):
    """One-step-ahead forecast quantiles against the realized series."""
    fan_chart(realized, forecasts, levels, path, shown=shown,
              title="One-step-ahead forecasts")


def crossing_by_penalty(crossing_rows, path):
    """Mean crossing incidence against the penalty weight, one line per
    (process, design, T, init) cell."""
    cells = {}
    for row in crossing_rows:
        key = (row["process"], row["design"], row["T"], row["init"])
        cells.setdefault(key, []).append(
            (row["penalty_weight"], row["crossing_pct"]))
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    for key, points in sorted(cells.items()):
        points = sorted(points)
        ax.plot([p[0] for p in points], [p[1] for p in points],
                marker="o", label="{}/{} T={} init={}".format(*key))
    ax.set_xlabel("crossing penalty weight")
    ax.set_ylabel("crossing incidence (%)")
    ax.set_title("Crossing incidence by penalty")
    ax.legend(loc="best", fontsize=7)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
