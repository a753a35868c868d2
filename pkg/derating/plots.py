"""SVG plots of test-set predictions."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import RegressionReport  # noqa: E402

plt.rcParams["svg.hashsalt"] = "derating"
SVG_METADATA = {"Date": None}


def _save(fig: plt.Figure, path: str | Path) -> None:
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)


def plot_scatter(
    y_true: Sequence[float], y_pred: Sequence[float], model: str, path: str | Path
) -> None:
    """Prediction against truth with the y = x reference line."""
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    low = float(min(y_true.min(), y_pred.min(), 0.0))
    high = float(max(y_true.max(), y_pred.max(), 1.0))

    fig, ax = plt.subplots(figsize=(4.8, 4.8), constrained_layout=True)
    ax.scatter(y_true, y_pred, s=12, alpha=0.7, label=model)
    ax.plot([low, high], [low, high], linestyle="--", color="black", linewidth=1, label="y = x")
    ax.set_xlim(low, high)
    ax.set_ylim(low, high)
    ax.set_xlabel("FDR (fault injection)")
    ax.set_ylabel(f"FDR ({model})")
    ax.legend(loc="upper left")
    _save(fig, path)


def plot_sorted(
    y_true: Sequence[float], y_pred: Sequence[float], model: str, path: str | Path
) -> None:
    """True and predicted values of the test set, ordered by true value."""
    order = np.argsort(np.asarray(y_true), kind="stable")
    fig, ax = plt.subplots(figsize=(6.4, 3.6), constrained_layout=True)
    ax.plot(np.asarray(y_true)[order], marker="o", markersize=3, label="fault injection")
    ax.plot(np.asarray(y_pred)[order], marker="x", markersize=3, label=model)
    ax.set_xlabel("test flip-flop (sorted)")
    ax.set_ylabel("FDR")
    ax.legend()
    _save(fig, path)


def plot_ci_comparison(reports: Sequence[RegressionReport], path: str | Path) -> None:
    """Mean and 95 % interval of true and predicted test values per model."""
    fig, ax = plt.subplots(figsize=(5.6, 3.6), constrained_layout=True)
    for index, report in enumerate(reports):
        for offset, (mean, interval, name) in enumerate(
            (
                (report.mean_true, report.ci95_true, "target"),
                (report.mean_pred, report.ci95_pred, "predicted"),
            )
        ):
            ax.errorbar(
                index + 0.15 * (2 * offset - 1),
                mean,
                yerr=[[mean - interval[0]], [interval[1] - mean]],
                fmt="o" if offset == 0 else "s",
                color=f"C{offset}",
                capsize=4,
                label=name if index == 0 else None,
            )
    ax.set_xticks(range(len(reports)), [report.model for report in reports])
    ax.set_ylabel("mean FDR")
    ax.legend()
    _save(fig, path)
