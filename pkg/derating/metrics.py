"""Regression metrics, confidence intervals, dataset split and the report."""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .const import CI95_Z, CSV_FLOAT_FORMAT
from .exceptions import (
    EmptyInputError,
    InvalidParameterError,
    LengthMismatchError,
    TooFewSamplesError,
    ZeroVarianceError,
)


def _pair(y: Sequence[float], y_hat: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if len(y) != len(y_hat):
        raise LengthMismatchError(f"{len(y)} targets vs {len(y_hat)} predictions")
    if not len(y):
        raise EmptyInputError("Metrics need at least one sample")
    return y, y_hat


def _variance(y: np.ndarray) -> float:
    if len(y) < 2:
        raise TooFewSamplesError("Need at least two samples")
    variance = float(np.var(y))
    if variance == 0:
        raise ZeroVarianceError("Targets are constant")
    return variance


def mse(y: Sequence[float], y_hat: Sequence[float]) -> float:
    """Mean squared error."""
    y, y_hat = _pair(y, y_hat)
    return float(np.mean((y - y_hat) ** 2))


def r2(y: Sequence[float], y_hat: Sequence[float]) -> float:
    """Coefficient of determination."""
    y, y_hat = _pair(y, y_hat)
    _variance(y)
    return float(1.0 - np.sum((y - y_hat) ** 2) / np.sum((y - y.mean()) ** 2))


def evs(y: Sequence[float], y_hat: Sequence[float]) -> float:
    """Explained variance score with population variances."""
    y, y_hat = _pair(y, y_hat)
    return float(1.0 - np.var(y - y_hat) / _variance(y))


def mean_ci95(values: Sequence[float]) -> tuple[float, float, float]:
    """Mean and normal-approximation 95 % interval (mean, lo, hi)."""
    values = np.asarray(values, dtype=float).ravel()
    if len(values) < 2:
        raise TooFewSamplesError("A confidence interval needs at least two values")
    mean = float(values.mean())
    half_width = CI95_Z * float(values.std(ddof=1)) / math.sqrt(len(values))
    return mean, mean - half_width, mean + half_width


def split_dataset(
    n: int, train_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle into train and test indices.

    The train size is train_fraction * n rounded half up.
    """
    if not 0 < train_fraction < 1:
        raise InvalidParameterError(f"train_fraction {train_fraction} is not in (0, 1)")
    if n < 2:
        raise TooFewSamplesError(f"Cannot split {n} samples")
    order = np.random.default_rng(seed).permutation(n)
    size = min(max(math.floor(train_fraction * n + 0.5), 1), n - 1)
    return np.sort(order[:size]), np.sort(order[size:])


@dataclass(frozen=True)
class SplitManifest:
    """Which flip-flops went where."""

    seed: int
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]
    train_labels: tuple[str, ...] = ()
    test_labels: tuple[str, ...] = ()
    excluded_labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class RegressionReport:
    """Test-set evaluation of one model."""

    model: str
    n_test: int
    mse: float
    r2: float
    evs: float
    mean_true: float
    mean_pred: float
    ci95_true: tuple[float, float]
    ci95_pred: tuple[float, float]
    manifest: SplitManifest = field(repr=False)

    def as_row(self) -> dict[str, float | int | str]:
        """Flat CSV row without the manifest."""
        return {
            "model": self.model,
            "n_test": self.n_test,
            "mse": self.mse,
            "r2": self.r2,
            "evs": self.evs,
            "mean_true": self.mean_true,
            "mean_pred": self.mean_pred,
            "ci95_true_lo": self.ci95_true[0],
            "ci95_true_hi": self.ci95_true[1],
            "ci95_pred_lo": self.ci95_pred[0],
            "ci95_pred_hi": self.ci95_pred[1],
        }


def evaluate(
    model: str,
    y_true: Sequence[float],
    y_pred: Sequence[float],
    manifest: SplitManifest,
) -> RegressionReport:
    """Build the report of one model from its test predictions."""
    y_true, y_pred = _pair(y_true, y_pred)
    mean_true, *ci_true = mean_ci95(y_true)
    mean_pred, *ci_pred = mean_ci95(y_pred)
    return RegressionReport(
        model=model,
        n_test=len(y_true),
        mse=mse(y_true, y_pred),
        r2=r2(y_true, y_pred),
        evs=evs(y_true, y_pred),
        mean_true=mean_true,
        mean_pred=mean_pred,
        ci95_true=tuple(ci_true),
        ci95_pred=tuple(ci_pred),
        manifest=manifest,
    )


def write_reports_json(reports: Sequence[RegressionReport], path: str | Path) -> None:
    """All reports plus the shared split manifest as one JSON document."""
    document = {
        "manifest": asdict(reports[0].manifest) if reports else None,
        "models": [report.as_row() for report in reports],
    }
    Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def write_reports_csv(reports: Sequence[RegressionReport], path: str | Path) -> None:
    """One CSV row per report."""
    pd.DataFrame([report.as_row() for report in reports]).to_csv(
        path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
    )


def write_predictions_csv(
    labels: Sequence[str],
    y_true: Sequence[float],
    y_pred: Sequence[float],
    path: str | Path,
) -> None:
    """Per-sample (label, true, predicted) rows for external plotting."""
    pd.DataFrame({"ff_name": list(labels), "fdr_true": y_true, "fdr_pred": y_pred}).to_csv(
        path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
    )
