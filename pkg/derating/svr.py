"""Epsilon support vector regression with an RBF kernel, solved by SMO.

The dual is kept in the signed form beta_i = alpha_i - alpha_i*::

    maximize  -1/2 beta'K beta - eps * sum|beta_i| + sum y_i beta_i
    subject to sum beta_i = 0,  -C <= beta_i <= C

Each step moves one pair (beta_i up, beta_j down) along the feasible line and
takes the exact maximum of the piecewise quadratic objective on that line.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import voluptuous as vol
from scipy.spatial.distance import cdist

from .const import (
    DEFAULT_SVR_C,
    DEFAULT_SVR_EPSILON,
    DEFAULT_SVR_GAMMA,
    DEFAULT_SVR_KKT_TOL,
    DEFAULT_SVR_MAX_PASSES,
)
from .exceptions import DimensionMismatchError, InvalidParameterError, RegressionError
from .utils import load_model_archive, save_model_archive

_LOGGER = logging.getLogger(__name__)

MODEL_TYPE = "svr"

SVR_PARAMS_SCHEMA = vol.Schema(
    {
        vol.Required("gamma"): vol.All(vol.Coerce(float), vol.Range(min=0)),
        vol.Required("epsilon"): vol.All(vol.Coerce(float), vol.Range(min=0)),
        vol.Required("c"): vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False)),
        vol.Required("kkt_tol"): vol.All(
            vol.Coerce(float), vol.Range(min=0, min_included=False)
        ),
        vol.Required("max_passes"): vol.All(int, vol.Range(min=1)),
        vol.Required("seed"): vol.All(int, vol.Range(min=0, max=2**64 - 1)),
    }
)


@dataclass(frozen=True)
class SvrParams:
    """SVR hyperparameters; gamma 0 gives a constant kernel."""

    gamma: float = DEFAULT_SVR_GAMMA
    epsilon: float = DEFAULT_SVR_EPSILON
    c: float = DEFAULT_SVR_C
    kkt_tol: float = DEFAULT_SVR_KKT_TOL
    max_passes: int = DEFAULT_SVR_MAX_PASSES
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate bounds."""
        try:
            validated = SVR_PARAMS_SCHEMA(asdict(self))
        except vol.Invalid as exception:
            raise InvalidParameterError(f"Invalid SVR parameter: {exception}") from exception
        for key, value in validated.items():
            object.__setattr__(self, key, value)


@dataclass(frozen=True)
class FitSummary:
    """Solver diagnostics."""

    iterations: int
    converged: bool
    max_violation: float
    dual_objective: float


@dataclass(frozen=True, eq=False)
class SvrModel:
    """Support vectors with their signed dual coefficients and the bias."""

    support_vectors: np.ndarray
    dual_coefficients: np.ndarray
    bias: float
    gamma: float
    input_dim: int
    support_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    summary: FitSummary | None = None

    @property
    def n_support(self) -> int:
        """Number of support vectors."""
        return len(self.dual_coefficients)


def _check_matrix(X: np.ndarray, width: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionMismatchError(f"Expected a matrix, got shape {X.shape}")
    if width is not None and X.shape[1] != width:
        raise DimensionMismatchError(f"Expected {width} columns, got {X.shape[1]}")
    return X


def rbf_kernel(x: np.ndarray, x2: np.ndarray, gamma: float) -> float:
    """exp(-gamma * ||x - x2||^2)."""
    x, x2 = np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise DimensionMismatchError(f"Kernel arguments differ in shape: {x.shape} vs {x2.shape}")
    return float(np.exp(-gamma * np.sum((x - x2) ** 2)))


def rbf_kernel_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel values between every row of A and every row of B."""
    A, B = _check_matrix(A), _check_matrix(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(f"{A.shape[1]} vs {B.shape[1]} columns")
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


def dual_objective(kernel: np.ndarray, y: np.ndarray, beta: np.ndarray, epsilon: float) -> float:
    """Value of the dual at beta."""
    return float(-0.5 * beta @ kernel @ beta - epsilon * np.abs(beta).sum() + y @ beta)


def _directional_slopes(
    errors: np.ndarray, beta: np.ndarray, epsilon: float
) -> tuple[np.ndarray, np.ndarray]:
    """Slopes of the dual for raising (up) and lowering (down) each beta_i."""
    up = np.where(beta >= 0, errors - epsilon, errors + epsilon)
    down = np.where(beta <= 0, errors + epsilon, errors - epsilon)
    return up, down


def kkt_violations(
    kernel: np.ndarray, y: np.ndarray, beta: np.ndarray, bias: float, params: SvrParams
) -> np.ndarray:
    """Per-point KKT violation of (beta, bias)."""
    up, down = _directional_slopes(y - kernel @ beta, beta, params.epsilon)
    can_rise = beta < params.c
    can_fall = beta > -params.c
    violation = np.zeros(len(y))
    violation = np.where(can_rise, np.maximum(violation, up - bias), violation)
    return np.where(can_fall, np.maximum(violation, bias - down), violation)


def _pair_step(
    beta_i: float,
    beta_j: float,
    slope: float,
    curvature: float,
    epsilon: float,
    c: float,
) -> float:
    """Best t in [0, T] for beta_i + t, beta_j - t."""
    limit = min(c - beta_i, beta_j + c)
    if limit <= 0:
        return 0.0

    def gain(t: float) -> float:
        return (
            t * slope
            - 0.5 * curvature * t * t
            - epsilon * (abs(beta_i + t) + abs(beta_j - t) - abs(beta_i) - abs(beta_j))
        )

    knots = sorted({0.0, limit, *(k for k in (-beta_i, beta_j) if 0 < k < limit)})
    candidates = list(knots)
    if curvature > 0:
        for low, high in zip(knots, knots[1:]):
            middle = 0.5 * (low + high)
            sign_i = 1.0 if beta_i + middle > 0 else -1.0
            sign_j = 1.0 if beta_j - middle > 0 else -1.0
            stationary = (slope - epsilon * sign_i + epsilon * sign_j) / curvature
            candidates.append(min(max(stationary, low), high))
    return max(candidates, key=gain)


def fit_svr(X: np.ndarray, y: np.ndarray, params: SvrParams | None = None) -> SvrModel:
    """Fit an epsilon-SVR with an RBF kernel."""
    params = params or SvrParams()
    X = _check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    n = len(y)
    if X.shape[0] != n:
        raise DimensionMismatchError(f"{X.shape[0]} rows for {n} targets")
    if n < 2:
        raise RegressionError("SVR needs at least two samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise RegressionError("SVR data must be finite")

    if np.all(y == y[0]):
        _LOGGER.warning("All %d targets equal %s, fitting a constant model", n, y[0])
        return SvrModel(
            support_vectors=np.zeros((0, X.shape[1])),
            dual_coefficients=np.zeros(0),
            bias=float(y[0]),
            gamma=params.gamma,
            input_dim=X.shape[1],
            summary=FitSummary(0, True, 0.0, 0.0),
        )

    kernel = rbf_kernel_matrix(X, X, params.gamma)
    diagonal = np.diag(kernel).copy()
    beta = np.zeros(n)
    errors = y.copy()
    order = np.random.default_rng(params.seed).permutation(n)
    c, epsilon = params.c, params.epsilon

    iterations, converged = 0, False
    limit = params.max_passes * n
    while iterations < limit:
        up, down = _directional_slopes(errors, beta, epsilon)
        up_candidates = np.where(beta[order] < c, up[order], -np.inf)
        down_candidates = np.where(beta[order] > -c, down[order], np.inf)
        i = int(order[np.argmax(up_candidates)])
        j = int(order[np.argmin(down_candidates)])
        gap = up[i] - down[j]
        if gap < params.kkt_tol:
            converged = True
            break

        curvature = max(diagonal[i] + diagonal[j] - 2.0 * kernel[i, j], 0.0)
        step = _pair_step(beta[i], beta[j], errors[i] - errors[j], curvature, epsilon, c)
        if step <= 0:
            _LOGGER.debug("SMO stalled on pair (%d, %d) with gap %.3g", i, j, gap)
            break

        new_i = c if step == c - beta[i] else beta[i] + step
        new_j = -c if step == beta[j] + c else beta[j] - step
        errors -= (new_i - beta[i]) * kernel[:, i] + (new_j - beta[j]) * kernel[:, j]
        beta[i], beta[j] = new_i, new_j
        iterations += 1

    up, down = _directional_slopes(errors, beta, epsilon)
    top = np.max(up[beta < c])
    bottom = np.min(down[beta > -c])
    bias = 0.5 * (top + bottom)
    max_violation = float(np.max(kkt_violations(kernel, y, beta, bias, params)))
    summary = FitSummary(
        iterations=iterations,
        converged=converged,
        max_violation=max_violation,
        dual_objective=dual_objective(kernel, y, beta, epsilon),
    )
    if not converged:
        _LOGGER.warning(
            "SMO stopped after %d iterations with KKT violation %.3g", iterations, max_violation
        )

    support = np.flatnonzero(beta != 0)
    _LOGGER.info(
        "Fitted SVR on %d samples: %d support vectors, %d iterations",
        n,
        len(support),
        iterations,
    )
    return SvrModel(
        support_vectors=X[support].copy(),
        dual_coefficients=beta[support].copy(),
        bias=float(bias),
        gamma=params.gamma,
        input_dim=X.shape[1],
        support_indices=support,
        summary=summary,
    )


def predict_svr(model: SvrModel, X: np.ndarray) -> np.ndarray:
    """sum_k coef_k * K(sv_k, x) + bias for every row x."""
    X = _check_matrix(X, model.input_dim)
    if model.n_support == 0:
        return np.full(X.shape[0], model.bias)
    kernel = rbf_kernel_matrix(X, model.support_vectors, model.gamma)
    return kernel @ model.dual_coefficients + model.bias


def save_svr(model: SvrModel, path: str | Path, params: SvrParams | None = None) -> None:
    """Write the model archive and its JSON summary."""
    summary = {
        "hyperparameters": asdict(params) if params else {"gamma": model.gamma},
        "input_dim": model.input_dim,
        "n_support": model.n_support,
        "bias": model.bias,
        "fit": asdict(model.summary) if model.summary else None,
    }
    save_model_archive(
        path,
        MODEL_TYPE,
        {
            "support_vectors": model.support_vectors,
            "dual_coefficients": model.dual_coefficients,
            "support_indices": model.support_indices,
            "bias": np.asarray(model.bias),
            "gamma": np.asarray(model.gamma),
            "input_dim": np.asarray(model.input_dim),
        },
        summary,
    )


def load_svr(path: str | Path) -> SvrModel:
    """Read a model written by save_svr."""
    arrays = load_model_archive(path, MODEL_TYPE)
    return SvrModel(
        support_vectors=arrays["support_vectors"],
        dual_coefficients=arrays["dual_coefficients"],
        bias=float(arrays["bias"]),
        gamma=float(arrays["gamma"]),
        input_dim=int(arrays["input_dim"]),
        support_indices=arrays["support_indices"],
    )
