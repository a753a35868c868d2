"""Fully connected regression network trained with Adam on MSE."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import voluptuous as vol
from scipy.special import expit

from .const import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_DIMENSIONS,
    DEFAULT_LAYER_SIZES,
    DEFAULT_MLP_EPOCHS,
    Activation,
)
from .exceptions import (
    DimensionMismatchError,
    InvalidParameterError,
    ModelFormatError,
    NonFiniteLossError,
    RegressionError,
)
from .utils import load_model_archive, save_model_archive

_LOGGER = logging.getLogger(__name__)

MODEL_TYPE = "mlp"

_POSITIVE = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))
_FRACTION = vol.All(vol.Coerce(float), vol.Range(min=0, max=1, max_included=False))


def _ends_in_one(sizes: tuple[int, ...]) -> tuple[int, ...]:
    if not sizes or sizes[-1] != 1:
        raise vol.Invalid("final layer must have size 1")
    return sizes


MLP_PARAMS_SCHEMA = vol.Schema(
    {
        vol.Required("input_dim"): vol.All(int, vol.Range(min=1)),
        vol.Required("layer_sizes"): vol.All(
            vol.Coerce(list), [vol.All(int, vol.Range(min=1))], vol.Coerce(tuple), _ends_in_one
        ),
        vol.Required("hidden_activation"): vol.Coerce(Activation),
        vol.Required("output_activation"): vol.Coerce(Activation),
        vol.Required("learning_rate"): _POSITIVE,
        vol.Required("beta1"): _FRACTION,
        vol.Required("beta2"): _FRACTION,
        vol.Required("adam_epsilon"): _POSITIVE,
        vol.Required("batch_size"): vol.All(int, vol.Range(min=1)),
        vol.Required("epochs"): vol.All(int, vol.Range(min=1)),
        vol.Required("seed"): vol.All(int, vol.Range(min=0, max=2**64 - 1)),
    }
)


@dataclass(frozen=True)
class MlpParams:
    """Network shape and Adam settings."""

    input_dim: int = DEFAULT_DIMENSIONS
    layer_sizes: tuple[int, ...] = DEFAULT_LAYER_SIZES
    hidden_activation: Activation = Activation.RELU
    output_activation: Activation = Activation.LINEAR
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch_size: int = DEFAULT_BATCH_SIZE
    epochs: int = DEFAULT_MLP_EPOCHS
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate bounds and coerce field types."""
        values = asdict(self)
        values["layer_sizes"] = list(self.layer_sizes)
        try:
            validated = MLP_PARAMS_SCHEMA(values)
        except vol.Invalid as exception:
            raise InvalidParameterError(f"Invalid MLP parameter: {exception}") from exception
        for key, value in validated.items():
            object.__setattr__(self, key, value)


@dataclass(frozen=True)
class LayerInfo:
    """One dense layer in the parameter table."""

    name: str
    output_size: int
    parameters: int


def count_parameters(params: MlpParams) -> list[LayerInfo]:
    """Output size and weight plus bias count of every dense layer."""
    fan_ins = (params.input_dim, *params.layer_sizes[:-1])
    return [
        LayerInfo(name=f"dense_{index}", output_size=size, parameters=size * (fan_in + 1))
        for index, (fan_in, size) in enumerate(zip(fan_ins, params.layer_sizes), start=1)
    ]


@dataclass(frozen=True, eq=False)
class MlpModel:
    """Weight matrices (fan_in x fan_out) and bias vectors per layer."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    hidden_activation: Activation = Activation.RELU
    output_activation: Activation = Activation.LINEAR
    history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        """Check that shapes chain and parameters are finite."""
        if len(self.weights) != len(self.biases) or not self.weights:
            raise RegressionError("Every layer needs a weight matrix and a bias vector")
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            if weight.ndim != 2 or bias.shape != (weight.shape[1],):
                raise RegressionError(f"Layer {index} has shapes {weight.shape}, {bias.shape}")
            if index and weight.shape[0] != self.weights[index - 1].shape[1]:
                raise RegressionError(f"Layer {index} does not chain to layer {index - 1}")
            if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
                raise NonFiniteLossError(f"Layer {index} holds non-finite parameters")
        if self.weights[-1].shape[1] != 1:
            raise RegressionError("The output layer must have size 1")

    @property
    def input_dim(self) -> int:
        """Expected input width."""
        return self.weights[0].shape[0]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        """Output size of every layer."""
        return tuple(weight.shape[1] for weight in self.weights)


def init_mlp(params: MlpParams) -> MlpModel:
    """Glorot uniform weights and zero biases from a seeded generator."""
    rng = np.random.default_rng(params.seed)
    weights, biases = [], []
    fan_in = params.input_dim
    for fan_out in params.layer_sizes:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
        fan_in = fan_out
    return MlpModel(
        weights=tuple(weights),
        biases=tuple(biases),
        hidden_activation=params.hidden_activation,
        output_activation=params.output_activation,
    )


def _activate(kind: Activation, z: np.ndarray) -> np.ndarray:
    match kind:
        case Activation.RELU:
            return np.maximum(z, 0.0)
        case Activation.TANH:
            return np.tanh(z)
        case Activation.SIGMOID:
            return expit(z)
    return z


def _activation_grad(kind: Activation, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation given pre-activation z and output a."""
    match kind:
        case Activation.RELU:
            return (z > 0).astype(float)
        case Activation.TANH:
            return 1.0 - a * a
        case Activation.SIGMOID:
            return a * (1.0 - a)
    return np.ones_like(z)


def _check_input(model: MlpModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DimensionMismatchError(
            f"Expected {model.input_dim} input columns, got shape {X.shape}"
        )
    return X


def _forward(model: MlpModel, X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Pre-activations and activations of every layer; activations[0] is X."""
    activations, pre_activations = [X], []
    last = len(model.weights) - 1
    for index, (weight, bias) in enumerate(zip(model.weights, model.biases)):
        z = activations[-1] @ weight + bias
        kind = model.output_activation if index == last else model.hidden_activation
        pre_activations.append(z)
        activations.append(_activate(kind, z))
    return pre_activations, activations


def predict_mlp(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Forward pass; one prediction per row."""
    _, activations = _forward(model, _check_input(model, X))
    return activations[-1][:, 0]


def loss_and_gradients(
    model: MlpModel, X: np.ndarray, y: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """MSE on (X, y) and its gradient for every weight and bias."""
    X = _check_input(model, X)
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    pre_activations, activations = _forward(model, X)
    residual = activations[-1] - y
    loss = float(np.mean(residual**2))

    last = len(model.weights) - 1
    grad_weights: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    grad_biases: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    delta = 2.0 * residual / len(y)
    for index in range(last, -1, -1):
        kind = model.output_activation if index == last else model.hidden_activation
        delta = delta * _activation_grad(kind, pre_activations[index], activations[index + 1])
        grad_weights[index] = activations[index].T @ delta
        grad_biases[index] = delta.sum(axis=0)
        delta = delta @ model.weights[index].T
    return loss, grad_weights, grad_biases


class AdamOptimizer:
    """Adam updates applied in place to a list of parameter arrays.

    Usage example:
    ```
    optimizer = AdamOptimizer(parameters, learning_rate=0.001)
    optimizer.step(gradients)
    ```
    """

    def __init__(
        self,
        parameters: Sequence[np.ndarray],
        learning_rate: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> None:
        """Initialize moment estimates at zero."""
        self.parameters = list(parameters)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.steps = 0
        self._first = [np.zeros_like(parameter) for parameter in self.parameters]
        self._second = [np.zeros_like(parameter) for parameter in self.parameters]

    def step(self, gradients: Sequence[np.ndarray]) -> None:
        """Apply one bias-corrected Adam update."""
        self.steps += 1
        first_correction = 1.0 - self.beta1**self.steps
        second_correction = 1.0 - self.beta2**self.steps
        for parameter, gradient, first, second in zip(
            self.parameters, gradients, self._first, self._second
        ):
            first *= self.beta1
            first += (1.0 - self.beta1) * gradient
            second *= self.beta2
            second += (1.0 - self.beta2) * gradient * gradient
            parameter -= (
                self.learning_rate
                * (first / first_correction)
                / (np.sqrt(second / second_correction) + self.epsilon)
            )


def fit_mlp(X: np.ndarray, y: np.ndarray, params: MlpParams | None = None) -> MlpModel:
    """Train with mini-batch Adam, reshuffling from a seeded generator each epoch."""
    params = params or MlpParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise DimensionMismatchError(
            f"Expected {params.input_dim} input columns, got shape {X.shape}"
        )
    if X.shape[0] != len(y) or not len(y):
        raise DimensionMismatchError(f"{X.shape[0]} rows for {len(y)} targets")

    model = init_mlp(params)
    optimizer = AdamOptimizer(
        [*model.weights, *model.biases],
        learning_rate=params.learning_rate,
        beta1=params.beta1,
        beta2=params.beta2,
        epsilon=params.adam_epsilon,
    )
    _LOGGER.debug(
        "Training MLP %s on %d samples, %d parameters",
        (params.input_dim, *params.layer_sizes),
        len(y),
        sum(layer.parameters for layer in count_parameters(params)),
    )

    rng = np.random.default_rng(params.seed)
    history = []
    for epoch in range(params.epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), params.batch_size):
            batch = order[start : start + params.batch_size]
            loss, grad_weights, grad_biases = loss_and_gradients(model, X[batch], y[batch])
            if not np.isfinite(loss):
                raise NonFiniteLossError(f"Loss became {loss} in epoch {epoch + 1}")
            optimizer.step([*grad_weights, *grad_biases])

        residual = predict_mlp(model, X) - y
        epoch_loss = float(np.mean(residual**2))
        if not np.isfinite(epoch_loss):
            raise NonFiniteLossError(f"Training loss became {epoch_loss} after epoch {epoch + 1}")
        history.append(epoch_loss)

    _LOGGER.info(
        "Trained MLP for %d epochs: training MSE %.6g -> %.6g",
        params.epochs,
        history[0],
        history[-1],
    )
    return replace(model, history=tuple(history))


def save_mlp(model: MlpModel, path: str | Path, params: MlpParams | None = None) -> None:
    """Write the model archive and its JSON summary."""
    arrays = {
        "layer_sizes": np.asarray(model.layer_sizes),
        "hidden_activation": np.asarray(str(model.hidden_activation)),
        "output_activation": np.asarray(str(model.output_activation)),
        "history": np.asarray(model.history),
    }
    for index, (weight, bias) in enumerate(zip(model.weights, model.biases)):
        arrays[f"weight_{index}"] = weight
        arrays[f"bias_{index}"] = bias

    summary = {
        "hyperparameters": {
            **asdict(params),
            "layer_sizes": list(params.layer_sizes),
            "hidden_activation": str(params.hidden_activation),
            "output_activation": str(params.output_activation),
        }
        if params
        else None,
        "input_dim": model.input_dim,
        "layers": [
            {
                "name": f"dense_{index}",
                "shape": list(weight.shape),
                "parameters": int(weight.size + bias.size),
            }
            for index, (weight, bias) in enumerate(zip(model.weights, model.biases), start=1)
        ],
        "final_training_mse": model.history[-1] if model.history else None,
    }
    save_model_archive(path, MODEL_TYPE, arrays, summary)


def load_mlp(path: str | Path) -> MlpModel:
    """Read a model written by save_mlp."""
    arrays = load_model_archive(path, MODEL_TYPE)
    try:
        layers = len(arrays["layer_sizes"])
        return MlpModel(
            weights=tuple(arrays[f"weight_{index}"] for index in range(layers)),
            biases=tuple(arrays[f"bias_{index}"] for index in range(layers)),
            hidden_activation=Activation(str(arrays["hidden_activation"])),
            output_activation=Activation(str(arrays["output_activation"])),
            history=tuple(float(value) for value in arrays["history"]),
        )
    except (KeyError, ValueError) as exception:
        raise ModelFormatError(f"{path} is not a valid MLP model: {exception}") from exception
