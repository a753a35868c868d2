"""Tests for the dense network, backpropagation and Adam."""

from __future__ import annotations

import json

import numpy as np
import pytest

from derating.const import Activation
from derating.exceptions import (
    DimensionMismatchError,
    InvalidParameterError,
    ModelFormatError,
    NonFiniteLossError,
    RegressionError,
)
from derating.mlp import (
    AdamOptimizer,
    MlpModel,
    MlpParams,
    count_parameters,
    fit_mlp,
    init_mlp,
    load_mlp,
    loss_and_gradients,
    predict_mlp,
    save_mlp,
)

SMALL = MlpParams(input_dim=3, layer_sizes=(8, 4, 1), epochs=20, batch_size=5, seed=2)


def _tiny(activation: Activation, rng: np.random.Generator) -> MlpModel:
    """Random 2-2-1 network."""
    return MlpModel(
        weights=(rng.normal(size=(2, 2)), rng.normal(size=(2, 1))),
        biases=(rng.normal(size=2), rng.normal(size=1)),
        hidden_activation=activation,
    )


def _numeric_gradient(model: MlpModel, X: np.ndarray, y: np.ndarray, array: np.ndarray):
    h = 1e-6
    gradient = np.zeros_like(array)
    for index in np.ndindex(array.shape):
        saved = array[index]
        array[index] = saved + h
        plus = loss_and_gradients(model, X, y)[0]
        array[index] = saved - h
        minus = loss_and_gradients(model, X, y)[0]
        array[index] = saved
        gradient[index] = (plus - minus) / (2 * h)
    return gradient


def test_parameter_counts() -> None:
    """Per-layer counts for both input widths."""
    counts = [layer.parameters for layer in count_parameters(MlpParams(input_dim=8))]
    assert counts == [1134, 8128, 2340, 444, 13]
    wide = count_parameters(MlpParams(input_dim=200))
    assert wide[0].parameters == 25326
    assert [layer.name for layer in wide] == [f"dense_{i}" for i in range(1, 6)]
    assert [layer.output_size for layer in wide] == [126, 64, 36, 12, 1]


def test_init_matches_counts() -> None:
    """Initialized arrays hold exactly the counted parameters."""
    params = MlpParams(input_dim=8)
    model = init_mlp(params)
    sizes = [w.size + b.size for w, b in zip(model.weights, model.biases)]
    assert sizes == [layer.parameters for layer in count_parameters(params)]
    assert all(np.all(b == 0) for b in model.biases)
    bound = np.sqrt(6.0 / (8 + 126))
    assert np.abs(model.weights[0]).max() <= bound


@pytest.mark.parametrize("activation", [Activation.TANH, Activation.SIGMOID, Activation.RELU])
def test_gradients_match_finite_differences(activation: Activation) -> None:
    """Backpropagation agrees with central differences at 20 random points."""
    rng = np.random.default_rng(11)
    for _ in range(20):
        model = _tiny(activation, rng)
        X = rng.normal(size=(4, 2))
        y = rng.normal(size=4)
        if activation is Activation.RELU:
            hidden = X @ model.weights[0] + model.biases[0]
            if np.abs(hidden).min() < 1e-3:
                continue
        _, grad_weights, grad_biases = loss_and_gradients(model, X, y)
        for analytic, array in zip(
            [*grad_weights, *grad_biases], [*model.weights, *model.biases]
        ):
            numeric = _numeric_gradient(model, X, y, array)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7)


def test_hand_computed_forward() -> None:
    """A 2-2-1 ReLU network evaluated by hand."""
    model = MlpModel(
        weights=(np.array([[0.5, -1.0], [0.25, 2.0]]), np.array([[1.5], [-0.5]])),
        biases=(np.array([0.1, -0.2]), np.array([0.05])),
    )
    # hidden = relu([0.5*1 + 0.25*2 + 0.1, -1*1 + 2*2 - 0.2]) = [1.1, 2.8]
    # output = 1.5*1.1 - 0.5*2.8 + 0.05 = 0.3
    assert predict_mlp(model, np.array([[1.0, 2.0]]))[0] == pytest.approx(0.3, abs=1e-12)


def test_zero_network_predicts_zero(rng: np.random.Generator) -> None:
    """All-zero parameters give zero output."""
    model = MlpModel(
        weights=(np.zeros((3, 4)), np.zeros((4, 1))), biases=(np.zeros(4), np.zeros(1))
    )
    np.testing.assert_array_equal(predict_mlp(model, rng.normal(size=(6, 3))), 0.0)


def test_duplicated_rows() -> None:
    """Identical rows give identical predictions."""
    model = init_mlp(SMALL)
    predictions = predict_mlp(model, np.tile([0.2, -0.4, 1.0], (3, 1)))
    assert predictions[0] == predictions[1] == predictions[2]


def test_learns_zero_function(rng: np.random.Generator) -> None:
    """Zero targets are fitted within 50 epochs."""
    X = rng.uniform(0.0, 0.1, size=(100, 8))
    params = MlpParams(input_dim=8, epochs=50)
    model = fit_mlp(X, np.zeros(100), params)
    assert len(model.history) == 50
    assert model.history[-1] < 1e-4


def test_training_improves(rng: np.random.Generator) -> None:
    """Final training MSE does not exceed the first epoch's."""
    X = rng.normal(size=(60, 3))
    y = X[:, 0] - 0.5 * X[:, 1] ** 2
    model = fit_mlp(X, y, SMALL)
    assert model.history[-1] <= model.history[0]
    residual = predict_mlp(model, X) - y
    assert np.mean(residual**2) == pytest.approx(model.history[-1])


def test_fit_is_deterministic(rng: np.random.Generator) -> None:
    """Same data and parameters give the same weights."""
    X = rng.normal(size=(25, 3))
    y = X.sum(axis=1)
    first, second = fit_mlp(X, y, SMALL), fit_mlp(X, y, SMALL)
    for a, b in zip(first.weights, second.weights):
        np.testing.assert_array_equal(a, b)
    assert first.history == second.history


def test_partial_last_batch(rng: np.random.Generator) -> None:
    """Fewer samples than the batch size still train."""
    model = fit_mlp(rng.normal(size=(3, 3)), np.ones(3), SMALL)
    assert len(model.history) == SMALL.epochs


def test_adam_zero_gradients_keep_parameters() -> None:
    """Zero gradients leave parameters untouched."""
    parameter = np.array([1.0, -2.0, 3.0])
    optimizer = AdamOptimizer([parameter])
    for _ in range(5):
        optimizer.step([np.zeros(3)])
    np.testing.assert_array_equal(parameter, [1.0, -2.0, 3.0])


def test_adam_first_step_size() -> None:
    """The bias-corrected first step moves each coordinate by the learning rate."""
    parameter = np.array([1.0, 1.0])
    AdamOptimizer([parameter], learning_rate=0.1).step([np.array([3.0, -0.5])])
    np.testing.assert_allclose(parameter, [0.9, 1.1], rtol=1e-6)


def test_diverging_training_raises() -> None:
    """A huge learning rate on huge targets overflows to a non-finite loss."""
    X = np.full((4, 3), 1e150)
    params = MlpParams(input_dim=3, layer_sizes=(4, 1), learning_rate=1e150, epochs=5)
    with pytest.raises(NonFiniteLossError):
        fit_mlp(X, np.full(4, 1e150), params)


def test_dimension_mismatch(rng: np.random.Generator) -> None:
    """Input width must match the network."""
    model = init_mlp(SMALL)
    with pytest.raises(DimensionMismatchError):
        predict_mlp(model, rng.normal(size=(2, 4)))
    with pytest.raises(DimensionMismatchError):
        fit_mlp(rng.normal(size=(5, 2)), np.zeros(5), SMALL)
    with pytest.raises(DimensionMismatchError):
        fit_mlp(rng.normal(size=(5, 3)), np.zeros(4), SMALL)


def test_model_invariants() -> None:
    """Shapes must chain and parameters must be finite."""
    with pytest.raises(RegressionError):
        MlpModel(weights=(np.zeros((2, 3)), np.zeros((2, 1))), biases=(np.zeros(3), np.zeros(1)))
    with pytest.raises(NonFiniteLossError):
        MlpModel(weights=(np.full((2, 1), np.inf),), biases=(np.zeros(1),))


@pytest.mark.parametrize(
    "overrides",
    [
        {"layer_sizes": (4, 2)},
        {"layer_sizes": ()},
        {"layer_sizes": (0, 1)},
        {"input_dim": 0},
        {"beta1": 1.0},
        {"learning_rate": 0.0},
        {"batch_size": 0},
        {"hidden_activation": "softplus"},
    ],
)
def test_params_bounds(overrides: dict) -> None:
    """Out-of-range hyperparameters are rejected."""
    with pytest.raises(InvalidParameterError):
        MlpParams(**overrides)


def test_save_and_load(tmp_path, rng: np.random.Generator) -> None:
    """A saved network predicts the same and lists its layers."""
    X = rng.normal(size=(20, 3))
    model = fit_mlp(X, X[:, 0], SMALL)
    path = tmp_path / "mlp.npz"
    save_mlp(model, path, SMALL)
    restored = load_mlp(path)
    np.testing.assert_array_equal(predict_mlp(restored, X), predict_mlp(model, X))
    assert restored.history == model.history

    summary = json.loads((tmp_path / "mlp.json").read_text())
    assert [layer["parameters"] for layer in summary["layers"]] == [32, 36, 5]
    assert summary["hyperparameters"]["layer_sizes"] == [8, 4, 1]


def test_load_rejects_svr_file(tmp_path) -> None:
    """An SVR archive is not an MLP."""
    path = tmp_path / "model.npz"
    np.savez(path, format_version=np.asarray(1), model_type=np.asarray("svr"))
    with pytest.raises(ModelFormatError):
        load_mlp(path)
