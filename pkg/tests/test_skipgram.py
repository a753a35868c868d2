"""Tests for skip-gram training and embedding files."""

from __future__ import annotations

import numpy as np
import pytest

from derating.exceptions import EmbeddingError, EmptyCorpusError
from derating.graph import CircuitGraph, netlist_to_graph
from derating.netlist import Netlist
from derating.skipgram import (
    EmbeddingMatrix,
    embed,
    load_embedding_cache,
    negative_sampling_loss,
    read_embeddings_csv,
    save_embedding_cache,
    skipgram_pairs,
    train_skipgram,
    write_embeddings_csv,
)
from derating.walks import WalkParams

from .conftest import make_graph


def _barbell(size: int = 6) -> CircuitGraph:
    """Two cliques joined by one bridge edge."""
    edges = []
    for base in (0, size):
        edges += [(base + i, base + j) for i in range(size) for j in range(i + 1, size)]
    edges.append((size - 1, size))
    return make_graph(edges, 2 * size)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def test_skipgram_pairs() -> None:
    """Pairs within the window, both directions."""
    pairs = skipgram_pairs([[0, 1, 2]], window=1)
    assert sorted(map(tuple, pairs.tolist())) == [(0, 1), (1, 0), (1, 2), (2, 1)]
    pairs = skipgram_pairs([[0, 1, 2], [3]], window=5)
    assert len(pairs) == 6
    assert skipgram_pairs([[4], [5]], window=3).shape == (0, 2)


def _central_difference(loss, arrays: list[np.ndarray], which: int) -> np.ndarray:
    h = 1e-6
    target = arrays[which]
    gradient = np.zeros_like(target)
    for index in np.ndindex(target.shape):
        saved = target[index]
        target[index] = saved + h
        plus = loss(*arrays)
        target[index] = saved - h
        minus = loss(*arrays)
        target[index] = saved
        gradient[index] = (plus - minus) / (2 * h)
    return gradient


def test_loss_gradients_match_finite_differences(rng: np.random.Generator) -> None:
    """Analytic gradients agree with central differences at 10 random points."""
    d, k = 6, 4
    for _ in range(10):
        arrays = [rng.normal(size=d), rng.normal(size=d), rng.normal(size=(k, d))]
        mask = (rng.random(k) < 0.7).astype(float)
        mask[0] = 1.0

        def loss(c, o, n, mask=mask):
            return negative_sampling_loss(c, o, n, mask)[0]

        _, *analytic = negative_sampling_loss(*arrays, mask)
        for which, gradient in enumerate(analytic):
            numeric = _central_difference(loss, arrays, which)
            np.testing.assert_allclose(gradient, numeric, rtol=1e-4, atol=1e-8)
        assert np.all(analytic[2][mask == 0.0] == 0.0)


def test_loss_batched_matches_single(rng: np.random.Generator) -> None:
    """Batch rows equal the single-triple results."""
    centers = rng.normal(size=(3, 4))
    contexts = rng.normal(size=(3, 4))
    negatives = rng.normal(size=(3, 2, 4))
    loss, d_center, _, _ = negative_sampling_loss(centers, contexts, negatives)
    for b in range(3):
        single = negative_sampling_loss(centers[b], contexts[b], negatives[b])
        assert loss[b] == pytest.approx(single[0])
        np.testing.assert_allclose(d_center[b], single[1])


def test_empty_corpus() -> None:
    """Walks of one node give nothing to train on."""
    with pytest.raises(EmptyCorpusError):
        train_skipgram([[0], [1]], 2, WalkParams())


def test_corpus_out_of_range() -> None:
    """Node ids must be below num_nodes."""
    with pytest.raises(EmbeddingError):
        train_skipgram([[0, 5]], 2, WalkParams())


def test_embed_shape_and_determinism(toy_counter: Netlist) -> None:
    """One finite row per node, identical across runs."""
    graph = netlist_to_graph(toy_counter)
    params = WalkParams(d=8, l=20, r=5, window=3, epochs=2, seed=9)
    first = embed(graph, params)
    second = embed(graph, params)
    assert first.vectors.shape == (9, 8)
    assert first.node_labels == tuple(node.label for node in graph.nodes)
    assert np.all(np.isfinite(first.vectors))
    np.testing.assert_array_equal(first.vectors, second.vectors)
    assert len(first.loss_history) == 2

    other = embed(graph, WalkParams(d=8, l=20, r=5, window=3, epochs=2, seed=10))
    assert not np.array_equal(first.vectors, other.vectors)


def test_training_reduces_loss() -> None:
    """Later epochs fit the corpus better than the first."""
    graph = _barbell()
    matrix = embed(graph, WalkParams(d=8, l=20, r=10, window=3, epochs=5, seed=1))
    assert matrix.loss_history[-1] < matrix.loss_history[0]


def test_barbell_communities() -> None:
    """Nodes in the same clique end up closer than nodes across the bridge."""
    size = 6
    graph = _barbell(size)
    matrix = embed(graph, WalkParams(d=8, l=40, r=20, window=4, epochs=5, seed=3))
    vectors = matrix.vectors
    inside, across = [], []
    for i in range(2 * size):
        for j in range(i + 1, 2 * size):
            same = (i < size) == (j < size)
            (inside if same else across).append(_cosine(vectors[i], vectors[j]))
    assert np.mean(inside) > np.mean(across)


def test_embeddings_csv(tmp_path, toy_counter: Netlist) -> None:
    """CSV keeps labels and nine significant digits."""
    graph = netlist_to_graph(toy_counter)
    matrix = embed(graph, WalkParams(d=4, l=10, r=2, window=2, epochs=1))
    path = tmp_path / "embeddings.csv"
    write_embeddings_csv(matrix, path)
    assert path.read_text().splitlines()[0] == "label,f0,f1,f2,f3"
    labels, features = read_embeddings_csv(path)
    assert labels == list(matrix.node_labels)
    np.testing.assert_allclose(features, matrix.vectors, rtol=1e-8)


def test_embedding_cache(tmp_path, toy_counter: Netlist) -> None:
    """Binary cache restores vectors exactly."""
    graph = netlist_to_graph(toy_counter)
    matrix = embed(graph, WalkParams(d=4, l=10, r=2, window=2, epochs=1))
    save_embedding_cache(matrix, tmp_path / "embeddings.npz")
    restored = load_embedding_cache(tmp_path / "embeddings.npz")
    assert restored.node_labels == matrix.node_labels
    np.testing.assert_array_equal(restored.vectors, matrix.vectors)
    assert restored.loss_history == matrix.loss_history


def test_matrix_rejects_non_finite() -> None:
    """Non-finite vectors are an embedding error."""
    with pytest.raises(EmbeddingError):
        EmbeddingMatrix(("a",), np.array([[np.nan]]), np.zeros((1, 1)))


@pytest.mark.parametrize(
    "text",
    [
        "",
        "label,f0,f1\na,0.1,0.2\nb,0.3,0.4,0.5,0.6\n",
        "label,f0\na,wide\n",
        "name,f0\na,0.1\n",
    ],
)
def test_embeddings_csv_malformed(tmp_path, text: str) -> None:
    """Unreadable embedding files are embedding errors."""
    path = tmp_path / "embeddings.csv"
    path.write_text(text)
    with pytest.raises(EmbeddingError):
        read_embeddings_csv(path)
