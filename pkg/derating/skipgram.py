"""Skip-gram training with negative sampling over a walk corpus."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import expit, log_expit

from .const import (
    CSV_FLOAT_FORMAT,
    MIN_LEARNING_RATE_FRACTION,
    NOISE_EXPONENT,
    SKIPGRAM_BATCH_PAIRS,
)
from .exceptions import EmbeddingError, EmptyCorpusError
from .graph import CircuitGraph
from .walks import WalkParams, build_transition_tables, sample_walks

_LOGGER = logging.getLogger(__name__)

PAIR_CHUNK = 65536


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """One learned feature vector per graph node, rows in node order."""

    node_labels: tuple[str, ...]
    vectors: np.ndarray
    context_vectors: np.ndarray = field(repr=False)
    loss_history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        """Check row count and finiteness."""
        if self.vectors.shape[0] != len(self.node_labels):
            raise EmbeddingError(
                f"{self.vectors.shape[0]} vectors for {len(self.node_labels)} nodes"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise EmbeddingError("Embedding contains non-finite values")

    @property
    def dimensions(self) -> int:
        """Feature dimension d."""
        return self.vectors.shape[1]


def skipgram_pairs(corpus: Sequence[Sequence[int]], window: int) -> np.ndarray:
    """All (center, context) pairs within window, as an (n, 2) array."""
    corpus = [walk for walk in corpus if len(walk) > 1]
    if not corpus:
        return np.zeros((0, 2), dtype=np.int64)

    width = max(len(walk) for walk in corpus)
    padded = np.full((len(corpus), width), -1, dtype=np.int64)
    for row, walk in enumerate(corpus):
        padded[row, : len(walk)] = walk

    pairs = []
    for offset in range(1, min(window, width - 1) + 1):
        left, right = padded[:, :-offset], padded[:, offset:]
        mask = (left >= 0) & (right >= 0)
        forward = np.stack([left[mask], right[mask]], axis=1)
        pairs += [forward, forward[:, ::-1]]
    return np.concatenate(pairs)


def negative_sampling_loss(
    centers: np.ndarray,
    contexts: np.ndarray,
    negatives: np.ndarray,
    mask: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Loss and gradients of the negative-sampling objective.

    Shapes are (B, d) for centers and contexts and (B, k, d) for negatives;
    single triples may drop the batch axis. The loss per pair is
    ``-log s(c.f) - sum_j m_j log s(-n_j.f)`` with s the logistic function.
    Returns (loss, d_center, d_context, d_negatives).
    """
    single = centers.ndim == 1
    if single:
        centers, contexts, negatives = centers[None], contexts[None], negatives[None]
    if mask is None:
        mask = np.ones(negatives.shape[:2])

    positive = np.einsum("bd,bd->b", centers, contexts)
    negative = np.einsum("bkd,bd->bk", negatives, centers)

    loss = -log_expit(positive) - np.sum(mask * log_expit(-negative), axis=1)
    positive_grad = -expit(-positive)
    negative_grad = mask * expit(negative)

    d_center = positive_grad[:, None] * contexts + np.einsum(
        "bk,bkd->bd", negative_grad, negatives
    )
    d_context = positive_grad[:, None] * centers
    d_negatives = negative_grad[:, :, None] * centers[:, None, :]

    if single:
        return loss[0], d_center[0], d_context[0], d_negatives[0]
    return loss, d_center, d_context, d_negatives


def train_skipgram(
    corpus: Sequence[Sequence[int]],
    num_nodes: int,
    params: WalkParams,
    node_labels: Sequence[str] | None = None,
) -> EmbeddingMatrix:
    """Learn node vectors by mini-batch SGD on the skip-gram objective.

    Noise distribution is node frequency in the corpus to the 3/4 power;
    a negative equal to the pair's context is masked out. The step size
    decays linearly to 1e-4 of its initial value.
    """
    pairs = skipgram_pairs(corpus, params.window)
    if not len(pairs):
        raise EmptyCorpusError("Walk corpus has no (center, context) pair")
    if pairs.max() >= num_nodes:
        raise EmbeddingError(f"Corpus references node {pairs.max()} of {num_nodes}")

    d, k = params.d, params.negatives
    rng = np.random.default_rng(params.seed)
    vectors = rng.uniform(-0.5 / d, 0.5 / d, size=(num_nodes, d))
    context_vectors = np.zeros((num_nodes, d))

    counts = np.bincount(np.concatenate([np.asarray(w) for w in corpus]), minlength=num_nodes)
    noise = counts.astype(float) ** NOISE_EXPONENT
    noise /= noise.sum()

    total = params.epochs * len(pairs)
    step = 0
    history = []
    for epoch in range(params.epochs):
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        for chunk_start in range(0, len(order), PAIR_CHUNK):
            chunk = pairs[order[chunk_start : chunk_start + PAIR_CHUNK]]
            drawn = rng.choice(num_nodes, size=(len(chunk), k), p=noise)
            for start in range(0, len(chunk), SKIPGRAM_BATCH_PAIRS):
                batch = chunk[start : start + SKIPGRAM_BATCH_PAIRS]
                negatives = drawn[start : start + SKIPGRAM_BATCH_PAIRS]
                centers, contexts = batch[:, 0], batch[:, 1]
                mask = (negatives != contexts[:, None]).astype(float)

                loss, d_center, d_context, d_negatives = negative_sampling_loss(
                    vectors[centers], context_vectors[contexts], context_vectors[negatives], mask
                )
                rate = params.learning_rate * (
                    1.0 - (1.0 - MIN_LEARNING_RATE_FRACTION) * step / total
                )
                np.add.at(vectors, centers, -rate * d_center)
                np.add.at(context_vectors, contexts, -rate * d_context)
                np.add.at(context_vectors, negatives.ravel(), -rate * d_negatives.reshape(-1, d))

                epoch_loss += float(loss.sum())
                step += len(batch)

        mean_loss = epoch_loss / len(pairs)
        if not np.isfinite(mean_loss):
            raise EmbeddingError(f"Skip-gram loss became non-finite in epoch {epoch + 1}")
        history.append(mean_loss)
        _LOGGER.debug("Skip-gram epoch %d/%d loss %.6f", epoch + 1, params.epochs, mean_loss)

    labels = tuple(node_labels) if node_labels is not None else tuple(map(str, range(num_nodes)))
    return EmbeddingMatrix(
        node_labels=labels,
        vectors=vectors,
        context_vectors=context_vectors,
        loss_history=tuple(history),
    )


def embed(g: CircuitGraph, params: WalkParams, jobs: int = 1) -> EmbeddingMatrix:
    """Embed every node of g into params.d dimensions."""
    tables = build_transition_tables(g, params)
    corpus = sample_walks(g, tables, params, jobs=jobs)
    matrix = train_skipgram(corpus, len(g), params, [node.label for node in g.nodes])
    _LOGGER.info(
        "Embedded %d nodes into %d dimensions, final loss %.4f",
        len(g),
        params.d,
        matrix.loss_history[-1],
    )
    return matrix


def write_embeddings_csv(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write ``label,f0,...,f{d-1}`` rows in node order."""
    frame = pd.DataFrame(
        matrix.vectors, columns=[f"f{i}" for i in range(matrix.dimensions)]
    )
    frame.insert(0, "label", list(matrix.node_labels))
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def read_embeddings_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read labels and the feature matrix from an embeddings CSV."""
    try:
        frame = pd.read_csv(path, dtype={"label": str}, keep_default_na=False)
        if "label" not in frame.columns:
            raise EmbeddingError(f"{path} has no label column")
        features = [column for column in frame.columns if column != "label"]
        return frame["label"].tolist(), frame[features].to_numpy(dtype=float)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as exception:
        raise EmbeddingError(f"Cannot read embeddings from {path}: {exception}") from exception


def save_embedding_cache(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Binary cache of labels, vectors and training loss."""
    with open(path, "wb") as handle:
        np.savez(
            handle,
            node_labels=np.asarray(matrix.node_labels, dtype=str),
            vectors=matrix.vectors,
            context_vectors=matrix.context_vectors,
            loss_history=np.asarray(matrix.loss_history),
        )


def load_embedding_cache(path: str | Path) -> EmbeddingMatrix:
    """Read a cache written by save_embedding_cache."""
    with np.load(path) as data:
        return EmbeddingMatrix(
            node_labels=tuple(str(label) for label in data["node_labels"]),
            vectors=data["vectors"],
            context_vectors=data["context_vectors"],
            loss_history=tuple(float(v) for v in data["loss_history"]),
        )
