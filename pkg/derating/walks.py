"""Second-order biased random walks over the circuit graph."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
import voluptuous as vol

from .const import (
    DEFAULT_DIMENSIONS,
    DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_NEGATIVES,
    DEFAULT_WALK_LENGTH,
    DEFAULT_WALKS_PER_NODE,
    DEFAULT_WINDOW,
    Traversal,
)
from .exceptions import InvalidParameterError, NotAnEdgeError
from .graph import CircuitGraph

_LOGGER = logging.getLogger(__name__)

_POSITIVE = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))

WALK_PARAMS_SCHEMA = vol.Schema(
    {
        vol.Required("p"): _POSITIVE,
        vol.Required("q"): _POSITIVE,
        vol.Required("l"): vol.All(int, vol.Range(min=2)),
        vol.Required("r"): vol.All(int, vol.Range(min=1)),
        vol.Required("window"): vol.All(int, vol.Range(min=1)),
        vol.Required("d"): vol.All(int, vol.Range(min=1)),
        vol.Required("negatives"): vol.All(int, vol.Range(min=1)),
        vol.Required("epochs"): vol.All(int, vol.Range(min=1)),
        vol.Required("learning_rate"): _POSITIVE,
        vol.Required("seed"): vol.All(int, vol.Range(min=0, max=2**64 - 1)),
        vol.Required("traversal"): vol.Coerce(Traversal),
    }
)


@dataclass(frozen=True)
class WalkParams:
    """Random walk and skip-gram hyperparameters."""

    p: float = 1.0
    q: float = 1.0
    l: int = DEFAULT_WALK_LENGTH  # noqa: E741
    r: int = DEFAULT_WALKS_PER_NODE
    window: int = DEFAULT_WINDOW
    d: int = DEFAULT_DIMENSIONS
    negatives: int = DEFAULT_NEGATIVES
    epochs: int = DEFAULT_EPOCHS
    learning_rate: float = DEFAULT_LEARNING_RATE
    seed: int = 0
    traversal: Traversal = Traversal.UNDIRECTED

    def __post_init__(self) -> None:
        """Validate bounds and coerce field types."""
        try:
            validated = WALK_PARAMS_SCHEMA(asdict(self))
        except vol.Invalid as exception:
            raise InvalidParameterError(f"Invalid walk parameter: {exception}") from exception
        for key, value in validated.items():
            object.__setattr__(self, key, value)


@dataclass(frozen=True)
class AliasTable:
    """Constant-time sampler over a finite support.

    Column ``i`` keeps ``support[i]`` with probability ``prob[i]`` and
    otherwise yields ``support[alias[i]]``.
    """

    support: np.ndarray
    prob: np.ndarray
    alias: np.ndarray

    def __len__(self) -> int:
        return len(self.support)

    def probabilities(self) -> np.ndarray:
        """Distribution over support implied by the table."""
        k = len(self.support)
        implied = self.prob.astype(float).copy()
        np.add.at(implied, self.alias, 1.0 - self.prob)
        return implied / k if k else implied

    def draw(self, u1: float, u2: float) -> int:
        """Map two uniforms in [0, 1) to a support element."""
        k = len(self.support)
        column = min(int(u1 * k), k - 1)
        if u2 < self.prob[column]:
            return int(self.support[column])
        return int(self.support[self.alias[column]])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw size elements at once."""
        k = len(self.support)
        columns = np.minimum((rng.random(size) * k).astype(np.int64), k - 1)
        keep = rng.random(size) < self.prob[columns]
        return np.where(keep, self.support[columns], self.support[self.alias[columns]])


EMPTY_TABLE = AliasTable(
    support=np.zeros(0, dtype=np.int64),
    prob=np.zeros(0),
    alias=np.zeros(0, dtype=np.int64),
)


def build_alias_table(support: Sequence[int], weights: Sequence[float]) -> AliasTable:
    """Build an alias table for weights (unnormalized, positive)."""
    weights = np.asarray(weights, dtype=float)
    k = len(weights)
    if k == 0:
        return EMPTY_TABLE

    scaled = weights / weights.sum() * k
    prob = np.zeros(k)
    alias = np.arange(k, dtype=np.int64)
    small = [i for i in range(k) if scaled[i] < 1.0]
    large = [i for i in range(k) if scaled[i] >= 1.0]

    while small and large:
        less, more = small.pop(), large.pop()
        prob[less] = scaled[less]
        alias[less] = more
        scaled[more] = (scaled[more] + scaled[less]) - 1.0
        if scaled[more] < 1.0:
            small.append(more)
        else:
            large.append(more)

    # leftovers are 1 up to rounding
    for index in large + small:
        prob[index] = 1.0

    return AliasTable(support=np.asarray(support, dtype=np.int64), prob=prob, alias=alias)


@dataclass(frozen=True)
class TransitionTables:
    """First-step tables per node and second-order tables per traversed edge."""

    traversal: Traversal
    node_tables: tuple[AliasTable, ...]
    edge_tables: Mapping[tuple[int, int], AliasTable] = field(repr=False)


def shortest_hop(g: CircuitGraph, t: int, x: int, traversal: Traversal) -> int:
    """Hop distance from t to x, clamped to 2."""
    g.check_node(t)
    g.check_node(x)
    if t == x:
        return 0
    if x in g.neighbors(t, traversal):
        return 1
    return 2


def _search_bias(hop: int, p: float, q: float) -> float:
    if hop == 0:
        return 1.0 / p
    if hop == 1:
        return 1.0
    return 1.0 / q


def _unnormalized(
    g: CircuitGraph, t: int, v: int, params: WalkParams, t_neighbors: set[int]
) -> tuple[tuple[int, ...], list[float]]:
    candidates = g.neighbors(v, params.traversal)
    weights = []
    for x in candidates:
        hop = 0 if x == t else 1 if x in t_neighbors else 2
        weights.append(
            _search_bias(hop, params.p, params.q) * g.weight(v, x, params.traversal)
        )
    return candidates, weights


def transition_probability(
    g: CircuitGraph, t: int, v: int, x: int, params: WalkParams
) -> float:
    """Probability of stepping v -> x after arriving at v from t."""
    for node in (t, v, x):
        g.check_node(node)
    if g.weight(t, v, params.traversal) is None:
        raise NotAnEdgeError(f"{t}->{v} is not an edge")
    if g.weight(v, x, params.traversal) is None:
        raise NotAnEdgeError(f"{v}->{x} is not an edge")

    candidates, weights = _unnormalized(
        g, t, v, params, set(g.neighbors(t, params.traversal))
    )
    return weights[candidates.index(x)] / sum(weights)


def build_transition_tables(g: CircuitGraph, params: WalkParams) -> TransitionTables:
    """Precompute alias tables for every first step and every traversed edge."""
    traversal = params.traversal
    node_tables = []
    for v in range(len(g)):
        neighbors = g.neighbors(v, traversal)
        if not neighbors:
            _LOGGER.warning("Node %s (%s) is isolated, walks stop there", v, g.nodes[v].label)
            node_tables.append(EMPTY_TABLE)
            continue
        node_tables.append(
            build_alias_table(neighbors, [g.weight(v, x, traversal) for x in neighbors])
        )

    edge_tables: dict[tuple[int, int], AliasTable] = {}
    for t in range(len(g)):
        t_neighbors = set(g.neighbors(t, traversal))
        for v in g.neighbors(t, traversal):
            candidates, weights = _unnormalized(g, t, v, params, t_neighbors)
            edge_tables[(t, v)] = build_alias_table(candidates, weights)

    _LOGGER.debug(
        "Built %d node tables and %d edge tables (p=%s, q=%s, %s)",
        len(node_tables),
        len(edge_tables),
        params.p,
        params.q,
        traversal,
    )
    return TransitionTables(
        traversal=traversal, node_tables=tuple(node_tables), edge_tables=edge_tables
    )


def _walk(tables: TransitionTables, params: WalkParams, start: int, index: int) -> list[int]:
    rng = np.random.default_rng([params.seed, start, index])
    uniforms = rng.random((params.l - 1, 2))
    walk = [start]
    table = tables.node_tables[start]
    for u1, u2 in uniforms:
        if not len(table):
            break
        walk.append(table.draw(u1, u2))
        table = tables.edge_tables[(walk[-2], walk[-1])]
    return walk


def _walks_for_nodes(
    tables: TransitionTables, params: WalkParams, nodes: Sequence[int]
) -> list[list[list[int]]]:
    return [[_walk(tables, params, node, index) for index in range(params.r)] for node in nodes]


def sample_walks(
    g: CircuitGraph, tables: TransitionTables, params: WalkParams, jobs: int = 1
) -> list[list[int]]:
    """Sample r walks per node; the corpus is ordered by (walk index, node).

    Every walk has its own generator seeded from (seed, node, walk index), so
    the corpus does not depend on jobs.
    """
    nodes = list(range(len(g)))
    if jobs > 1 and len(nodes) > 1:
        chunks = [nodes[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(partial(_walks_for_nodes, tables, params), chunks))
        per_node: dict[int, list[list[int]]] = {}
        for chunk, walks in zip(chunks, results):
            per_node.update(zip(chunk, walks))
    else:
        per_node = dict(zip(nodes, _walks_for_nodes(tables, params, nodes)))

    corpus = [per_node[node][index] for index in range(params.r) for node in nodes]
    _LOGGER.debug("Sampled %d walks, %d steps", len(corpus), sum(len(w) for w in corpus))
    return corpus


def write_walks(corpus: Sequence[Sequence[int]], path: str | Path) -> None:
    """Dump the corpus, one walk of whitespace separated ids per line."""
    Path(path).write_text(
        "".join(" ".join(str(node) for node in walk) + "\n" for walk in corpus),
        encoding="ascii",
    )


def read_walks(path: str | Path) -> list[list[int]]:
    """Read a corpus written by write_walks."""
    return [
        [int(token) for token in line.split()]
        for line in Path(path).read_text(encoding="ascii").splitlines()
        if line.strip()
    ]
