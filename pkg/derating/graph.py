"""Circuit graph built from a netlist, with GML serialization."""

from __future__ import annotations

import html
import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import networkx as nx

from .const import CellKind, Traversal
from .exceptions import (
    DanglingEdgeError,
    GmlSyntaxError,
    GraphError,
    NonPositiveWeightError,
    UnknownNodeError,
)
from .netlist import Netlist
from .utils import format_float

_LOGGER = logging.getLogger(__name__)

NODE_ATTRIBUTES = ("label", "kind")
EDGE_ATTRIBUTES = ("weight",)


@dataclass(frozen=True)
class GraphNode:
    """A circuit element: instance or port."""

    id: int
    label: str
    kind: CellKind


@dataclass(frozen=True)
class GraphEdge:
    """A driver to load connection."""

    source: int
    target: int
    weight: float = 1.0


@dataclass(frozen=True)
class CircuitGraph:
    """Directed weighted graph of circuit elements.

    Nodes are stored by id; edges are kept sorted by (source, target).
    """

    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]

    def __post_init__(self) -> None:
        """Check the graph invariants and canonicalize edge order."""
        for index, node in enumerate(self.nodes):
            if node.id != index:
                raise GraphError(f"Node ids must be 0..{len(self.nodes) - 1}, got {node.id}")
        labels = [node.label for node in self.nodes]
        if len(labels) != len(set(labels)):
            raise GraphError("Node labels must be unique")

        seen = set()
        for edge in self.edges:
            for endpoint in (edge.source, edge.target):
                if not 0 <= endpoint < len(self.nodes):
                    raise DanglingEdgeError(
                        f"Edge {edge.source}->{edge.target} references missing node {endpoint}"
                    )
            if not (edge.weight > 0 and math.isfinite(edge.weight)):
                raise NonPositiveWeightError(
                    f"Edge {edge.source}->{edge.target} has weight {edge.weight}"
                )
            key = (edge.source, edge.target)
            if key in seen:
                raise GraphError(f"Duplicate edge {edge.source}->{edge.target}")
            seen.add(key)

        object.__setattr__(
            self, "edges", tuple(sorted(self.edges, key=lambda e: (e.source, e.target)))
        )

    def __len__(self) -> int:
        return len(self.nodes)

    @cached_property
    def label_index(self) -> Mapping[str, int]:
        """Node id by label."""
        return {node.label: node.id for node in self.nodes}

    @cached_property
    def successors(self) -> tuple[tuple[int, ...], ...]:
        """Outgoing neighbor ids per node, ascending."""
        out: list[list[int]] = [[] for _ in self.nodes]
        for edge in self.edges:
            out[edge.source].append(edge.target)
        return tuple(tuple(ids) for ids in out)

    @cached_property
    def predecessors(self) -> tuple[tuple[int, ...], ...]:
        """Incoming neighbor ids per node, ascending."""
        incoming: list[list[int]] = [[] for _ in self.nodes]
        for edge in self.edges:
            incoming[edge.target].append(edge.source)
        return tuple(tuple(sorted(ids)) for ids in incoming)

    @cached_property
    def _weights(self) -> Mapping[tuple[int, int], float]:
        return {(edge.source, edge.target): edge.weight for edge in self.edges}

    @cached_property
    def _undirected(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(sorted(set(self.successors[v]) | set(self.predecessors[v])))
            for v in range(len(self.nodes))
        )

    def check_node(self, node: int) -> None:
        """Raise UnknownNodeError if node is not in the graph."""
        if not (isinstance(node, int) and 0 <= node < len(self.nodes)):
            raise UnknownNodeError(f"Node {node} is not in the graph")

    def neighbors(self, node: int, traversal: Traversal) -> tuple[int, ...]:
        """Neighbors reachable in one step, ascending."""
        if traversal is Traversal.DIRECTED:
            return self.successors[node]
        return self._undirected[node]

    def weight(self, source: int, target: int, traversal: Traversal) -> float | None:
        """Weight of the step source -> target, or None if there is no such edge.

        Undirected traversal uses the larger weight when both directions exist.
        """
        forward = self._weights.get((source, target))
        if traversal is Traversal.DIRECTED:
            return forward
        backward = self._weights.get((target, source))
        if forward is None:
            return backward
        if backward is None:
            return forward
        return max(forward, backward)

    def to_networkx(self) -> nx.DiGraph:
        """Copy into a networkx DiGraph keyed by node id."""
        graph = nx.DiGraph()
        for node in self.nodes:
            graph.add_node(node.id, label=node.label, kind=str(node.kind))
        for edge in self.edges:
            graph.add_edge(edge.source, edge.target, weight=edge.weight)
        return graph


def netlist_to_graph(n: Netlist) -> CircuitGraph:
    """Map a validated netlist onto its circuit graph.

    Node order is primary inputs, instances by name, then primary outputs.
    Parallel driver/load connections collapse into one edge of weight 1.
    """
    labels: list[tuple[str, CellKind]] = [(net, CellKind.INPUT) for net in n.primary_inputs]
    labels += [(instance.name, n.cell(instance).kind) for instance in n.instances]
    labels += [(net, CellKind.OUTPUT) for net in n.primary_outputs]

    nodes = tuple(
        GraphNode(id=index, label=label, kind=kind) for index, (label, kind) in enumerate(labels)
    )
    input_ids = {net: index for index, net in enumerate(n.primary_inputs)}
    instance_ids = {
        instance.name: len(n.primary_inputs) + index
        for index, instance in enumerate(n.instances)
    }
    output_base = len(n.primary_inputs) + len(n.instances)

    pairs: set[tuple[int, int]] = set()
    for net in n.nets:
        sources = [
            input_ids[driver] if pin is None else instance_ids[driver]
            for driver, pin in n.drivers.get(net, [])
        ]
        sinks = [instance_ids[load] for load, _ in n.loads.get(net, [])]
        if net in n.primary_outputs:
            sinks.append(output_base + n.primary_outputs.index(net))
        pairs.update((source, sink) for source in sources for sink in sinks)

    graph = CircuitGraph(
        nodes=nodes,
        edges=tuple(GraphEdge(source, target) for source, target in pairs),
    )
    _LOGGER.debug(
        "Graph for %s: %d nodes, %d edges", n.name, len(graph.nodes), len(graph.edges)
    )
    return graph


def _quote(text: str) -> str:
    escaped = html.escape(text, quote=True)
    return '"' + escaped.encode("ascii", "xmlcharrefreplace").decode("ascii") + '"'


def write_gml(g: CircuitGraph) -> str:
    """Serialize to GML text; identical graphs give identical bytes."""
    lines = ["graph [", "  directed 1"]
    for node in g.nodes:
        lines += [
            "  node [",
            f"    id {node.id}",
            f"    label {_quote(node.label)}",
            f"    kind {_quote(str(node.kind))}",
            "  ]",
        ]
    for edge in g.edges:
        lines += [
            "  edge [",
            f"    source {edge.source}",
            f"    target {edge.target}",
            f"    weight {format_float(edge.weight)}",
            "  ]",
        ]
    lines.append("]")
    return "\n".join(lines) + "\n"


def read_gml(text: str) -> CircuitGraph:
    """Parse GML text written by write_gml (or compatible)."""
    try:
        parsed = nx.parse_gml(text, label="id")
    except nx.NetworkXError as exception:
        message = str(exception)
        if "undefined source" in message or "undefined target" in message:
            raise DanglingEdgeError(message) from exception
        raise GmlSyntaxError(message) from exception

    if not parsed.is_directed():
        _LOGGER.warning("GML graph is not marked directed, reading edges as directed")

    nodes = []
    for node_id in sorted(parsed.nodes, key=_node_sort_key):
        data = parsed.nodes[node_id]
        if not isinstance(node_id, int):
            raise GmlSyntaxError(f"Node id {node_id!r} is not an integer")
        unknown = sorted(set(data) - set(NODE_ATTRIBUTES))
        if unknown:
            _LOGGER.warning("Ignoring node attributes %s on node %s", unknown, node_id)
        try:
            kind = CellKind(str(data["kind"]).upper())
            label = data["label"]
        except KeyError as exception:
            raise GmlSyntaxError(f"Node {node_id} has no {exception.args[0]}") from exception
        except ValueError as exception:
            raise GmlSyntaxError(f"Node {node_id} has unknown kind {data['kind']}") from exception
        nodes.append(GraphNode(id=node_id, label=str(label), kind=kind))

    if [node.id for node in nodes] != list(range(len(nodes))):
        raise GmlSyntaxError("Node ids must be 0..N-1 without gaps")

    edges = []
    for source, target, data in parsed.edges(data=True):
        unknown = sorted(set(data) - set(EDGE_ATTRIBUTES))
        if unknown:
            _LOGGER.warning("Ignoring edge attributes %s on %s->%s", unknown, source, target)
        weight = data.get("weight", 1.0)
        if isinstance(weight, bool) or not isinstance(weight, int | float):
            raise GmlSyntaxError(f"Edge {source}->{target} has non-numeric weight")
        if not weight > 0:
            raise NonPositiveWeightError(f"Edge {source}->{target} has weight {weight}")
        edges.append(GraphEdge(source=source, target=target, weight=float(weight)))

    return CircuitGraph(nodes=tuple(nodes), edges=tuple(edges))


def _node_sort_key(node_id) -> tuple[int, str]:
    return (0, f"{node_id:020d}") if isinstance(node_id, int) else (1, str(node_id))


def save_gml(g: CircuitGraph, path: str | Path) -> None:
    """Write g to a .gml file."""
    Path(path).write_text(write_gml(g), encoding="ascii")


def load_gml(path: str | Path) -> CircuitGraph:
    """Read a .gml file."""
    return read_gml(Path(path).read_text(encoding="ascii"))
