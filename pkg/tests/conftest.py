"""Global fixtures for derating."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from derating.const import CellKind
from derating.graph import CircuitGraph, GraphEdge, GraphNode
from derating.library import CellLibrary, load_cell_library
from derating.netlist import Netlist, load_netlist, parse_netlist

BENCHMARKS = Path(__file__).parent.parent / "benchmarks"


def make_graph(edges: list[tuple[int, int]], num_nodes: int, weights=None) -> CircuitGraph:
    """Graph of COMB nodes labelled n0, n1, ..."""
    weights = weights or {}
    return CircuitGraph(
        nodes=tuple(GraphNode(i, f"n{i}", CellKind.COMB) for i in range(num_nodes)),
        edges=tuple(GraphEdge(s, t, weights.get((s, t), 1.0)) for s, t in edges),
    )


@pytest.fixture(name="library", scope="session")
def library_fixture() -> CellLibrary:
    """The bundled cell library."""
    return load_cell_library(BENCHMARKS / "cells.lib")


@pytest.fixture(name="toy_counter")
def toy_counter_fixture(library: CellLibrary) -> Netlist:
    """Two-bit enabled counter."""
    return load_netlist(BENCHMARKS / "toy_counter.v", library)


@pytest.fixture(name="shift_register")
def shift_register_fixture(library: CellLibrary) -> Netlist:
    """Three-stage shift register with one unobservable flip-flop."""
    return load_netlist(BENCHMARKS / "shift_register.v", library)


@pytest.fixture(name="toggle")
def toggle_fixture(library: CellLibrary) -> Netlist:
    """One flip-flop whose data input is its inverted output."""
    text = """
    module toggle (clk, q);
      input clk;
      output q;
      INV g_inv (.A(q), .Y(nq));
      DFF ff (.D(nq), .CLK(clk), .Q(q));
    endmodule
    """
    return parse_netlist(text, library)


@pytest.fixture(name="four_node")
def four_node_fixture() -> CircuitGraph:
    """Undirected walk fixture t-v, t-x1, v-x1, v-x2 as ids 0, 1, 2, 3."""
    return make_graph([(0, 1), (0, 2), (1, 2), (1, 3)], 4)


@pytest.fixture(name="rng")
def rng_fixture() -> np.random.Generator:
    """Seeded generator for test data."""
    return np.random.default_rng(1234)
