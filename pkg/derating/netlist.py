"""Structural gate-level netlist parser and in-memory circuit representation.

Accepted input is a flattened single module with named port connections::

    module toggle (clk, y);
      input clk;
      output y;
      wire d;
      INV u0 (.A(y), .Y(d));
      DFF ff0 (.D(d), .CLK(clk), .Q(y));
    endmodule

Nets may be declared implicitly by use. Behavioral constructs, buses and
hierarchy are not supported.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import networkx as nx

from .const import CellKind, DiagnosticCode, Severity
from .exceptions import (
    CombinationalLoopError,
    DuplicateNameError,
    MultipleDriversError,
    NetlistError,
    NetlistSyntaxError,
    UnconnectedPinError,
    UnknownCellTypeError,
)
from .library import CellLibrary, CellType

_LOGGER = logging.getLogger(__name__)

KEYWORDS = ("module", "endmodule", "input", "output", "wire")

_TOKEN_RE = re.compile(
    r"""
    (?P<newline>\n)
    |(?P<space>[ \t\r\f\v]+)
    |(?P<line_comment>//[^\n]*)
    |(?P<block_comment>/\*.*?\*/)
    |(?P<ident>[A-Za-z_][A-Za-z0-9_$]*|\\\S+)
    |(?P<punct>[().,;])
    |(?P<error>.)
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    """A lexical token with its position."""

    kind: str
    text: str
    line: int
    column: int


@dataclass(frozen=True)
class Instance:
    """A cell instance and its pin to net connections."""

    name: str
    cell_type: str
    pins: Mapping[str, str]
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Diagnostic:
    """A single netlist problem."""

    severity: Severity
    code: DiagnosticCode
    elements: tuple[str, ...]
    message: str
    line: int = 0
    column: int = 0

    def format(self, filename: str) -> str:
        """Render as ``SEVERITY file:line:col message``."""
        return f"{self.severity} {filename}:{self.line}:{self.column} {self.message}"


@dataclass(frozen=True)
class Netlist:
    """Elaborated circuit: instances, nets, ports and flip-flops."""

    name: str
    instances: tuple[Instance, ...]
    nets: tuple[str, ...]
    primary_inputs: tuple[str, ...]
    primary_outputs: tuple[str, ...]
    flip_flops: tuple[str, ...]
    library: CellLibrary = field(repr=False, compare=False)
    source: str = field(default="<string>", compare=False)

    @cached_property
    def instance_map(self) -> Mapping[str, Instance]:
        """Instances by name."""
        return {instance.name: instance for instance in self.instances}

    def cell(self, instance: Instance | str) -> CellType:
        """Library cell of an instance."""
        if isinstance(instance, str):
            instance = self.instance_map[instance]
        return self.library[instance.cell_type]

    @cached_property
    def drivers(self) -> Mapping[str, list[tuple[str, str | None]]]:
        """Drivers per net as (instance, pin); primary inputs use (net, None)."""
        drivers: dict[str, list[tuple[str, str | None]]] = {net: [] for net in self.nets}
        for net in self.primary_inputs:
            drivers.setdefault(net, []).append((net, None))
        for instance in self.instances:
            if instance.cell_type not in self.library:
                continue
            for pin in self.cell(instance).outputs:
                net = instance.pins.get(pin.name)
                if net is not None:
                    drivers.setdefault(net, []).append((instance.name, pin.name))
        return drivers

    @cached_property
    def loads(self) -> Mapping[str, list[tuple[str, str]]]:
        """Instance input pins reading each net."""
        loads: dict[str, list[tuple[str, str]]] = {net: [] for net in self.nets}
        for instance in self.instances:
            if instance.cell_type not in self.library:
                continue
            for pin in self.cell(instance).inputs:
                net = instance.pins.get(pin.name)
                if net is not None:
                    loads.setdefault(net, []).append((instance.name, pin.name))
        return loads


class _Parser:
    """Recursive descent over the token stream."""

    def __init__(self, text: str) -> None:
        self._tokens = list(_tokenize(text))
        self._index = 0

    def peek(self) -> Token:
        return self._tokens[self._index]

    def next(self) -> Token:
        token = self._tokens[self._index]
        if token.kind != "eof":
            self._index += 1
        return token

    def expect(self, text: str) -> Token:
        token = self.next()
        if token.text != text:
            raise NetlistSyntaxError(
                f"expected '{text}', found '{token.text or 'end of file'}'",
                token.line,
                token.column,
            )
        return token

    def identifier(self) -> Token:
        token = self.next()
        if token.kind != "ident" or token.text in KEYWORDS:
            raise NetlistSyntaxError(
                f"expected identifier, found '{token.text or 'end of file'}'",
                token.line,
                token.column,
            )
        return token

    def identifier_list(self, terminator: str) -> list[Token]:
        names = [self.identifier()]
        while self.peek().text == ",":
            self.next()
            names.append(self.identifier())
        self.expect(terminator)
        return names


def _tokenize(text: str):
    line, line_start = 1, 0
    for match in _TOKEN_RE.finditer(text):
        kind = match.lastgroup
        column = match.start() - line_start + 1
        if kind == "newline":
            line, line_start = line + 1, match.end()
        elif kind == "block_comment":
            newlines = match.group().count("\n")
            if newlines:
                line += newlines
                line_start = match.start() + match.group().rfind("\n") + 1
        elif kind == "error":
            if match.group() == "/" and text.startswith("/*", match.start()):
                raise NetlistSyntaxError("unterminated comment", line, column)
            raise NetlistSyntaxError(f"unexpected character '{match.group()}'", line, column)
        elif kind in ("ident", "punct"):
            yield Token(kind, match.group(), line, column)
    yield Token("eof", "", line, len(text) - line_start + 1)


def parse_netlist(
    text: str, lib: CellLibrary, source: str = "<string>"
) -> Netlist:
    """Parse netlist text into a validated Netlist."""
    parser = _Parser(text)
    parser.expect("module")
    module_name = parser.identifier().text

    header: list[Token] = []
    parser.expect("(")
    if parser.peek().text != ")":
        header = parser.identifier_list(")")
    else:
        parser.expect(")")
    parser.expect(";")

    inputs: list[str] = []
    outputs: list[str] = []
    declared: dict[str, Token] = {}
    instances: dict[str, Instance] = {}
    net_order: list[str] = []

    def use_net(token: Token) -> None:
        if token.text in instances:
            raise DuplicateNameError(
                f"{token.text} names both a net and an instance", token.line, token.column
            )
        if token.text not in declared:
            declared[token.text] = token
            net_order.append(token.text)

    while True:
        token = parser.peek()
        if token.text == "endmodule":
            parser.next()
            break
        if token.kind == "eof":
            raise NetlistSyntaxError("expected 'endmodule'", token.line, token.column)

        if token.text in ("input", "output", "wire"):
            parser.next()
            for name in parser.identifier_list(";"):
                if token.text != "wire" and (name.text in inputs or name.text in outputs):
                    raise DuplicateNameError(
                        f"port {name.text} declared twice", name.line, name.column
                    )
                use_net(name)
                if token.text == "input":
                    inputs.append(name.text)
                elif token.text == "output":
                    outputs.append(name.text)
            continue

        cell_token = parser.identifier()
        instance_token = parser.identifier()
        if cell_token.text not in lib:
            raise UnknownCellTypeError(
                cell_token.text, instance_token.text, cell_token.line, cell_token.column
            )
        cell = lib[cell_token.text]
        if cell.kind not in (CellKind.COMB, CellKind.FF):
            raise NetlistSyntaxError(
                f"port cell {cell.name} cannot be instantiated",
                cell_token.line,
                cell_token.column,
            )
        if instance_token.text in instances or instance_token.text in declared:
            raise DuplicateNameError(
                f"{instance_token.text} is already defined",
                instance_token.line,
                instance_token.column,
            )

        pins: dict[str, str] = {}
        parser.expect("(")
        while parser.peek().text != ")":
            parser.expect(".")
            pin_token = parser.identifier()
            if cell.pin(pin_token.text) is None:
                raise NetlistSyntaxError(
                    f"cell {cell.name} has no pin {pin_token.text}",
                    pin_token.line,
                    pin_token.column,
                )
            if pin_token.text in pins:
                raise NetlistSyntaxError(
                    f"pin {pin_token.text} connected twice",
                    pin_token.line,
                    pin_token.column,
                )
            parser.expect("(")
            if parser.peek().text != ")":
                net_token = parser.identifier()
                use_net(net_token)
                pins[pin_token.text] = net_token.text
            parser.expect(")")
            if parser.peek().text != ",":
                break
            parser.next()
        parser.expect(")")
        parser.expect(";")

        instances[instance_token.text] = Instance(
            name=instance_token.text,
            cell_type=cell.name,
            pins=pins,
            line=instance_token.line,
            column=instance_token.column,
        )

    trailing = parser.peek()
    if trailing.kind != "eof":
        raise NetlistSyntaxError(
            f"unexpected '{trailing.text}' after endmodule", trailing.line, trailing.column
        )

    for port in header:
        if port.text not in inputs and port.text not in outputs:
            raise NetlistSyntaxError(
                f"port {port.text} has no direction", port.line, port.column
            )
    for name in (*inputs, *outputs):
        if name not in (port.text for port in header):
            token = declared[name]
            raise NetlistSyntaxError(
                f"{name} is not in the port list", token.line, token.column
            )

    ordered = tuple(instances[name] for name in sorted(instances))
    netlist = Netlist(
        name=module_name,
        instances=ordered,
        nets=tuple(sorted(net_order)),
        primary_inputs=tuple(inputs),
        primary_outputs=tuple(outputs),
        flip_flops=tuple(
            instance.name for instance in ordered if lib[instance.cell_type].kind is CellKind.FF
        ),
        library=lib,
        source=source,
    )

    diagnostics = validate_netlist(netlist)
    if diagnostics:
        exception = _as_exception(diagnostics[0])
        exception.diagnostics = tuple(diagnostics)
        raise exception

    _LOGGER.debug(
        "Parsed %s: %d instances, %d nets, %d flip-flops",
        module_name,
        len(netlist.instances),
        len(netlist.nets),
        len(netlist.flip_flops),
    )
    return netlist


def load_netlist(path: str | Path, lib: CellLibrary) -> Netlist:
    """Read and parse a netlist file."""
    path = Path(path)
    return parse_netlist(path.read_text(encoding="utf-8"), lib, source=str(path))


def describe_netlist_error(exception: NetlistError, filename: str) -> list[str]:
    """Diagnostic lines for a failed parse, one per problem."""
    if exception.diagnostics:
        return [diagnostic.format(filename) for diagnostic in exception.diagnostics]
    return [f"{Severity.ERROR} {filename}:{exception.line}:{exception.column} {exception.message}"]


def _as_exception(diagnostic: Diagnostic) -> NetlistError:
    position = (diagnostic.line, diagnostic.column)
    match diagnostic.code:
        case DiagnosticCode.MULTIPLE_DRIVERS:
            return MultipleDriversError(diagnostic.elements[0], *position)
        case DiagnosticCode.UNCONNECTED_PIN:
            return UnconnectedPinError(*diagnostic.elements, *position)
        case DiagnosticCode.COMBINATIONAL_LOOP:
            return CombinationalLoopError(list(diagnostic.elements), *position)
        case DiagnosticCode.UNKNOWN_CELL_TYPE:
            return UnknownCellTypeError(
                diagnostic.elements[1], diagnostic.elements[0], *position
            )
    return NetlistError(diagnostic.message, *position)


def validate_netlist(n: Netlist) -> list[Diagnostic]:
    """Check every Netlist invariant and describe each violation."""
    diagnostics: list[Diagnostic] = []
    lib = n.library

    for instance in n.instances:
        if instance.cell_type not in lib:
            diagnostics.append(
                Diagnostic(
                    Severity.ERROR,
                    DiagnosticCode.UNKNOWN_CELL_TYPE,
                    (instance.name, instance.cell_type),
                    f"unknown cell type {instance.cell_type} for {instance.name}",
                    instance.line,
                    instance.column,
                )
            )
            continue
        for pin in lib[instance.cell_type].pins:
            if instance.pins.get(pin.name) is None:
                diagnostics.append(
                    Diagnostic(
                        Severity.ERROR,
                        DiagnosticCode.UNCONNECTED_PIN,
                        (instance.name, pin.name),
                        f"pin {pin.name} of {instance.name} is unconnected",
                        instance.line,
                        instance.column,
                    )
                )

    for net in sorted(n.drivers):
        drivers = n.drivers[net]
        if len(drivers) > 1:
            names = ", ".join(
                driver if pin is None else f"{driver}.{pin}" for driver, pin in drivers
            )
            first = n.instance_map.get(drivers[1][0])
            diagnostics.append(
                Diagnostic(
                    Severity.ERROR,
                    DiagnosticCode.MULTIPLE_DRIVERS,
                    (net,),
                    f"net {net} is driven by {names}",
                    first.line if first else 0,
                    first.column if first else 0,
                )
            )

    expected = tuple(
        sorted(
            instance.name
            for instance in n.instances
            if instance.cell_type in lib and lib[instance.cell_type].kind is CellKind.FF
        )
    )
    if n.flip_flops != expected:
        diagnostics.append(
            Diagnostic(
                Severity.ERROR,
                DiagnosticCode.FLIP_FLOP_SET,
                tuple(n.flip_flops),
                f"flip-flop list {list(n.flip_flops)} should be {list(expected)}",
            )
        )

    diagnostics.extend(_combinational_loops(n))
    return diagnostics


def combinational_graph(n: Netlist) -> nx.DiGraph:
    """Directed graph of combinational instances, edges along nets."""
    graph = nx.DiGraph()
    comb = [
        instance
        for instance in n.instances
        if instance.cell_type in n.library
        and n.cell(instance).kind is CellKind.COMB
    ]
    graph.add_nodes_from(instance.name for instance in comb)
    for instance in comb:
        for pin in n.cell(instance).inputs:
            net = instance.pins.get(pin.name)
            for driver, driver_pin in n.drivers.get(net, []):
                if driver_pin is not None and driver in graph:
                    graph.add_edge(driver, instance.name)
    return graph


def _combinational_loops(n: Netlist) -> list[Diagnostic]:
    graph = combinational_graph(n)
    diagnostics = []
    components = [
        sorted(component)
        for component in nx.strongly_connected_components(graph)
        if len(component) > 1 or any(graph.has_edge(node, node) for node in component)
    ]
    for component in sorted(components):
        subgraph = graph.subgraph(component)
        cycle = [edge[0] for edge in nx.find_cycle(subgraph, source=component[0])]
        first = n.instance_map[cycle[0]]
        diagnostics.append(
            Diagnostic(
                Severity.ERROR,
                DiagnosticCode.COMBINATIONAL_LOOP,
                tuple(cycle),
                f"combinational loop {' -> '.join([*cycle, cycle[0]])}",
                first.line,
                first.column,
            )
        )
    return diagnostics
