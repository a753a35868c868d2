"""Cell library for structural netlists.

The library is a small text file with one ``cell`` line per cell type::

    # name   kind  attributes
    cell INV  COMB function=INV  pins=A:in:data,Y:out:data
    cell DFF  FF   pins=D:in:data,CLK:in:clock,Q:out:q
    cell DFFR FF   pins=D:in:data,CLK:in:clock,RST:in:reset,Q:out:q

Pins are ``NAME:DIRECTION:ROLE`` with direction ``in``/``out`` and role
``data``/``clock``/``reset``/``q``. Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

from .const import CellKind, PinDirection, PinRole
from .exceptions import CellLibraryError

VARIADIC_FUNCTIONS = ("AND", "NAND", "OR", "NOR", "XOR", "XNOR")
FIXED_ARITY = {"INV": 1, "BUF": 1, "MUX2": 3}

_FUNCTION_RE = re.compile(r"^(?P<base>[A-Z]+?)(?P<arity>\d*)$")


@dataclass(frozen=True)
class Pin:
    """A cell pin."""

    name: str
    direction: PinDirection
    role: PinRole


@dataclass(frozen=True)
class CellType:
    """A library cell."""

    name: str
    kind: CellKind
    pins: tuple[Pin, ...]
    function: str | None = None

    @property
    def inputs(self) -> tuple[Pin, ...]:
        """Input pins in declaration order."""
        return tuple(pin for pin in self.pins if pin.direction is PinDirection.IN)

    @property
    def outputs(self) -> tuple[Pin, ...]:
        """Output pins in declaration order."""
        return tuple(pin for pin in self.pins if pin.direction is PinDirection.OUT)

    def pin(self, name: str) -> Pin | None:
        """Return the pin called name, if any."""
        for pin in self.pins:
            if pin.name == name:
                return pin
        return None

    def pin_with_role(self, role: PinRole) -> Pin | None:
        """Return the first pin carrying role, if any."""
        for pin in self.pins:
            if pin.role is role:
                return pin
        return None

    @property
    def gate(self) -> str | None:
        """Boolean function without its arity suffix, e.g. ``NAND``."""
        if self.function is None:
            return None
        return _FUNCTION_RE.match(self.function).group("base")


@dataclass(frozen=True)
class CellLibrary:
    """Cell types by name."""

    entries: Mapping[str, CellType] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Check every cell."""
        for cell in self.entries.values():
            _check_cell(cell)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __getitem__(self, name: str) -> CellType:
        return self.entries[name]


def _check_cell(cell: CellType) -> None:
    """Raise CellLibraryError if cell breaks a library invariant."""
    names = [pin.name for pin in cell.pins]
    if len(names) != len(set(names)):
        raise CellLibraryError(f"Cell {cell.name} declares a pin twice")

    if cell.kind is CellKind.COMB:
        if len(cell.outputs) != 1 or not cell.inputs:
            raise CellLibraryError(
                f"Cell {cell.name} must have one output and at least one input"
            )
        if cell.function is None:
            raise CellLibraryError(f"Cell {cell.name} has no function")
        _check_function(cell)
        return

    if cell.kind is CellKind.FF:
        roles = [pin.role for pin in cell.inputs]
        outputs = cell.outputs
        if (
            roles.count(PinRole.DATA) != 1
            or roles.count(PinRole.CLOCK) != 1
            or roles.count(PinRole.RESET) > 1
            or len(roles) != 2 + roles.count(PinRole.RESET)
            or len(outputs) != 1
            or outputs[0].role is not PinRole.Q
        ):
            raise CellLibraryError(
                f"Flip-flop {cell.name} needs one data, one clock and one q pin"
            )


def _check_function(cell: CellType) -> None:
    match = _FUNCTION_RE.match(cell.function)
    if match is None:
        raise CellLibraryError(f"Cell {cell.name} has bad function {cell.function}")

    base, arity = match.group("base"), match.group("arity")
    fan_in = len(cell.inputs)
    if cell.function in FIXED_ARITY:
        expected = FIXED_ARITY[cell.function]
    elif base in VARIADIC_FUNCTIONS:
        expected = int(arity) if arity else fan_in
        if expected < 2:
            raise CellLibraryError(f"Cell {cell.name} needs at least two inputs")
    else:
        raise CellLibraryError(f"Cell {cell.name} has unknown function {cell.function}")

    if fan_in != expected:
        raise CellLibraryError(
            f"Cell {cell.name} declares {fan_in} inputs for {cell.function}"
        )


def parse_cell_library(text: str) -> CellLibrary:
    """Parse cell library text."""
    entries: dict[str, CellType] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        words = line.split()
        if words[0] != "cell" or len(words) < 3:
            raise CellLibraryError(f"line {lineno}: expected 'cell NAME KIND ...'")

        name, kind = words[1], words[2].upper()
        if name in entries:
            raise CellLibraryError(f"line {lineno}: cell {name} defined twice")
        try:
            cell_kind = CellKind(kind)
        except ValueError as exception:
            raise CellLibraryError(f"line {lineno}: unknown kind {kind}") from exception

        attributes = {}
        for word in words[3:]:
            key, sep, value = word.partition("=")
            if not sep:
                raise CellLibraryError(f"line {lineno}: expected key=value, got {word}")
            attributes[key] = value

        try:
            pins = tuple(
                _parse_pin(spec) for spec in attributes.pop("pins", "").split(",") if spec
            )
        except ValueError as exception:
            raise CellLibraryError(f"line {lineno}: {exception}") from exception

        function = attributes.pop("function", None)
        if attributes:
            raise CellLibraryError(
                f"line {lineno}: unknown attributes {', '.join(sorted(attributes))}"
            )

        entries[name] = CellType(
            name=name,
            kind=cell_kind,
            pins=pins,
            function=function.upper() if function else None,
        )

    return CellLibrary(entries)


def _parse_pin(spec: str) -> Pin:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"bad pin {spec}, expected NAME:DIRECTION:ROLE")
    name, direction, role = parts
    return Pin(name=name, direction=PinDirection(direction.lower()), role=PinRole(role.lower()))


def load_cell_library(path: str | Path) -> CellLibrary:
    """Read and parse a cell library file."""
    return parse_cell_library(Path(path).read_text(encoding="utf-8"))
