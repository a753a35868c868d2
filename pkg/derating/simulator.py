"""Cycle-based logic simulation of a netlist under a stimulus.

Many scenarios (the golden run and any number of faulty runs) are simulated
together: every net holds a boolean numpy array with one column per scenario.

Stimulus files look like::

    # comment
    inputs clk en
    outputs tc
    init ff0=0 ff1=0
    0x0
    0x2

Each vector line is one cycle, hexadecimal, bit i assigning the i-th name of
the ``inputs`` line.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from .const import DEFAULT_CYCLES, PinRole
from .exceptions import (
    CycleOutOfRangeError,
    StimulusFormatError,
    UninitializedStateError,
    UnknownFlipFlopError,
    UnknownInputError,
    UnknownOutputError,
)
from .netlist import Netlist, combinational_graph

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Stimulus:
    """Input vectors, initial flip-flop state and observed outputs."""

    cycles: int
    inputs: tuple[str, ...]
    input_vectors: np.ndarray
    initial_state: Mapping[str, int]
    observed_outputs: tuple[str, ...]

    def __post_init__(self) -> None:
        """Check shape and bit values."""
        vectors = np.asarray(self.input_vectors, dtype=np.uint8)
        if vectors.shape != (self.cycles, len(self.inputs)):
            raise StimulusFormatError(
                f"Expected {self.cycles}x{len(self.inputs)} input bits, got {vectors.shape}"
            )
        if np.any(vectors > 1):
            raise StimulusFormatError("Input vectors must hold bits")
        if not self.observed_outputs:
            raise StimulusFormatError("At least one output must be observed")
        if any(bit not in (0, 1) for bit in self.initial_state.values()):
            raise StimulusFormatError("Initial state must hold bits")
        object.__setattr__(self, "input_vectors", vectors)


def generate_stimulus(
    n: Netlist,
    cycles: int = DEFAULT_CYCLES,
    seed: int = 0,
    observed_outputs: Sequence[str] | None = None,
    random_initial_state: bool = False,
) -> Stimulus:
    """Uniform random input bits from a seeded generator."""
    if cycles < 1:
        raise StimulusFormatError("Stimulus needs at least one cycle")
    rng = np.random.default_rng(seed)
    vectors = rng.integers(0, 2, size=(cycles, len(n.primary_inputs)), dtype=np.uint8)
    if random_initial_state:
        bits = rng.integers(0, 2, size=len(n.flip_flops))
    else:
        bits = np.zeros(len(n.flip_flops), dtype=int)
    return Stimulus(
        cycles=cycles,
        inputs=n.primary_inputs,
        input_vectors=vectors,
        initial_state={ff: int(bit) for ff, bit in zip(n.flip_flops, bits)},
        observed_outputs=tuple(observed_outputs or n.primary_outputs),
    )


def parse_stimulus(text: str) -> Stimulus:
    """Parse stimulus text."""
    inputs: list[str] | None = None
    outputs: list[str] | None = None
    initial: dict[str, int] = {}
    rows: list[list[int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, *rest = line.split()
        if keyword == "inputs":
            inputs = rest
        elif keyword == "outputs":
            outputs = rest
        elif keyword == "init":
            for item in rest:
                name, sep, bit = item.partition("=")
                if not sep or bit not in ("0", "1"):
                    raise StimulusFormatError(f"line {lineno}: bad init entry {item}")
                initial[name] = int(bit)
        else:
            if inputs is None:
                raise StimulusFormatError(f"line {lineno}: vector before 'inputs' line")
            try:
                value = int(keyword, 16)
            except ValueError as exception:
                raise StimulusFormatError(
                    f"line {lineno}: bad hex vector {keyword}"
                ) from exception
            if rest or value < 0 or value >> len(inputs):
                raise StimulusFormatError(f"line {lineno}: vector {keyword} too wide")
            rows.append([(value >> bit) & 1 for bit in range(len(inputs))])

    if inputs is None or outputs is None:
        raise StimulusFormatError("Stimulus needs 'inputs' and 'outputs' lines")
    return Stimulus(
        cycles=len(rows),
        inputs=tuple(inputs),
        input_vectors=np.asarray(rows, dtype=np.uint8).reshape(len(rows), len(inputs)),
        initial_state=initial,
        observed_outputs=tuple(outputs),
    )


def format_stimulus(s: Stimulus) -> str:
    """Render a stimulus in the file format."""
    width = max(1, (len(s.inputs) + 3) // 4)
    lines = [
        "inputs " + " ".join(s.inputs),
        "outputs " + " ".join(s.observed_outputs),
        "init " + " ".join(f"{name}={bit}" for name, bit in s.initial_state.items()),
    ]
    for row in s.input_vectors:
        value = sum(int(bit) << index for index, bit in enumerate(row))
        lines.append(f"0x{value:0{width}x}")
    return "\n".join(lines) + "\n"


def load_stimulus(path: str | Path) -> Stimulus:
    """Read a stimulus file."""
    return parse_stimulus(Path(path).read_text(encoding="utf-8"))


def save_stimulus(s: Stimulus, path: str | Path) -> None:
    """Write a stimulus file."""
    Path(path).write_text(format_stimulus(s), encoding="utf-8")


def _evaluate(function: str, operands: np.ndarray) -> np.ndarray:
    match function:
        case "INV":
            return ~operands[0]
        case "BUF":
            return operands[0].copy()
        case "MUX2":
            return np.where(operands[2], operands[1], operands[0])
    base = function.rstrip("0123456789")
    match base:
        case "AND":
            return np.logical_and.reduce(operands, axis=0)
        case "NAND":
            return ~np.logical_and.reduce(operands, axis=0)
        case "OR":
            return np.logical_or.reduce(operands, axis=0)
        case "NOR":
            return ~np.logical_or.reduce(operands, axis=0)
        case "XOR":
            return np.logical_xor.reduce(operands, axis=0)
        case "XNOR":
            return ~np.logical_xor.reduce(operands, axis=0)
    raise ValueError(f"Unsupported function {function}")


@dataclass(frozen=True)
class Trace:
    """Per-cycle observed outputs and flip-flop states of one run."""

    outputs: np.ndarray
    states: np.ndarray
    observed_outputs: tuple[str, ...] = field(default=())
    flip_flops: tuple[str, ...] = field(default=())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return np.array_equal(self.outputs, other.outputs) and np.array_equal(
            self.states, other.states
        )


class CircuitSimulator:
    """Compiled netlist plus stimulus, ready to run golden and faulty scenarios.

    Usage example:
    ```
    simulator = CircuitSimulator(netlist, stimulus)
    golden = simulator.golden
    failed = simulator.failures([3, 3], [0, 7])
    ```
    """

    def __init__(self, n: Netlist, s: Stimulus) -> None:
        """Compile the netlist and run the golden simulation."""
        self.flip_flops = n.flip_flops
        self.observed_outputs = s.observed_outputs
        self.cycles = s.cycles

        primary_inputs = set(n.primary_inputs)
        for name in s.inputs:
            if name not in primary_inputs:
                raise UnknownInputError(f"Stimulus input {name} is not a primary input")
        missing = [name for name in n.primary_inputs if name not in s.inputs]
        if missing:
            raise StimulusFormatError(f"Stimulus does not assign {', '.join(missing)}")
        for name in s.observed_outputs:
            if name not in n.primary_outputs:
                raise UnknownOutputError(f"Observed output {name} is not a primary output")
        for ff in n.flip_flops:
            if ff not in s.initial_state:
                raise UninitializedStateError(f"Flip-flop {ff} has no initial value")

        net_ids = {net: index for index, net in enumerate(n.nets)}
        self._num_nets = len(n.nets)
        self._input_ids = np.array([net_ids[name] for name in s.inputs], dtype=np.int64)
        self._vectors = s.input_vectors.astype(bool)
        self._observed_ids = np.array(
            [net_ids[name] for name in s.observed_outputs], dtype=np.int64
        )
        self._initial = np.array([bool(s.initial_state[ff]) for ff in n.flip_flops])

        q_ids, d_ids, reset_ids = [], [], []
        for ff in n.flip_flops:
            cell, pins = n.cell(ff), n.instance_map[ff].pins
            q_ids.append(net_ids[pins[cell.pin_with_role(PinRole.Q).name]])
            d_ids.append(net_ids[pins[cell.pin_with_role(PinRole.DATA).name]])
            reset = cell.pin_with_role(PinRole.RESET)
            reset_ids.append(net_ids[pins[reset.name]] if reset else -1)
        self._q_ids = np.array(q_ids, dtype=np.int64)
        self._d_ids = np.array(d_ids, dtype=np.int64)
        self._reset_ids = np.array(reset_ids, dtype=np.int64)

        self._gates = []
        for name in nx.lexicographical_topological_sort(combinational_graph(n)):
            cell, pins = n.cell(name), n.instance_map[name].pins
            operands = np.array([net_ids[pins[pin.name]] for pin in cell.inputs], dtype=np.int64)
            self._gates.append((cell.function, operands, net_ids[pins[cell.outputs[0].name]]))

        for net, drivers in n.drivers.items():
            if not drivers and (n.loads.get(net) or net in s.observed_outputs):
                _LOGGER.warning("Net %s has no driver and reads as 0", net)

        self.golden = self.trace()
        _LOGGER.debug(
            "Compiled %s: %d gates, %d flip-flops, %d cycles",
            n.name,
            len(self._gates),
            len(self.flip_flops),
            self.cycles,
        )

    def flip_flop_index(self, ff: str) -> int:
        """Index of a flip-flop, raising UnknownFlipFlopError."""
        try:
            return self.flip_flops.index(ff)
        except ValueError as exception:
            raise UnknownFlipFlopError(f"{ff} is not a flip-flop") from exception

    def check_cycle(self, cycle: int) -> None:
        """Raise CycleOutOfRangeError unless 0 <= cycle < cycles."""
        if not 0 <= cycle < self.cycles:
            raise CycleOutOfRangeError(f"Cycle {cycle} is outside 0..{self.cycles - 1}")

    def _run(
        self,
        scenarios: int,
        flip_scenarios: np.ndarray,
        flip_ffs: np.ndarray,
        flip_cycles: np.ndarray,
    ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield (observed outputs, state) for every cycle.

        A flip listed for cycle c inverts the state bit right after the clock
        edge that opens cycle c, before that cycle is evaluated.
        """
        values = np.zeros((self._num_nets, scenarios), dtype=bool)
        state = np.repeat(self._initial[:, None], scenarios, axis=1)
        for cycle in range(self.cycles):
            hit = flip_cycles == cycle
            if hit.any():
                np.logical_xor.at(state, (flip_ffs[hit], flip_scenarios[hit]), True)

            values[self._input_ids] = self._vectors[cycle][:, None]
            values[self._q_ids] = state
            for function, operands, output in self._gates:
                values[output] = _evaluate(function, values[operands])

            yield values[self._observed_ids], state

            next_state = values[self._d_ids]
            has_reset = self._reset_ids >= 0
            if has_reset.any():
                next_state[has_reset] &= ~values[self._reset_ids[has_reset]]
            state = next_state

    def trace(self, flips: Sequence[tuple[str, int]] = ()) -> Trace:
        """Simulate one run with the given (flip-flop, cycle) upsets."""
        ffs = np.array([self.flip_flop_index(ff) for ff, _ in flips], dtype=np.int64)
        cycles = np.array([cycle for _, cycle in flips], dtype=np.int64)
        for cycle in cycles:
            self.check_cycle(int(cycle))

        outputs, states = [], []
        for observed, state in self._run(1, np.zeros(len(ffs), dtype=np.int64), ffs, cycles):
            outputs.append(observed[:, 0].astype(np.uint8))
            states.append(state[:, 0].astype(np.uint8))
        return Trace(
            outputs=np.asarray(outputs).reshape(self.cycles, len(self.observed_outputs)),
            states=np.asarray(states).reshape(self.cycles, len(self.flip_flops)),
            observed_outputs=self.observed_outputs,
            flip_flops=self.flip_flops,
        )

    def failures(self, ff_indices: Sequence[int], cycles: Sequence[int]) -> np.ndarray:
        """Run one single-upset scenario per (ff index, cycle) pair.

        Returns True where an observed output differs from the golden run at
        any cycle from the upset to the end of the stimulus.
        """
        ff_indices = np.asarray(ff_indices, dtype=np.int64)
        cycles = np.asarray(cycles, dtype=np.int64)
        scenarios = len(ff_indices)
        golden = self.golden.outputs.astype(bool)
        failed = np.zeros(scenarios, dtype=bool)
        runs = self._run(scenarios, np.arange(scenarios), ff_indices, cycles)
        for cycle, (observed, _) in enumerate(runs):
            failed |= np.any(observed != golden[cycle][:, None], axis=0)
        return failed


def simulate_golden(n: Netlist, s: Stimulus) -> Trace:
    """Fault-free output and state traces, one row per cycle."""
    return CircuitSimulator(n, s).golden
