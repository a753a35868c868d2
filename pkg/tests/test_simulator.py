"""Tests for stimulus files and the cycle simulator."""

from __future__ import annotations

import numpy as np
import pytest

from derating.exceptions import (
    CycleOutOfRangeError,
    StimulusFormatError,
    UninitializedStateError,
    UnknownFlipFlopError,
    UnknownInputError,
    UnknownOutputError,
)
from derating.library import CellLibrary
from derating.netlist import Netlist, parse_netlist
from derating.simulator import (
    CircuitSimulator,
    Stimulus,
    format_stimulus,
    generate_stimulus,
    load_stimulus,
    parse_stimulus,
    save_stimulus,
    simulate_golden,
)


def _counter_reference(enables: list[int], flips: dict[int, list[int]] | None = None):
    """Bit-level model of the toy counter; flips maps cycle to flipped ff indices."""
    flips = flips or {}
    q = [0, 0]
    outputs, states = [], []
    for cycle, en in enumerate(enables):
        for index in flips.get(cycle, []):
            q[index] ^= 1
        outputs.append(q[0] & q[1])
        states.append(tuple(q))
        q = [en ^ q[0], (en & q[0]) ^ q[1]]
    return outputs, states


def _counter_stimulus(enables: list[int]) -> Stimulus:
    return Stimulus(
        cycles=len(enables),
        inputs=("clk", "en"),
        input_vectors=np.array([[0, en] for en in enables]),
        initial_state={"ff0": 0, "ff1": 0},
        observed_outputs=("tc",),
    )


def test_toggle_trace(toggle: Netlist) -> None:
    """A flip-flop fed by its inverse alternates."""
    stimulus = generate_stimulus(toggle, cycles=4)
    trace = simulate_golden(toggle, stimulus)
    assert trace.outputs[:, 0].tolist() == [0, 1, 0, 1]
    assert trace.states[:, 0].tolist() == [0, 1, 0, 1]


def test_counter_matches_reference(toy_counter: Netlist) -> None:
    """Golden run equals the bit-level model for random enables."""
    enables = np.random.default_rng(5).integers(0, 2, size=40).tolist()
    trace = simulate_golden(toy_counter, _counter_stimulus(enables))
    outputs, states = _counter_reference(enables)
    assert trace.outputs[:, 0].tolist() == outputs
    assert [tuple(row) for row in trace.states.tolist()] == states


def test_counter_with_flips_matches_reference(toy_counter: Netlist) -> None:
    """Faulty runs equal the bit-level model with the same upsets."""
    enables = np.random.default_rng(6).integers(0, 2, size=24).tolist()
    simulator = CircuitSimulator(toy_counter, _counter_stimulus(enables))
    for ff, index in (("ff0", 0), ("ff1", 1)):
        for cycle in range(24):
            outputs, _ = _counter_reference(enables, {cycle: [index]})
            trace = simulator.trace([(ff, cycle)])
            assert trace.outputs[:, 0].tolist() == outputs
            expected = outputs != _counter_reference(enables)[0]
            assert simulator.failures([index], [cycle])[0] == expected


def test_double_flip_cancels(toy_counter: Netlist) -> None:
    """Two upsets of the same bit in the same cycle restore the golden run."""
    simulator = CircuitSimulator(toy_counter, generate_stimulus(toy_counter, 16, seed=1))
    assert simulator.trace([("ff0", 3), ("ff0", 3)]) == simulator.golden
    assert simulator.trace([("ff0", 3)]) != simulator.golden


def test_reset_clears_state(library: CellLibrary) -> None:
    """Synchronous active-high reset loads 0."""
    netlist = parse_netlist(
        """
        module resettable (clk, rst, d, q);
          input clk, rst, d;
          output q;
          DFFR ff (.D(d), .CLK(clk), .RST(rst), .Q(q));
        endmodule
        """,
        library,
    )
    stimulus = parse_stimulus("inputs clk rst d\noutputs q\ninit ff=0\n0x4\n0x6\n0x4\n0x0\n")
    assert simulate_golden(netlist, stimulus).outputs[:, 0].tolist() == [0, 1, 0, 1]


def test_simulator_is_deterministic(toy_counter: Netlist) -> None:
    """Two compilations give equal traces."""
    stimulus = generate_stimulus(toy_counter, 32, seed=4)
    assert simulate_golden(toy_counter, stimulus) == simulate_golden(toy_counter, stimulus)


def test_generate_stimulus(toy_counter: Netlist) -> None:
    """Seeded vectors, zero initial state and default observed outputs."""
    first = generate_stimulus(toy_counter, 50, seed=2)
    second = generate_stimulus(toy_counter, 50, seed=2)
    assert first.input_vectors.shape == (50, 2)
    np.testing.assert_array_equal(first.input_vectors, second.input_vectors)
    assert first.initial_state == {"ff0": 0, "ff1": 0}
    assert first.observed_outputs == ("tc",)
    with pytest.raises(StimulusFormatError):
        generate_stimulus(toy_counter, 0)


def test_stimulus_file(tmp_path, toy_counter: Netlist) -> None:
    """Stimulus text survives save and load."""
    stimulus = generate_stimulus(toy_counter, 20, seed=8, random_initial_state=True)
    save_stimulus(stimulus, tmp_path / "stimulus.txt")
    restored = load_stimulus(tmp_path / "stimulus.txt")
    assert restored.inputs == stimulus.inputs
    assert restored.initial_state == stimulus.initial_state
    np.testing.assert_array_equal(restored.input_vectors, stimulus.input_vectors)
    assert format_stimulus(restored) == format_stimulus(stimulus)


def test_parse_stimulus_bits() -> None:
    """Bit i of each vector assigns the i-th input."""
    stimulus = parse_stimulus("# header\ninputs a b c\noutputs y\n0x5  # a and c\n0x2\n")
    assert stimulus.input_vectors.tolist() == [[1, 0, 1], [0, 1, 0]]
    assert stimulus.cycles == 2


@pytest.mark.parametrize(
    "text",
    [
        "outputs y\n0x1\n",
        "inputs a\n0x1\n",
        "inputs a\noutputs y\n0x2\n",
        "inputs a\noutputs y\nzz\n",
        "inputs a\noutputs y\ninit ff=2\n",
        "inputs a\noutputs\n0x1\n",
    ],
)
def test_bad_stimulus(text: str) -> None:
    """Malformed stimulus text is rejected."""
    with pytest.raises(StimulusFormatError):
        parse_stimulus(text)


def test_stimulus_must_match_netlist(toy_counter: Netlist) -> None:
    """Inputs, outputs and initial state are checked against the netlist."""
    good = generate_stimulus(toy_counter, 4)
    with pytest.raises(UnknownInputError):
        CircuitSimulator(
            toy_counter,
            Stimulus(4, ("clk", "en", "x"), np.zeros((4, 3)), good.initial_state, ("tc",)),
        )
    with pytest.raises(StimulusFormatError):
        CircuitSimulator(
            toy_counter, Stimulus(4, ("clk",), np.zeros((4, 1)), good.initial_state, ("tc",))
        )
    with pytest.raises(UnknownOutputError):
        CircuitSimulator(
            toy_counter,
            Stimulus(4, good.inputs, good.input_vectors, good.initial_state, ("q0",)),
        )
    with pytest.raises(UninitializedStateError):
        CircuitSimulator(
            toy_counter, Stimulus(4, good.inputs, good.input_vectors, {"ff0": 0}, ("tc",))
        )


def test_bad_flip_targets(toy_counter: Netlist) -> None:
    """Unknown flip-flops and out-of-range cycles are rejected."""
    simulator = CircuitSimulator(toy_counter, generate_stimulus(toy_counter, 8))
    with pytest.raises(UnknownFlipFlopError):
        simulator.trace([("g_x0", 1)])
    with pytest.raises(CycleOutOfRangeError):
        simulator.trace([("ff0", 8)])
    with pytest.raises(CycleOutOfRangeError):
        simulator.check_cycle(-1)
