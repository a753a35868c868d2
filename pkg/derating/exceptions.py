"""Exceptions for derating."""

from __future__ import annotations

from typing import Any


class DeratingError(Exception):
    """Exception to indicate a general derating error."""


class InvalidParameterError(DeratingError):
    """Exception to indicate a parameter outside its allowed range."""


class CellLibraryError(DeratingError):
    """Exception to indicate a malformed cell library."""


class NetlistError(DeratingError):
    """Exception to indicate an invalid netlist.

    ``diagnostics`` holds every problem found when the netlist was validated;
    it is empty for errors raised while parsing.
    """

    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        """Initialize."""
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.diagnostics: tuple[Any, ...] = ()


class NetlistSyntaxError(NetlistError):
    """Exception to indicate a netlist that does not parse."""


class UnknownCellTypeError(NetlistError):
    """Exception to indicate an instance of a cell missing from the library."""

    def __init__(self, cell_type: str, instance: str, line: int = 0, column: int = 0) -> None:
        """Initialize."""
        super().__init__(f"Unknown cell type {cell_type} for instance {instance}", line, column)
        self.cell_type = cell_type
        self.instance = instance


class MultipleDriversError(NetlistError):
    """Exception to indicate a net driven more than once."""

    def __init__(self, net: str, line: int = 0, column: int = 0) -> None:
        """Initialize."""
        super().__init__(f"Net {net} has multiple drivers", line, column)
        self.net = net


class UnconnectedPinError(NetlistError):
    """Exception to indicate an instance pin without a net."""

    def __init__(self, instance: str, pin: str, line: int = 0, column: int = 0) -> None:
        """Initialize."""
        super().__init__(f"Pin {pin} of {instance} is unconnected", line, column)
        self.instance = instance
        self.pin = pin


class CombinationalLoopError(NetlistError):
    """Exception to indicate a cycle through combinational cells."""

    def __init__(self, cycle: list[str], line: int = 0, column: int = 0) -> None:
        """Initialize."""
        super().__init__(f"Combinational loop through {' -> '.join(cycle)}", line, column)
        self.cycle = cycle


class DuplicateNameError(NetlistError):
    """Exception to indicate an identifier used for two elements."""


class GraphError(DeratingError):
    """Exception to indicate an invalid circuit graph."""


class GmlSyntaxError(GraphError):
    """Exception to indicate GML text that does not parse."""


class DanglingEdgeError(GraphError):
    """Exception to indicate an edge whose endpoint is not a node."""


class NonPositiveWeightError(GraphError):
    """Exception to indicate an edge weight that is not strictly positive."""


class UnknownNodeError(GraphError):
    """Exception to indicate a node id that is not in the graph."""


class NotAnEdgeError(GraphError):
    """Exception to indicate a walk step along a missing edge."""


class EmbeddingError(DeratingError):
    """Exception to indicate a failure while learning embeddings."""


class EmptyCorpusError(EmbeddingError):
    """Exception to indicate a walk corpus without any training pair."""


class SimulationError(DeratingError):
    """Exception to indicate a failure while simulating the circuit."""


class StimulusFormatError(SimulationError):
    """Exception to indicate a malformed stimulus file."""


class UnknownInputError(SimulationError):
    """Exception to indicate a stimulus input that is not a primary input."""


class UnknownOutputError(SimulationError):
    """Exception to indicate an observed output that is not a primary output."""


class UninitializedStateError(SimulationError):
    """Exception to indicate a flip-flop without an initial value."""


class UnknownFlipFlopError(SimulationError):
    """Exception to indicate an injection target that is not a flip-flop."""


class CycleOutOfRangeError(SimulationError):
    """Exception to indicate an injection cycle outside the stimulus."""


class RegressionError(DeratingError):
    """Exception to indicate a failure while fitting or using a regressor."""


class DimensionMismatchError(RegressionError):
    """Exception to indicate inputs of the wrong width."""


class NonFiniteLossError(RegressionError):
    """Exception to indicate a diverged training run."""


class ModelFormatError(RegressionError):
    """Exception to indicate an unreadable model file."""


class MetricError(DeratingError):
    """Exception to indicate metric inputs that are not admissible."""


class LengthMismatchError(MetricError):
    """Exception to indicate vectors of different length."""


class EmptyInputError(MetricError):
    """Exception to indicate an empty vector."""


class ZeroVarianceError(MetricError):
    """Exception to indicate a constant target vector."""


class TooFewSamplesError(MetricError):
    """Exception to indicate fewer samples than a statistic needs."""


class PipelineError(DeratingError):
    """Exception to indicate a pipeline failure."""


class ConfigError(PipelineError):
    """Exception to indicate an invalid pipeline configuration."""


class ArtifactNotFoundError(PipelineError):
    """Exception to indicate a missing input file."""

    def __init__(self, path: str) -> None:
        """Initialize."""
        super().__init__(f"File not found: {path}")
        self.path = path


class LabelMismatchError(PipelineError):
    """Exception to indicate feature and label files that do not line up."""

    def __init__(self, label: str, message: str) -> None:
        """Initialize."""
        super().__init__(message)
        self.label = label
