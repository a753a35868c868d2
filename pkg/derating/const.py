"""Constants for derating."""

import enum
from logging import Logger, getLogger

LOGGER: Logger = getLogger(__package__)

NAME = "Derating"
DOMAIN = "derating"
VERSION = "1.0.0"

MODEL_FORMAT_VERSION = 1

DEFAULT_CONFIG_PATH = "config/pipeline.yaml"

# Walk defaults
DEFAULT_WALK_LENGTH = 80
DEFAULT_WALKS_PER_NODE = 10
DEFAULT_WINDOW = 10
DEFAULT_DIMENSIONS = 8
DEFAULT_NEGATIVES = 5
DEFAULT_EPOCHS = 5
DEFAULT_LEARNING_RATE = 0.025
MIN_LEARNING_RATE_FRACTION = 1e-4
NOISE_EXPONENT = 0.75
SKIPGRAM_BATCH_PAIRS = 64

# Fault campaign defaults
DEFAULT_CYCLES = 256
CAMPAIGN_CHUNK_SCENARIOS = 4096

# Regressor defaults
DEFAULT_SVR_GAMMA = 0.01
DEFAULT_SVR_EPSILON = 0.0125
DEFAULT_SVR_C = 10.0
DEFAULT_SVR_KKT_TOL = 1e-3
DEFAULT_SVR_MAX_PASSES = 1000
DEFAULT_LAYER_SIZES = (126, 64, 36, 12, 1)
DEFAULT_MLP_EPOCHS = 200
DEFAULT_BATCH_SIZE = 10

DEFAULT_TRAIN_FRACTION = 0.6
CI95_Z = 1.96

GML_WEIGHT_FORMAT = ".9g"
CSV_FLOAT_FORMAT = "%.9g"

ARTIFACT_GML = "circuit.gml"
ARTIFACT_WALKS = "walks.txt"
ARTIFACT_EMBEDDINGS = "embeddings.csv"
ARTIFACT_EMBEDDING_CACHE = "embeddings.npz"
ARTIFACT_STIMULUS = "stimulus.txt"
ARTIFACT_FDR = "fdr.csv"
ARTIFACT_MODELS_DIR = "models"
ARTIFACT_PLOTS_DIR = "plots"
ARTIFACT_REPORT_JSON = "report.json"
ARTIFACT_REPORT_CSV = "report.csv"
ARTIFACT_SWEEP = "sweep.csv"
ARTIFACT_TIMING = "timing.json"


class CellKind(enum.StrEnum):
    """Kind of a library cell or graph node."""

    COMB = "COMB"
    FF = "FF"
    INPUT = "INPUT"
    OUTPUT = "OUTPUT"


class PinDirection(enum.StrEnum):
    """Pin direction."""

    IN = "in"
    OUT = "out"


class PinRole(enum.StrEnum):
    """Pin role inside a cell."""

    DATA = "data"
    CLOCK = "clock"
    RESET = "reset"
    Q = "q"


class Traversal(enum.StrEnum):
    """How random walks read edge direction."""

    DIRECTED = "directed"
    UNDIRECTED = "undirected"


class FaultMode(enum.StrEnum):
    """Fault injection campaign mode."""

    EXHAUSTIVE = "exhaustive"
    RANDOM = "random"


class Activation(enum.StrEnum):
    """Hidden layer activation."""

    RELU = "relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    LINEAR = "linear"


class Severity(enum.StrEnum):
    """Diagnostic severity."""

    ERROR = "ERROR"
    WARNING = "WARNING"


class DiagnosticCode(enum.StrEnum):
    """Netlist diagnostic kinds."""

    UNCONNECTED_PIN = "UnconnectedPin"
    MULTIPLE_DRIVERS = "MultipleDrivers"
    COMBINATIONAL_LOOP = "CombinationalLoop"
    UNKNOWN_CELL_TYPE = "UnknownCellType"
    FLIP_FLOP_SET = "FlipFlopSet"


class ExitCode(enum.IntEnum):
    """Process exit codes of the command line."""

    OK = 0
    UNKNOWN = 1
    CONFIG = 2
    FILE_NOT_FOUND = 3
    NETLIST = 4
    GRAPH = 5
    EMBEDDING = 6
    SIMULATION = 7
    REGRESSION = 8
    LABEL_MISMATCH = 9
