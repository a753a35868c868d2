"""SEU fault injection campaigns producing per flip-flop Functional Derating."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import voluptuous as vol

from .const import CAMPAIGN_CHUNK_SCENARIOS, CSV_FLOAT_FORMAT, FaultMode
from .exceptions import InvalidParameterError, SimulationError
from .netlist import Netlist
from .simulator import CircuitSimulator, Stimulus

_LOGGER = logging.getLogger(__name__)

FAULT_PLAN_SCHEMA = vol.Schema(
    {
        vol.Required("mode"): vol.Coerce(FaultMode),
        vol.Required("samples"): vol.Any(None, vol.All(int, vol.Range(min=1))),
        vol.Required("seed"): vol.All(int, vol.Range(min=0, max=2**64 - 1)),
        vol.Required("targets"): vol.Any(
            None, vol.All(vol.Coerce(list), [str], vol.Coerce(tuple))
        ),
    }
)


@dataclass(frozen=True)
class FaultPlan:
    """Which flip-flops to upset and at which cycles."""

    mode: FaultMode = FaultMode.EXHAUSTIVE
    samples: int | None = None
    seed: int = 0
    targets: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        """Validate and coerce."""
        try:
            validated = FAULT_PLAN_SCHEMA(asdict(self))
        except vol.Invalid as exception:
            raise InvalidParameterError(f"Invalid fault plan: {exception}") from exception
        if validated["mode"] is FaultMode.RANDOM and validated["samples"] is None:
            raise InvalidParameterError("Random campaigns need samples >= 1")
        for key, value in validated.items():
            object.__setattr__(self, key, value)


@dataclass(frozen=True)
class FdrRow:
    """Injection bookkeeping of one flip-flop."""

    name: str
    injections: int
    failures: int

    @property
    def fdr(self) -> float:
        """Fraction of injections that caused an observable failure."""
        return self.failures / self.injections if self.injections else 0.0


@dataclass(frozen=True)
class FdrTable:
    """Functional Derating factor per flip-flop, in netlist order."""

    rows: tuple[FdrRow, ...]

    def __post_init__(self) -> None:
        """Check counts."""
        for row in self.rows:
            if not 0 <= row.failures <= row.injections:
                raise SimulationError(
                    f"{row.name}: {row.failures} failures of {row.injections} injections"
                )

    def as_dict(self) -> dict[str, float]:
        """FDR by flip-flop name."""
        return {row.name: row.fdr for row in self.rows}

    def to_frame(self) -> pd.DataFrame:
        """Rows as a DataFrame with columns ff_name, injections, failures, fdr."""
        return pd.DataFrame(
            {
                "ff_name": [row.name for row in self.rows],
                "injections": [row.injections for row in self.rows],
                "failures": [row.failures for row in self.rows],
                "fdr": [row.fdr for row in self.rows],
            }
        )


def write_fdr_csv(table: FdrTable, path: str | Path) -> None:
    """Write ``ff_name,injections,failures,fdr``."""
    table.to_frame().to_csv(
        path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
    )


def read_fdr_csv(path: str | Path) -> FdrTable:
    """Read a table written by write_fdr_csv; fdr is recomputed from the counts."""
    try:
        frame = pd.read_csv(path, dtype={"ff_name": str}, keep_default_na=False)
        missing = {"ff_name", "injections", "failures"} - set(frame.columns)
        if missing:
            raise SimulationError(f"{path} lacks columns {sorted(missing)}")
        return FdrTable(
            rows=tuple(
                FdrRow(name=name, injections=int(injections), failures=int(failures))
                for name, injections, failures in zip(
                    frame["ff_name"], frame["injections"], frame["failures"]
                )
            )
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as exception:
        raise SimulationError(f"Cannot read FDR table {path}: {exception}") from exception


def inject_seu(n: Netlist, s: Stimulus, ff: str, cycle: int) -> bool:
    """Flip ff right after the clock edge opening cycle and report a failure."""
    simulator = CircuitSimulator(n, s)
    index = simulator.flip_flop_index(ff)
    simulator.check_cycle(cycle)
    return bool(simulator.failures([index], [cycle])[0])


def _failures_chunk(
    simulator: CircuitSimulator, chunk: tuple[np.ndarray, np.ndarray]
) -> np.ndarray:
    return simulator.failures(*chunk)


def run_campaign(
    n: Netlist,
    s: Stimulus,
    plan: FaultPlan,
    jobs: int = 1,
    simulator: CircuitSimulator | None = None,
) -> FdrTable:
    """Inject upsets per plan and reduce them to an FdrTable.

    Exhaustive plans upset every cycle once per flip-flop; random plans draw
    ``samples`` cycles with replacement from a generator seeded by
    (plan seed, flip-flop index). Scenarios run in chunks, fanned out to a
    process pool when jobs > 1; the table does not depend on jobs.
    """
    simulator = simulator or CircuitSimulator(n, s)
    targets: Sequence[str] = plan.targets if plan.targets is not None else n.flip_flops
    indices = [simulator.flip_flop_index(ff) for ff in targets]
    indices = sorted(set(indices))

    ff_column, cycle_column = [], []
    for index in indices:
        if plan.mode is FaultMode.EXHAUSTIVE:
            cycles = np.arange(s.cycles, dtype=np.int64)
        else:
            rng = np.random.default_rng([plan.seed, index])
            cycles = rng.integers(0, s.cycles, size=plan.samples, dtype=np.int64)
        ff_column.append(np.full(len(cycles), index, dtype=np.int64))
        cycle_column.append(cycles)

    ffs = np.concatenate(ff_column) if ff_column else np.zeros(0, dtype=np.int64)
    cycles = np.concatenate(cycle_column) if cycle_column else np.zeros(0, dtype=np.int64)
    size = CAMPAIGN_CHUNK_SCENARIOS
    chunks = [
        (ffs[start : start + size], cycles[start : start + size])
        for start in range(0, len(ffs), size)
    ]
    _LOGGER.info(
        "Running %s campaign: %d flip-flops, %d injections in %d chunks",
        plan.mode,
        len(indices),
        len(ffs),
        len(chunks),
    )

    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(_failures_chunk, [simulator] * len(chunks), chunks))
    else:
        results = [_failures_chunk(simulator, chunk) for chunk in chunks]
    failed = np.concatenate(results) if results else np.zeros(0, dtype=bool)

    injections = np.bincount(ffs, minlength=len(n.flip_flops))
    failures = np.bincount(ffs, weights=failed, minlength=len(n.flip_flops))
    return FdrTable(
        rows=tuple(
            FdrRow(
                name=n.flip_flops[index],
                injections=int(injections[index]),
                failures=int(failures[index]),
            )
            for index in indices
        )
    )
