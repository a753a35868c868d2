"""Pipeline configuration file."""

from __future__ import annotations

import dataclasses
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import voluptuous as vol
import yaml

from .campaign import FaultPlan
from .const import DEFAULT_CYCLES, DEFAULT_TRAIN_FRACTION, LOGGER
from .exceptions import ArtifactNotFoundError, ConfigError, InvalidParameterError
from .mlp import MlpParams
from .svr import SvrParams
from .utils import derive_seed
from .walks import WalkParams

CONF_PATHS = "paths"
CONF_WALK = "walk"
CONF_STIMULUS = "stimulus"
CONF_FAULT = "fault"
CONF_SVR = "svr"
CONF_MLP = "mlp"
CONF_SPLIT = "split"
CONF_SEED = "seed"
CONF_JOBS = "jobs"
CONF_LOGGER = "logger"
CONF_OUTPUTS = "outputs"

STAGE_WALK = "walk"
STAGE_STIMULUS = "stimulus"
STAGE_FAULT = "fault"
STAGE_SPLIT = "split"
STAGE_SVR = "svr"
STAGE_MLP = "mlp"

_SEED = vol.All(int, vol.Range(min=0, max=2**64 - 1))
_FRACTION = vol.All(
    vol.Coerce(float), vol.Range(min=0, max=1, min_included=False, max_included=False)
)
_LEVEL = vol.All(
    str, vol.Lower, vol.In(["critical", "fatal", "error", "warning", "warn", "info", "debug"])
)


def _params_section(params_class: type) -> vol.Schema:
    """Accept any field of a params dataclass; the dataclass checks values."""
    return vol.Schema({vol.Optional(f.name): object for f in dataclasses.fields(params_class)})


CONFIG_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_PATHS): {
            vol.Required("netlist"): str,
            vol.Required("cell_library"): str,
            vol.Optional("stimulus"): vol.Any(None, str),
            vol.Optional("output", default="out"): str,
        },
        vol.Optional(CONF_WALK, default={}): _params_section(WalkParams),
        vol.Optional(CONF_STIMULUS, default={}): {
            vol.Optional("cycles", default=DEFAULT_CYCLES): vol.All(int, vol.Range(min=1)),
            vol.Optional("observed_outputs", default=None): vol.Any(None, [str]),
            vol.Optional("random_initial_state", default=False): bool,
            vol.Optional("seed"): _SEED,
        },
        vol.Optional(CONF_FAULT, default={}): _params_section(FaultPlan),
        vol.Optional(CONF_SVR, default={}): _params_section(SvrParams),
        vol.Optional(CONF_MLP, default={}): _params_section(MlpParams),
        vol.Optional(CONF_SPLIT, default={}): {
            vol.Optional("train_fraction", default=DEFAULT_TRAIN_FRACTION): _FRACTION,
            vol.Optional("sweep_fractions", default=[]): [_FRACTION],
            vol.Optional("seed"): _SEED,
        },
        vol.Optional(CONF_OUTPUTS, default={}): {
            vol.Optional("walks", default=False): bool,
            vol.Optional("plots", default=True): bool,
        },
        vol.Optional(CONF_SEED, default=0): _SEED,
        vol.Optional(CONF_JOBS, default=1): vol.All(int, vol.Range(min=1)),
        vol.Optional(CONF_LOGGER, default={}): {
            vol.Optional("default", default="info"): _LEVEL,
            vol.Optional("logs", default={}): {str: _LEVEL},
        },
    }
)


@dataclass(frozen=True)
class StimulusSpec:
    """How to generate the stimulus when no stimulus file is given."""

    cycles: int = DEFAULT_CYCLES
    seed: int = 0
    observed_outputs: tuple[str, ...] | None = None
    random_initial_state: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the pipeline, with paths resolved and seeds derived."""

    netlist: Path
    cell_library: Path
    output: Path
    stimulus_file: Path | None = None
    walk: WalkParams = field(default_factory=WalkParams)
    stimulus: StimulusSpec = field(default_factory=StimulusSpec)
    fault: FaultPlan = field(default_factory=FaultPlan)
    svr: SvrParams = field(default_factory=SvrParams)
    mlp: MlpParams = field(default_factory=MlpParams)
    mlp_input_dim: int | None = None
    train_fraction: float = DEFAULT_TRAIN_FRACTION
    sweep_fractions: tuple[float, ...] = ()
    split_seed: int = 0
    seed: int = 0
    jobs: int = 1
    write_walks: bool = False
    write_plots: bool = True
    log_default: str = "info"
    log_levels: Mapping[str, str] = field(default_factory=dict)


def _resolve(base: Path, value: str) -> Path:
    path = Path(value).expanduser()
    return path if path.is_absolute() else base / path


def _build(params_class: type, section: str, values: Mapping[str, Any], global_seed: int):
    """Instantiate a params dataclass; the stage seed is derived unless given."""
    try:
        return params_class(**{"seed": derive_seed(global_seed, section), **values})
    except (InvalidParameterError, TypeError) as exception:
        raise ConfigError(f"Invalid {section} section: {exception}") from exception


def build_config(
    raw: Mapping[str, Any] | None,
    base_dir: str | Path = ".",
    seed: int | None = None,
    jobs: int | None = None,
    out: str | Path | None = None,
) -> PipelineConfig:
    """Validate a parsed configuration document and apply overrides."""
    try:
        conf = CONFIG_SCHEMA(raw or {})
    except vol.Invalid as exception:
        raise ConfigError(f"Invalid configuration: {exception}") from exception

    base = Path(base_dir)
    global_seed = conf[CONF_SEED] if seed is None else seed

    def stage_seed(section: Mapping[str, Any], stage: str) -> int:
        return section.get("seed", derive_seed(global_seed, stage))

    paths = conf[CONF_PATHS]
    stimulus, split, mlp = conf[CONF_STIMULUS], conf[CONF_SPLIT], conf[CONF_MLP]
    return PipelineConfig(
        netlist=_resolve(base, paths["netlist"]),
        cell_library=_resolve(base, paths["cell_library"]),
        output=Path(out) if out is not None else _resolve(base, paths["output"]),
        stimulus_file=_resolve(base, paths["stimulus"]) if paths.get("stimulus") else None,
        walk=_build(WalkParams, STAGE_WALK, conf[CONF_WALK], global_seed),
        stimulus=StimulusSpec(
            cycles=stimulus["cycles"],
            seed=stage_seed(stimulus, STAGE_STIMULUS),
            observed_outputs=(
                tuple(stimulus["observed_outputs"]) if stimulus["observed_outputs"] else None
            ),
            random_initial_state=stimulus["random_initial_state"],
        ),
        fault=_build(FaultPlan, STAGE_FAULT, conf[CONF_FAULT], global_seed),
        svr=_build(SvrParams, STAGE_SVR, conf[CONF_SVR], global_seed),
        mlp=_build(MlpParams, STAGE_MLP, mlp, global_seed),
        mlp_input_dim=mlp.get("input_dim"),
        train_fraction=split["train_fraction"],
        sweep_fractions=tuple(split["sweep_fractions"]),
        split_seed=stage_seed(split, STAGE_SPLIT),
        seed=global_seed,
        jobs=conf[CONF_JOBS] if jobs is None else jobs,
        write_walks=conf[CONF_OUTPUTS]["walks"],
        write_plots=conf[CONF_OUTPUTS]["plots"],
        log_default=conf[CONF_LOGGER]["default"],
        log_levels=dict(conf[CONF_LOGGER]["logs"]),
    )


def load_config(
    path: str | Path,
    seed: int | None = None,
    jobs: int | None = None,
    out: str | Path | None = None,
) -> PipelineConfig:
    """Read a YAML configuration; relative paths are taken from its directory."""
    path = Path(path)
    if not path.is_file():
        raise ArtifactNotFoundError(str(path))
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exception:
        raise ConfigError(f"{path} is not valid YAML: {exception}") from exception
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path} must hold a mapping")
    LOGGER.debug("Loaded configuration %s", path)
    return build_config(raw, path.parent, seed=seed, jobs=jobs, out=out)
