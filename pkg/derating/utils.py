"""Utility functions."""

from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import colorlog
import numpy as np

from .const import DOMAIN, GML_WEIGHT_FORMAT, MODEL_FORMAT_VERSION
from .exceptions import ModelFormatError

LOG_FORMAT = "%(log_color)s%(asctime)s %(levelname)-8s%(reset)s %(name)s: %(message)s"


def derive_seed(global_seed: int, stage: str) -> int:
    """Derive a 64-bit stage seed from the global seed."""
    digest = hashlib.blake2b(f"{global_seed}:{stage}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def format_float(value: float) -> str:
    """Format a float the way GML weights are written."""
    return format(float(value), GML_WEIGHT_FORMAT)


def setup_logging(
    default: str = "info",
    logs: Mapping[str, str] | None = None,
    verbose: bool = False,
) -> None:
    """Install a colored console handler and apply logger levels."""
    handler = colorlog.StreamHandler()
    handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT, datefmt="%H:%M:%S"))

    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(default.upper())

    for name, level in (logs or {}).items():
        logging.getLogger(name).setLevel(level.upper())

    if verbose:
        logging.getLogger(DOMAIN).setLevel(logging.DEBUG)


def save_model_archive(
    path: str | Path,
    model_type: str,
    arrays: Mapping[str, np.ndarray],
    summary: Mapping[str, Any],
) -> None:
    """Write a versioned .npz model file and its .json summary next to it."""
    path = Path(path)
    with open(path, "wb") as handle:
        np.savez(
            handle,
            format_version=np.asarray(MODEL_FORMAT_VERSION),
            model_type=np.asarray(model_type),
            **arrays,
        )
    document = {"model_type": model_type, "format_version": MODEL_FORMAT_VERSION, **summary}
    path.with_suffix(".json").write_text(
        json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model_archive(path: str | Path, model_type: str) -> dict[str, np.ndarray]:
    """Arrays of a model file, after checking its version and type."""
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {key: data[key] for key in data.files}
    except (OSError, ValueError) as exception:
        raise ModelFormatError(f"Cannot read model file {path}: {exception}") from exception

    if "format_version" not in arrays or "model_type" not in arrays:
        raise ModelFormatError(f"{path} is not a model file")
    version = int(arrays.pop("format_version"))
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"{path} has unsupported format version {version}")
    found = str(arrays.pop("model_type"))
    if found != model_type:
        raise ModelFormatError(f"{path} holds a {found} model, expected {model_type}")
    return arrays
