"""Tests for the pipeline coordinator and the command line."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import pandas as pd
import pytest
import yaml

from derating.__main__ import build_parser, main
from derating.campaign import FdrRow, FdrTable, read_fdr_csv, write_fdr_csv
from derating.config import load_config
from derating.const import ExitCode
from derating.coordinator import PipelineCoordinator, exit_code_for
from derating.exceptions import (
    ArtifactNotFoundError,
    CombinationalLoopError,
    DeratingError,
    EmptyCorpusError,
    GmlSyntaxError,
    LabelMismatchError,
    MultipleDriversError,
    NetlistSyntaxError,
    NonFiniteLossError,
    StimulusFormatError,
    ZeroVarianceError,
)
from derating.synthetic import generate_pipeline_netlist

from .conftest import BENCHMARKS

SMALL_SECTIONS = {
    "walk": {"l": 10, "r": 4, "window": 3, "d": 4, "epochs": 1},
    "stimulus": {"cycles": 64},
    "svr": {"gamma": 1.0, "max_passes": 50},
    "mlp": {"layer_sizes": [8, 1], "epochs": 5},
}


def _write_config(tmp_path: Path, netlist: str | Path | None = None, **sections) -> Path:
    """Configuration for a small synthetic design inside tmp_path."""
    if netlist is None:
        netlist = tmp_path / "pipeline.v"
        netlist.write_text(generate_pipeline_netlist(5, 4, seed=1))
    document = {
        "paths": {
            "netlist": str(netlist),
            "cell_library": str(BENCHMARKS / "cells.lib"),
            "output": "out",
        },
        **SMALL_SECTIONS,
        **sections,
    }
    path = tmp_path / "pipeline.yaml"
    path.write_text(yaml.safe_dump(document))
    return path


def _artifacts(out: Path) -> dict[str, bytes]:
    return {
        str(path.relative_to(out)): path.read_bytes()
        for path in sorted(out.rglob("*"))
        if path.is_file() and path.suffix != ".npz" and path.name != "timing.json"
    }


@pytest.mark.parametrize(
    ("exception", "code"),
    [
        (ArtifactNotFoundError("x"), ExitCode.FILE_NOT_FOUND),
        (FileNotFoundError("x"), ExitCode.FILE_NOT_FOUND),
        (CombinationalLoopError(["a", "b"]), ExitCode.NETLIST),
        (GmlSyntaxError("x"), ExitCode.GRAPH),
        (EmptyCorpusError("x"), ExitCode.EMBEDDING),
        (StimulusFormatError("x"), ExitCode.SIMULATION),
        (NonFiniteLossError("x"), ExitCode.REGRESSION),
        (ZeroVarianceError("x"), ExitCode.REGRESSION),
        (LabelMismatchError("ff", "x"), ExitCode.LABEL_MISMATCH),
        (DeratingError("x"), ExitCode.UNKNOWN),
        (RuntimeError("x"), ExitCode.UNKNOWN),
    ],
)
def test_exit_codes(exception: BaseException, code: ExitCode) -> None:
    """Each failure family maps to its exit code."""
    assert exit_code_for(exception) is code


def test_parser() -> None:
    """Subcommands and overrides parse; unknown commands exit."""
    args = build_parser().parse_args(["all", "-c", "x.yaml", "--seed", "3", "-j", "2", "-o", "o"])
    assert (args.command, args.config, args.seed, args.jobs, args.out) == (
        "all",
        "x.yaml",
        3,
        2,
        "o",
    )
    with pytest.raises(SystemExit):
        build_parser().parse_args(["fly"])


def test_end_to_end(tmp_path) -> None:
    """All stages write their artifacts and a report for both models."""
    config = _write_config(tmp_path, split={"sweep_fractions": [0.5]}, outputs={"walks": True})
    assert main(["all", "-c", str(config)]) == ExitCode.OK

    out = tmp_path / "out"
    for name in (
        "circuit.gml",
        "walks.txt",
        "embeddings.csv",
        "embeddings.npz",
        "stimulus.txt",
        "fdr.csv",
        "models/svr.npz",
        "models/svr.json",
        "models/mlp.npz",
        "models/mlp.json",
        "predictions_svr.csv",
        "predictions_mlp.csv",
        "report.json",
        "report.csv",
        "sweep.csv",
        "timing.json",
        "plots/scatter_svr.svg",
        "plots/sorted_mlp.svg",
        "plots/ci_comparison.svg",
    ):
        assert (out / name).is_file(), name

    fdr = pd.read_csv(out / "fdr.csv")
    assert len(fdr) == 20
    assert fdr["fdr"].between(0, 1).all()

    report = json.loads((out / "report.json").read_text())
    assert [model["model"] for model in report["models"]] == ["svr", "mlp"]
    manifest = report["manifest"]
    assert len(manifest["train_indices"]) == 12
    assert len(manifest["test_indices"]) == 8
    assert "clk" in manifest["excluded_labels"]
    assert not set(manifest["train_labels"]) & set(manifest["test_labels"])

    timing = json.loads((out / "timing.json").read_text())
    assert {"graph", "walks", "skipgram", "campaign", "fit_svr", "fit_mlp"} <= set(timing)
    assert len(pd.read_csv(out / "sweep.csv")) == 2


def test_runs_are_reproducible(tmp_path) -> None:
    """Two runs with the same seed write identical files."""
    config = _write_config(tmp_path)
    assert main(["all", "-c", str(config), "-o", str(tmp_path / "a")]) == ExitCode.OK
    assert main(["all", "-c", str(config), "-o", str(tmp_path / "b")]) == ExitCode.OK
    first, second = _artifacts(tmp_path / "a"), _artifacts(tmp_path / "b")
    assert first.keys() == second.keys()
    assert first == second


def test_seed_changes_embeddings(tmp_path) -> None:
    """A different global seed gives different embeddings."""
    config = _write_config(tmp_path)
    for seed, name in ((1, "a"), (2, "b")):
        out = str(tmp_path / name)
        assert main(["graph", "-c", str(config), "-o", out]) == ExitCode.OK
        assert main(["embed", "-c", str(config), "-o", out, "--seed", str(seed)]) == ExitCode.OK
    first = (tmp_path / "a" / "embeddings.csv").read_text()
    assert first != (tmp_path / "b" / "embeddings.csv").read_text()


def test_stages_one_at_a_time(tmp_path) -> None:
    """Stages rerun from the files of earlier stages."""
    coordinator = PipelineCoordinator(load_config(_write_config(tmp_path)))
    coordinator.cmd_graph()
    coordinator.cmd_embed()
    coordinator.cmd_campaign()
    reports = coordinator.cmd_train_eval()
    assert [report.model for report in reports] == ["svr", "mlp"]
    assert all(report.n_test == 8 for report in reports)


@pytest.mark.parametrize(
    ("argv", "code"),
    [
        (["graph", "-j", "0"], ExitCode.CONFIG),
        (["graph", "--seed", "-1"], ExitCode.CONFIG),
    ],
)
def test_bad_overrides(tmp_path, argv: list[str], code: ExitCode) -> None:
    """Negative seeds and zero workers are configuration errors."""
    assert main([*argv, "-c", str(_write_config(tmp_path))]) == code


def test_missing_config(tmp_path) -> None:
    """A configuration file that does not exist."""
    assert main(["graph", "-c", str(tmp_path / "nope.yaml")]) == ExitCode.FILE_NOT_FOUND


def test_invalid_config(tmp_path) -> None:
    """Schema errors exit with the configuration code."""
    config = _write_config(tmp_path, walk={"p": -1})
    assert main(["graph", "-c", str(config)]) == ExitCode.CONFIG


def test_missing_netlist(tmp_path) -> None:
    """A netlist path that does not exist."""
    config = _write_config(tmp_path, netlist=tmp_path / "absent.v")
    assert main(["graph", "-c", str(config)]) == ExitCode.FILE_NOT_FOUND


def test_malformed_netlist(tmp_path) -> None:
    """Netlist errors exit with the netlist code and write no graph."""
    netlist = tmp_path / "broken.v"
    netlist.write_text("module broken (a); input a; INV g (.A(a) endmodule\n")
    config = _write_config(tmp_path, netlist=netlist)
    assert main(["graph", "-c", str(config)]) == ExitCode.NETLIST
    assert not (tmp_path / "out" / "circuit.gml").exists()


def test_stage_without_inputs(tmp_path) -> None:
    """Running a stage before the one that feeds it."""
    config = _write_config(tmp_path)
    assert main(["embed", "-c", str(config)]) == ExitCode.FILE_NOT_FOUND
    assert main(["train-eval", "-c", str(config)]) == ExitCode.FILE_NOT_FOUND


def test_label_mismatch(tmp_path) -> None:
    """An FDR row without an embedding stops training."""
    config = _write_config(tmp_path)
    assert main(["graph", "-c", str(config)]) == ExitCode.OK
    assert main(["embed", "-c", str(config)]) == ExitCode.OK
    write_fdr_csv(
        FdrTable((FdrRow("ff_0_0", 8, 4), FdrRow("ghost", 8, 2), FdrRow("ff_0_1", 8, 1))),
        tmp_path / "out" / "fdr.csv",
    )
    assert main(["train-eval", "-c", str(config)]) == ExitCode.LABEL_MISMATCH


def test_flip_flop_without_fdr_row(tmp_path) -> None:
    """A flip-flop that has an embedding but no FDR row stops training."""
    config = _write_config(tmp_path)
    for command in ("graph", "embed", "campaign"):
        assert main([command, "-c", str(config)]) == ExitCode.OK
    fdr = tmp_path / "out" / "fdr.csv"
    rows = tuple(row for row in read_fdr_csv(fdr).rows if row.name != "ff_0_0")
    write_fdr_csv(FdrTable(rows), fdr)

    coordinator = PipelineCoordinator(load_config(config))
    with pytest.raises(LabelMismatchError) as excinfo:
        coordinator.load_dataset()
    assert excinfo.value.label == "ff_0_0"
    assert main(["train-eval", "-c", str(config)]) == ExitCode.LABEL_MISMATCH


def test_targets_limit_expected_rows(tmp_path) -> None:
    """With fault.targets only the targeted flip-flops need FDR rows."""
    targets = ["ff_0_0", "ff_0_1", "ff_1_0", "ff_1_1", "ff_2_0"]
    config = _write_config(tmp_path, fault={"targets": targets})
    for command in ("graph", "embed", "campaign"):
        assert main([command, "-c", str(config)]) == ExitCode.OK
    names, X, y, excluded = PipelineCoordinator(load_config(config)).load_dataset()
    assert sorted(names) == targets
    assert X.shape == (5, 4)
    assert len(y) == 5
    assert "ff_4_3" in excluded


@pytest.mark.parametrize(
    ("name", "text", "code"),
    [
        ("embeddings.csv", "label,f0\na,0.1\nb,0.1,0.2,0.3\n", ExitCode.EMBEDDING),
        ("fdr.csv", "ff_name,injections,failures,fdr\nff_0_0,8,x,0.5\n", ExitCode.SIMULATION),
    ],
)
def test_malformed_csv(tmp_path, name: str, text: str, code: ExitCode) -> None:
    """Broken intermediate files exit with their stage's code."""
    config = _write_config(tmp_path)
    for command in ("graph", "embed", "campaign"):
        assert main([command, "-c", str(config)]) == ExitCode.OK
    (tmp_path / "out" / name).write_text(text)
    assert main(["train-eval", "-c", str(config)]) == code


def test_netlist_diagnostics_logged(tmp_path, caplog) -> None:
    """Netlist problems are logged as SEVERITY file:line:col message."""
    netlist = tmp_path / "bad.v"
    netlist.write_text(
        "module bad (a, y);\n"
        "  input a;\n"
        "  output y;\n"
        "  INV g1 (.A(a), .Y(y));\n"
        "  BUF g2 (.A(a), .Y(y));\n"
        "endmodule\n"
    )
    coordinator = PipelineCoordinator(load_config(_write_config(tmp_path, netlist=netlist)))
    with caplog.at_level(logging.ERROR), pytest.raises(MultipleDriversError):
        coordinator.cmd_graph()
    assert f"ERROR {netlist}:5:7 net y is driven by g1.Y, g2.Y" in caplog.messages

    caplog.clear()
    netlist.write_text("module m (a);\n  input a\n  INV g (.A(a), .Y(b));\nendmodule\n")
    with caplog.at_level(logging.ERROR), pytest.raises(NetlistSyntaxError):
        coordinator.cmd_graph()
    assert f"ERROR {netlist}:3:3 expected ';', found 'INV'" in caplog.messages


@pytest.mark.slow
def test_learnable_benchmark(tmp_path) -> None:
    """On the 25 x 8 family both models beat the mean and one reaches R2 0.5."""
    netlist = tmp_path / "pipeline.v"
    netlist.write_text(generate_pipeline_netlist(25, 8))
    config = _write_config(
        tmp_path,
        netlist=netlist,
        walk={"l": 80, "r": 10, "window": 10, "d": 8, "epochs": 5},
        stimulus={"cycles": 256},
        svr={"gamma": 0.01, "epsilon": 0.0125, "c": 10.0, "max_passes": 1000},
        mlp={"layer_sizes": [126, 64, 36, 12, 1], "epochs": 200},
    )
    assert main(["all", "-c", str(config)]) == ExitCode.OK
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    r2 = [model["r2"] for model in report["models"]]
    assert len(r2) == 2
    assert max(r2) >= 0.5
    assert all(value > 0.0 for value in r2)
