"""Pipeline coordinator for derating."""

from __future__ import annotations

import json
import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from .campaign import FdrTable, read_fdr_csv, run_campaign, write_fdr_csv
from .config import PipelineConfig
from .const import (
    ARTIFACT_EMBEDDING_CACHE,
    ARTIFACT_EMBEDDINGS,
    ARTIFACT_FDR,
    ARTIFACT_GML,
    ARTIFACT_MODELS_DIR,
    ARTIFACT_PLOTS_DIR,
    ARTIFACT_REPORT_CSV,
    ARTIFACT_REPORT_JSON,
    ARTIFACT_STIMULUS,
    ARTIFACT_SWEEP,
    ARTIFACT_TIMING,
    ARTIFACT_WALKS,
    CSV_FLOAT_FORMAT,
    LOGGER,
    CellKind,
    ExitCode,
)
from .exceptions import (
    ArtifactNotFoundError,
    CellLibraryError,
    ConfigError,
    DeratingError,
    DimensionMismatchError,
    EmbeddingError,
    GraphError,
    InvalidParameterError,
    LabelMismatchError,
    MetricError,
    NetlistError,
    RegressionError,
    SimulationError,
)
from .graph import load_gml, netlist_to_graph, save_gml
from .library import load_cell_library
from .metrics import (
    RegressionReport,
    SplitManifest,
    evaluate,
    evs,
    mse,
    r2,
    split_dataset,
    write_predictions_csv,
    write_reports_csv,
    write_reports_json,
)
from .mlp import MlpParams, fit_mlp, predict_mlp, save_mlp
from .netlist import Netlist, describe_netlist_error, load_netlist
from .plots import plot_ci_comparison, plot_scatter, plot_sorted
from .simulator import Stimulus, generate_stimulus, load_stimulus, save_stimulus
from .skipgram import (
    EmbeddingMatrix,
    read_embeddings_csv,
    save_embedding_cache,
    train_skipgram,
    write_embeddings_csv,
)
from .svr import fit_svr, predict_svr, save_svr
from .walks import build_transition_tables, sample_walks, write_walks

# Most specific first.
EXIT_CODES: tuple[tuple[type[BaseException], ExitCode], ...] = (
    (LabelMismatchError, ExitCode.LABEL_MISMATCH),
    (ArtifactNotFoundError, ExitCode.FILE_NOT_FOUND),
    (FileNotFoundError, ExitCode.FILE_NOT_FOUND),
    (ConfigError, ExitCode.CONFIG),
    (InvalidParameterError, ExitCode.CONFIG),
    (NetlistError, ExitCode.NETLIST),
    (CellLibraryError, ExitCode.NETLIST),
    (GraphError, ExitCode.GRAPH),
    (EmbeddingError, ExitCode.EMBEDDING),
    (SimulationError, ExitCode.SIMULATION),
    (RegressionError, ExitCode.REGRESSION),
    (MetricError, ExitCode.REGRESSION),
)


def exit_code_for(exception: BaseException) -> ExitCode:
    """Process exit code of a failure."""
    for exception_type, code in EXIT_CODES:
        if isinstance(exception, exception_type):
            return code
    return ExitCode.UNKNOWN


def _require(path: Path) -> Path:
    if not path.is_file():
        raise ArtifactNotFoundError(str(path))
    return path


class PipelineCoordinator:
    """Run pipeline stages against one output directory.

    Every stage reads its inputs from files written by the previous stage, so
    stages can be rerun one at a time.

    Usage example:
    ```
    coordinator = PipelineCoordinator(load_config("config/pipeline.yaml"))
    coordinator.cmd_graph()
    coordinator.cmd_embed()
    coordinator.cmd_campaign()
    reports = coordinator.cmd_train_eval()
    ```
    """

    def __init__(self, config: PipelineConfig) -> None:
        """Initialize."""
        self.config = config
        self.out = config.output
        self.timings: dict[str, float] = {}

    @contextmanager
    def _timed(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - start

    def _prepare(self, *subdirectories: str) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        for subdirectory in subdirectories:
            (self.out / subdirectory).mkdir(exist_ok=True)

    def write_timing(self) -> Path:
        """Merge this run's wall-clock timings into timing.json."""
        path = self.out / ARTIFACT_TIMING
        timings = json.loads(path.read_text(encoding="utf-8")) if path.is_file() else {}
        timings.update({name: round(seconds, 6) for name, seconds in self.timings.items()})
        path.write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def load_netlist(self) -> Netlist:
        """Parse and validate the configured netlist."""
        library = load_cell_library(_require(self.config.cell_library))
        path = _require(self.config.netlist)
        try:
            return load_netlist(path, library)
        except NetlistError as exception:
            for line in describe_netlist_error(exception, str(path)):
                LOGGER.error(line)
            raise

    def cmd_graph(self) -> Path:
        """Netlist to circuit.gml."""
        self._prepare()
        with self._timed("graph"):
            netlist = self.load_netlist()
            graph = netlist_to_graph(netlist)
            path = self.out / ARTIFACT_GML
            save_gml(graph, path)
        LOGGER.info(
            "Wrote %s: %d nodes, %d edges", path, len(graph.nodes), len(graph.edges)
        )
        return path

    def cmd_embed(self) -> Path:
        """circuit.gml to embeddings.csv and the binary cache."""
        self._prepare()
        graph = load_gml(_require(self.out / ARTIFACT_GML))
        params = self.config.walk
        with self._timed("walks"):
            tables = build_transition_tables(graph, params)
            corpus = sample_walks(graph, tables, params, jobs=self.config.jobs)
        if self.config.write_walks:
            write_walks(corpus, self.out / ARTIFACT_WALKS)
        with self._timed("skipgram"):
            matrix: EmbeddingMatrix = train_skipgram(
                corpus, len(graph), params, [node.label for node in graph.nodes]
            )

        path = self.out / ARTIFACT_EMBEDDINGS
        write_embeddings_csv(matrix, path)
        save_embedding_cache(matrix, self.out / ARTIFACT_EMBEDDING_CACHE)
        LOGGER.info(
            "Wrote %s: %d nodes x %d dimensions", path, len(matrix.node_labels), params.d
        )
        return path

    def load_stimulus(self, netlist: Netlist) -> Stimulus:
        """The configured stimulus file, or a generated one."""
        if self.config.stimulus_file is not None:
            return load_stimulus(_require(self.config.stimulus_file))
        spec = self.config.stimulus
        return generate_stimulus(
            netlist,
            cycles=spec.cycles,
            seed=spec.seed,
            observed_outputs=spec.observed_outputs,
            random_initial_state=spec.random_initial_state,
        )

    def cmd_campaign(self) -> Path:
        """Fault injection campaign to fdr.csv."""
        self._prepare()
        netlist = self.load_netlist()
        stimulus = self.load_stimulus(netlist)
        save_stimulus(stimulus, self.out / ARTIFACT_STIMULUS)
        with self._timed("campaign"):
            table = run_campaign(netlist, stimulus, self.config.fault, jobs=self.config.jobs)
        path = self.out / ARTIFACT_FDR
        write_fdr_csv(table, path)
        LOGGER.info("Wrote %s: %d flip-flops", path, len(table.rows))
        return path

    def load_dataset(self) -> tuple[list[str], np.ndarray, np.ndarray, tuple[str, ...]]:
        """Join embeddings to FDR labels by flip-flop name.

        Every flip-flop of circuit.gml (or of fault.targets when set) must
        have both an embedding and an FDR row. Returns flip-flop names,
        features, targets and the labels of nodes without an FDR row.
        """
        labels, features = read_embeddings_csv(_require(self.out / ARTIFACT_EMBEDDINGS))
        table: FdrTable = read_fdr_csv(_require(self.out / ARTIFACT_FDR))
        graph = load_gml(_require(self.out / ARTIFACT_GML))
        index = {label: row for row, label in enumerate(labels)}
        for fdr_row in table.rows:
            if fdr_row.name not in index:
                raise LabelMismatchError(
                    fdr_row.name, f"Flip-flop {fdr_row.name} has an FDR row but no embedding"
                )
        names = [fdr_row.name for fdr_row in table.rows]
        labelled = set(names)

        targets = self.config.fault.targets
        if targets is None:
            targets = [node.label for node in graph.nodes if node.kind is CellKind.FF]
        for label in sorted(targets):
            if label not in labelled:
                raise LabelMismatchError(
                    label, f"Flip-flop {label} has an embedding but no FDR row"
                )
        excluded = tuple(label for label in labels if label not in labelled)
        X = features[[index[name] for name in names]]
        y = np.array([fdr_row.fdr for fdr_row in table.rows])
        return names, X, y, excluded

    def _mlp_params(self, width: int) -> MlpParams:
        wanted = self.config.mlp_input_dim
        if wanted is not None and wanted != width:
            raise DimensionMismatchError(
                f"mlp.input_dim is {wanted} but embeddings have {width} columns"
            )
        return replace(self.config.mlp, input_dim=width)

    def cmd_train_eval(self) -> list[RegressionReport]:
        """Fit both regressors, evaluate them on the test split and report."""
        self._prepare(ARTIFACT_MODELS_DIR, ARTIFACT_PLOTS_DIR)
        names, X, y, excluded = self.load_dataset()
        train, test = split_dataset(len(y), self.config.train_fraction, self.config.split_seed)
        manifest = SplitManifest(
            seed=self.config.split_seed,
            train_indices=tuple(int(i) for i in train),
            test_indices=tuple(int(i) for i in test),
            train_labels=tuple(names[i] for i in train),
            test_labels=tuple(names[i] for i in test),
            excluded_labels=excluded,
        )
        LOGGER.info(
            "Training on %d flip-flops, testing on %d (%d non flip-flop nodes excluded)",
            len(train),
            len(test),
            len(excluded),
        )

        mlp_params = self._mlp_params(X.shape[1])
        models = self.out / ARTIFACT_MODELS_DIR
        with self._timed("fit_svr"):
            svr = fit_svr(X[train], y[train], self.config.svr)
        with self._timed("predict_svr"):
            svr_pred = predict_svr(svr, X[test])
        save_svr(svr, models / "svr.npz", self.config.svr)

        with self._timed("fit_mlp"):
            mlp = fit_mlp(X[train], y[train], mlp_params)
        with self._timed("predict_mlp"):
            mlp_pred = predict_mlp(mlp, X[test])
        save_mlp(mlp, models / "mlp.npz", mlp_params)

        test_names = [names[i] for i in test]
        reports = []
        for model, predictions in (("svr", svr_pred), ("mlp", mlp_pred)):
            reports.append(evaluate(model, y[test], predictions, manifest))
            write_predictions_csv(
                test_names, y[test], predictions, self.out / f"predictions_{model}.csv"
            )
            if self.config.write_plots:
                plots = self.out / ARTIFACT_PLOTS_DIR
                plot_scatter(y[test], predictions, model, plots / f"scatter_{model}.svg")
                plot_sorted(y[test], predictions, model, plots / f"sorted_{model}.svg")
        if self.config.write_plots:
            plot_ci_comparison(reports, self.out / ARTIFACT_PLOTS_DIR / "ci_comparison.svg")

        write_reports_json(reports, self.out / ARTIFACT_REPORT_JSON)
        write_reports_csv(reports, self.out / ARTIFACT_REPORT_CSV)
        for report in reports:
            LOGGER.info(
                "%s: MSE %.6g, R2 %.6g, EVS %.6g on %d test flip-flops",
                report.model,
                report.mse,
                report.r2,
                report.evs,
                report.n_test,
            )

        if self.config.sweep_fractions:
            self.sweep(X, y, mlp_params)
        return reports

    def sweep(self, X: np.ndarray, y: np.ndarray, mlp_params: MlpParams) -> Path:
        """Test metrics of both models for every configured train fraction."""
        rows = []
        for fraction in self.config.sweep_fractions:
            train, test = split_dataset(len(y), fraction, self.config.split_seed)
            svr = fit_svr(X[train], y[train], self.config.svr)
            mlp = fit_mlp(X[train], y[train], mlp_params)
            for model, predictions in (
                ("svr", predict_svr(svr, X[test])),
                ("mlp", predict_mlp(mlp, X[test])),
            ):
                rows.append(
                    {
                        "model": model,
                        "train_fraction": fraction,
                        "n_train": len(train),
                        "n_test": len(test),
                        "mse": mse(y[test], predictions),
                        "r2": r2(y[test], predictions),
                        "evs": evs(y[test], predictions),
                    }
                )
        path = self.out / ARTIFACT_SWEEP
        pd.DataFrame(rows).to_csv(
            path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
        )
        LOGGER.info("Wrote %s: %d fractions", path, len(self.config.sweep_fractions))
        return path

    def run_all(self) -> list[RegressionReport]:
        """Every stage in order."""
        self.cmd_graph()
        self.cmd_embed()
        self.cmd_campaign()
        return self.cmd_train_eval()

    def run(self, command: str) -> ExitCode:
        """Run one subcommand and translate failures into an exit code."""
        commands = {
            "graph": self.cmd_graph,
            "embed": self.cmd_embed,
            "campaign": self.cmd_campaign,
            "train-eval": self.cmd_train_eval,
            "all": self.run_all,
        }
        try:
            commands[command]()
        except (DeratingError, OSError) as exception:
            code = exit_code_for(exception)
            LOGGER.error("%s failed (exit %d): %s", command, code, exception)
            return code
        finally:
            if self.timings:
                self.write_timing()
        return ExitCode.OK
