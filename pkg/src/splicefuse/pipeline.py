"""End-to-end orchestration: extract, train, evaluate, predict.

The experiment grid is (run, k): for every split plan and every feature
count, each tool's features are reduced by boosting selection, classified by
a grid-searched RBF SVM, calibrated to probabilities, and fused by the
neuro-fuzzy model trained on the run's training split.  Every (run, k) cell
persists a self-contained bundle; a failure in one cell is recorded and
never blocks the others.
"""

from __future__ import annotations

import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import anfis as anfis_mod
from . import svm as svm_mod
from .boostsel import ALL_FEATURES, SelectionResult, select_features
from .calibrate import SigmoidCalibrator, fit_sigmoid, sigmoid
from .dataset import ImageBlock, TRAIN_FRACTION, load_corpus, make_splits, read_block_pixels
from .errors import SpliceFuseError
from .evaluate import COLUMNS, ConfusionCounts, RunReport, aggregate_runs, confusion
from .features import (TOOL_ORDER, Tool, read_feature_csv, tool_features,
                       write_feature_csv)

OUT_ENV_VAR = "SPLICEFUSE_OUT"
DEFAULT_FEATURE_COUNTS = (30, 50, 75, 100, ALL_FEATURES)
TOOL_COLUMN = {Tool.WAVELET: "dwt", Tool.GLCM_EDGE: "edge_glcm",
               Tool.RUN_LENGTH: "run_length"}

EXIT_AUTHENTIC = 0
EXIT_ERROR = 1
EXIT_FORGED = 2


def k_label(k) -> str:
    return "All" if k is ALL_FEATURES else str(k)


def _parse_number(token: str) -> float:
    token = token.strip()
    if "^" in token:
        base, exponent = token.split("^", 1)
        return float(base) ** float(exponent)
    return float(token)


def _parse_feature_counts(text: str) -> tuple:
    counts = []
    for token in text.split(","):
        token = token.strip()
        counts.append(ALL_FEATURES if token.lower() == "all" else int(token))
    return tuple(counts)


@dataclass(frozen=True)
class PipelineConfig:
    """All protocol constants plus artifact locations, key=value persistable."""

    dataset_root: str = ""
    out_dir: str = ""
    seed: int = 0
    runs: int = 5
    train_fraction: float = TRAIN_FRACTION
    feature_counts: tuple = DEFAULT_FEATURE_COUNTS
    svm_c_grid: tuple = svm_mod.DEFAULT_C_GRID
    svm_gamma_grid: tuple = svm_mod.DEFAULT_GAMMA_GRID
    cv_folds: int = 5
    svm_tol: float = svm_mod.DEFAULT_TOL
    svm_max_iter: int = svm_mod.DEFAULT_MAX_ITER
    anfis_radius: float = anfis_mod.DEFAULT_RADIUS
    anfis_epochs: int = anfis_mod.DEFAULT_EPOCHS
    anfis_consequent: str = "linear"
    anfis_learning_rate: float = anfis_mod.DEFAULT_LEARNING_RATE
    threshold: float = 0.5
    aggregation: str = "best"
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        for k in self.feature_counts:
            if k is not ALL_FEATURES and k < 1:
                raise ValueError("feature counts must be >= 1 or All")
        if self.aggregation not in ("best", "mean"):
            raise ValueError("aggregation must be 'best' or 'mean'")
        if self.anfis_consequent not in anfis_mod.CONSEQUENT_TYPES:
            raise ValueError(f"anfis_consequent must be one of {anfis_mod.CONSEQUENT_TYPES}")

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        values = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        kwargs = {}
        for key, value in values.items():
            if key in ("dataset_root", "out_dir", "anfis_consequent", "aggregation"):
                kwargs[key] = value
            elif key in ("seed", "runs", "cv_folds", "svm_max_iter",
                         "anfis_epochs", "workers"):
                kwargs[key] = int(value)
            elif key in ("train_fraction", "svm_tol", "anfis_radius",
                         "anfis_learning_rate", "threshold"):
                kwargs[key] = float(value)
            elif key == "feature_counts":
                kwargs[key] = _parse_feature_counts(value)
            elif key in ("svm_c_grid", "svm_gamma_grid"):
                kwargs[key] = tuple(_parse_number(tok) for tok in value.split(","))
            else:
                raise ValueError(f"unknown config key: {key}")
        return cls(**kwargs)

    def to_file(self, path) -> None:
        lines = [
            "# splicefuse pipeline configuration",
            f"dataset_root = {self.dataset_root}",
            f"out_dir = {self.out_dir}",
            f"seed = {self.seed}",
            f"runs = {self.runs}",
            f"train_fraction = {self.train_fraction!r}",
            "feature_counts = " + ",".join(k_label(k) for k in self.feature_counts),
            "svm_c_grid = " + ",".join(repr(float(c)) for c in self.svm_c_grid),
            "svm_gamma_grid = " + ",".join(repr(float(g)) for g in self.svm_gamma_grid),
            f"cv_folds = {self.cv_folds}",
            f"svm_tol = {self.svm_tol!r}",
            f"svm_max_iter = {self.svm_max_iter}",
            f"anfis_radius = {self.anfis_radius!r}",
            f"anfis_epochs = {self.anfis_epochs}",
            f"anfis_consequent = {self.anfis_consequent}",
            f"anfis_learning_rate = {self.anfis_learning_rate!r}",
            f"threshold = {self.threshold!r}",
            f"aggregation = {self.aggregation}",
            f"workers = {self.workers}",
        ]
        Path(path).write_text("\n".join(lines) + "\n")

    def resolve_out_dir(self) -> Path:
        if self.out_dir:
            return Path(self.out_dir)
        env = os.environ.get(OUT_ENV_VAR)
        if env:
            return Path(env)
        return Path("splicefuse-out")


def feature_csv_path(out_dir: Path, tool: Tool) -> Path:
    return Path(out_dir) / f"features_{tool.value}.csv"


def bundle_dir_name(run_index: int, k) -> str:
    return f"run{run_index}_k{k_label(k)}"


# ---------------------------------------------------------------------------
# extract


def cmd_extract(config: PipelineConfig) -> dict:
    """Load the corpus and write one feature CSV per tool plus the load report."""
    out = config.resolve_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    corpus, report = load_corpus(config.dataset_root)
    (out / "load_report.txt").write_text(
        "".join(line + "\n" for line in report.lines())
    )
    labels = [block.label for block in corpus]
    paths = {}
    for tool in TOOL_ORDER:
        vectors = [tool_features(block, tool) for block in corpus]
        path = feature_csv_path(out, tool)
        write_feature_csv(path, tool, vectors, labels)
        paths[tool] = path
    return {"corpus_size": len(corpus), "rejected": len(report.rejected),
            "csv_paths": paths}


# ---------------------------------------------------------------------------
# train


class _CorpusEntry(NamedTuple):
    id: str
    label: int


@dataclass
class ExperimentBundle:
    """Self-contained artifacts of one (run, k) cell; prediction needs nothing else."""

    run_index: int
    k: object
    threshold: float
    selections: dict        # Tool -> SelectionResult
    svms: dict              # Tool -> SvmModel
    calibrators: dict       # Tool -> SigmoidCalibrator
    fusion: anfis_mod.AnfisModel
    report: RunReport
    train_ids: tuple = ()
    test_ids: tuple = ()

    def predict_pixels(self, pixels) -> tuple[int, float, dict, dict]:
        """Verdict (1 authentic / 0 forged), fused value, per-tool probabilities and decisions."""
        block = ImageBlock(id="query", pixels=pixels, label=1)
        probabilities = {}
        decisions = {}
        for tool in TOOL_ORDER:
            vector = tool_features(block, tool)
            selected = np.asarray(vector.values)[list(self.selections[tool].indices)]
            f = svm_mod.decision_value(self.svms[tool], selected)
            decisions[tool] = f
            probabilities[tool] = float(sigmoid(self.calibrators[tool], f))
        scores = [probabilities[tool] for tool in TOOL_ORDER]
        verdict, fused_value = anfis_mod.fused_verdict(self.fusion, scores,
                                                       self.threshold)
        return verdict, fused_value, probabilities, decisions

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "bundle.txt").write_text(
            f"BUNDLE v1 run={self.run_index} k={k_label(self.k)} "
            f"threshold={self.threshold!r}\n"
        )
        for tool in TOOL_ORDER:
            (directory / f"selection_{tool.value}.txt").write_text(
                self.selections[tool].serialize()
            )
            svm_mod.save_model(self.svms[tool], directory / f"svm_{tool.value}.txt")
        (directory / "calibrators.txt").write_text(
            "".join(self.calibrators[tool].serialize(tool.value) for tool in TOOL_ORDER)
        )
        anfis_mod.save_model(self.fusion, directory / "anfis.txt")
        (directory / "report.txt").write_text(self.report.serialize())
        split_lines = [f"SPLIT v1 run={self.run_index}"]
        split_lines += [f"train {i}" for i in self.train_ids]
        split_lines += [f"test {i}" for i in self.test_ids]
        (directory / "split.txt").write_text("\n".join(split_lines) + "\n")

    @classmethod
    def load(cls, directory) -> "ExperimentBundle":
        directory = Path(directory)
        header = (directory / "bundle.txt").read_text().split()
        if header[:2] != ["BUNDLE", "v1"]:
            raise ValueError(f"{directory}: not a v1 bundle")
        fields = dict(p.split("=", 1) for p in header[2:])
        k = ALL_FEATURES if fields["k"] == "All" else int(fields["k"])
        selections = {}
        svms = {}
        for tool in TOOL_ORDER:
            selections[tool] = SelectionResult.deserialize(
                (directory / f"selection_{tool.value}.txt").read_text()
            )
            svms[tool] = svm_mod.load_model(directory / f"svm_{tool.value}.txt")
        calibrators = {}
        for line in (directory / "calibrators.txt").read_text().splitlines():
            tool_name, calibrator = SigmoidCalibrator.deserialize(line)
            calibrators[Tool(tool_name)] = calibrator
        fusion = anfis_mod.load_model(directory / "anfis.txt")
        report = RunReport.deserialize((directory / "report.txt").read_text())
        train_ids, test_ids = [], []
        for line in (directory / "split.txt").read_text().splitlines()[1:]:
            kind, block_id = line.split(" ", 1)
            (train_ids if kind == "train" else test_ids).append(block_id)
        return cls(run_index=int(fields["run"]), k=k,
                   threshold=float(fields["threshold"]), selections=selections,
                   svms=svms, calibrators=calibrators, fusion=fusion,
                   report=report, train_ids=tuple(train_ids),
                   test_ids=tuple(test_ids))


@dataclass
class CellOutcome:
    run_index: int
    k: object
    status: str             # "ok" | "failed"
    bundle_dir: str = ""
    error: str = ""


def _run_cell(config: PipelineConfig, tool_data: dict, plan, k_index: int) -> CellOutcome:
    """Train and evaluate one (run, k) cell; exceptions become a failed outcome."""
    k = config.feature_counts[k_index]
    out = config.resolve_out_dir()
    cell_dir = out / "bundles" / bundle_dir_name(plan.run_index, k)
    try:
        ids, labels, _ = tool_data[Tool.WAVELET]
        row_of = {block_id: row for row, block_id in enumerate(ids)}
        train_rows = np.array([row_of[i] for i in plan.train_ids])
        test_rows = np.array([row_of[i] for i in plan.test_ids])
        y_train = labels[train_rows]
        y_test = labels[test_rows]

        selections = {}
        svms = {}
        calibrators = {}
        p_train = {}
        p_test = {}
        for tool_index, tool in enumerate(TOOL_ORDER):
            _, _, matrix = tool_data[tool]
            selection = select_features(matrix[train_rows], y_train, k,
                                        tool=tool.value)
            selected = selection.apply(matrix)
            x_train = selected[train_rows]
            x_test = selected[test_rows]
            grid = svm_mod.grid_search(
                x_train, y_train, config.svm_c_grid, config.svm_gamma_grid,
                folds=config.cv_folds,
                seed=[config.seed, plan.run_index, k_index, tool_index],
                tol=config.svm_tol, max_iter=config.svm_max_iter,
            )
            model = svm_mod.train_svm(x_train, y_train, grid.best,
                                      tol=config.svm_tol,
                                      max_iter=config.svm_max_iter)
            f_train = svm_mod.decision_values(model, x_train)
            calibrator = fit_sigmoid(f_train, y_train)
            selections[tool] = selection
            svms[tool] = model
            calibrators[tool] = calibrator
            p_train[tool] = np.asarray(sigmoid(calibrator, f_train))
            p_test[tool] = np.asarray(
                sigmoid(calibrator, svm_mod.decision_values(model, x_test))
            )

        train_scores = np.column_stack([p_train[tool] for tool in TOOL_ORDER])
        fusion = anfis_mod.init_fis(
            np.column_stack([train_scores, y_train.astype(float)]),
            radius=config.anfis_radius, consequent_type=config.anfis_consequent,
        )
        anfis_mod.train_hybrid(
            fusion, np.column_stack([train_scores, y_train.astype(float)]),
            epochs=config.anfis_epochs, learning_rate=config.anfis_learning_rate,
        )

        test_scores = np.column_stack([p_test[tool] for tool in TOOL_ORDER])
        fused_values = anfis_mod.fis_eval_batch(fusion, test_scores)
        cells = {}
        for tool in TOOL_ORDER:
            verdicts = (p_test[tool] > config.threshold).astype(int)
            cells[TOOL_COLUMN[tool]] = confusion(verdicts, y_test)
        fused_verdicts = (fused_values > config.threshold).astype(int)
        cells["nfis"] = confusion(fused_verdicts, y_test)
        report = RunReport(run_index=plan.run_index, k=k, cells=cells)

        bundle = ExperimentBundle(
            run_index=plan.run_index, k=k, threshold=config.threshold,
            selections=selections, svms=svms, calibrators=calibrators,
            fusion=fusion, report=report, train_ids=plan.train_ids,
            test_ids=plan.test_ids,
        )
        bundle.save(cell_dir)
        (cell_dir / "status.txt").write_text("ok\n")
        return CellOutcome(run_index=plan.run_index, k=k, status="ok",
                           bundle_dir=str(cell_dir))
    except Exception as exc:  # cell isolation: record and move on
        cell_dir.mkdir(parents=True, exist_ok=True)
        detail = f"failed {type(exc).__name__}: {exc}\n"
        (cell_dir / "status.txt").write_text(detail + traceback.format_exc())
        return CellOutcome(run_index=plan.run_index, k=k, status="failed",
                           bundle_dir=str(cell_dir), error=str(exc))


def cmd_train(config: PipelineConfig) -> list[CellOutcome]:
    """Train every (run, k) cell from previously extracted feature CSVs."""
    out = config.resolve_out_dir()
    tool_data = {}
    for tool in TOOL_ORDER:
        path = feature_csv_path(out, tool)
        if not path.is_file():
            raise SpliceFuseError(f"missing feature CSV {path}; run extract first")
        tool_data[tool] = read_feature_csv(path)
    reference_ids, reference_labels, _ = tool_data[Tool.WAVELET]
    for tool in TOOL_ORDER:
        ids, labels, _ = tool_data[tool]
        if ids != reference_ids or not np.array_equal(labels, reference_labels):
            raise SpliceFuseError(f"feature CSVs disagree on corpus ids/labels ({tool.value})")

    entries = [_CorpusEntry(i, int(label))
               for i, label in zip(reference_ids, reference_labels)]
    plans = make_splits(entries, config.seed, config.runs, config.train_fraction)
    cells = [(plan, k_index) for plan in plans
             for k_index in range(len(config.feature_counts))]

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(
                _run_cell,
                [config] * len(cells),
                [tool_data] * len(cells),
                [plan for plan, _ in cells],
                [k_index for _, k_index in cells],
            ))
    else:
        outcomes = [_run_cell(config, tool_data, plan, k_index)
                    for plan, k_index in cells]

    summary_lines = [
        f"{outcome.run_index},{k_label(outcome.k)},{outcome.status},{outcome.error}"
        for outcome in outcomes
    ]
    (out / "train_outcomes.csv").write_text(
        "run,k,status,error\n" + "\n".join(summary_lines) + "\n"
    )
    return outcomes


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(config: PipelineConfig) -> dict:
    """Aggregate the per-cell reports into the sensitivity and specificity tables."""
    out = config.resolve_out_dir()
    reports = []
    for plan_run in range(1, config.runs + 1):
        for k in config.feature_counts:
            cell_dir = out / "bundles" / bundle_dir_name(plan_run, k)
            status_path = cell_dir / "status.txt"
            if not status_path.is_file():
                continue
            if not status_path.read_text().startswith("ok"):
                continue
            reports.append(RunReport.deserialize((cell_dir / "report.txt").read_text()))
    paths = {}
    for metric in ("sensitivity", "specificity"):
        table = aggregate_runs(reports, mode=config.aggregation, metric=metric,
                               k_values=config.feature_counts)
        path = out / f"{metric}.csv"
        path.write_text(table.to_csv_text())
        paths[metric] = path
    return {"reports": len(reports), "paths": paths}


# ---------------------------------------------------------------------------
# predict


@dataclass
class PredictOutcome:
    exit_code: int
    lines: list[str]


def cmd_predict(bundle_dir, image_path, threshold: float | None = None) -> PredictOutcome:
    """Classify one image block with a persisted bundle.

    Exit code 0 for authentic, 2 for forged, 1 on any error.
    """
    try:
        bundle = ExperimentBundle.load(bundle_dir)
        pixels = read_block_pixels(image_path)
        if threshold is not None:
            bundle.threshold = threshold
        verdict, fused_value, probabilities, _ = bundle.predict_pixels(pixels)
    except Exception as exc:
        return PredictOutcome(exit_code=EXIT_ERROR,
                              lines=[f"error: {type(exc).__name__}: {exc}"])
    lines = [f"p_{tool.value}={probabilities[tool]!r}" for tool in TOOL_ORDER]
    lines.append(f"fused={fused_value!r}")
    lines.append(f"verdict={'authentic' if verdict == 1 else 'forged'}")
    return PredictOutcome(
        exit_code=EXIT_AUTHENTIC if verdict == 1 else EXIT_FORGED,
        lines=lines,
    )
