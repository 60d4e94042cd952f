"""Confusion counting, sensitivity/specificity, and cross-run aggregation.

The positive class is "forged" (label 0): a true positive is a forged block
detected as forged, so sensitivity = TP / (all forged in the test set) and
specificity = TN / (all authentic in the test set).  Verdicts and labels use
the corpus encoding 1 = authentic, 0 = forged throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, UndefinedRateError

COLUMNS = ("dwt", "edge_glcm", "run_length", "nfis")
COLUMN_TITLES = {"dwt": "DWT", "edge_glcm": "EdgeGLCM",
                 "run_length": "RunLength", "nfis": "NFIS"}
METRICS = ("sensitivity", "specificity")
AGGREGATION_MODES = ("best", "mean")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(verdicts, labels) -> ConfusionCounts:
    """Count outcomes with positive = forged; inputs use 1=authentic, 0=forged."""
    v = np.asarray(verdicts)
    y = np.asarray(labels)
    if v.shape != y.shape:
        raise ShapeError(f"verdicts and labels differ in length: {v.shape} vs {y.shape}")
    for name, arr in (("verdicts", v), ("labels", y)):
        if set(np.unique(arr).tolist()) - {0, 1}:
            raise ValueError(f"{name} must be binary {{0, 1}}")
    return ConfusionCounts(
        tp=int(((v == 0) & (y == 0)).sum()),
        fp=int(((v == 0) & (y == 1)).sum()),
        tn=int(((v == 1) & (y == 1)).sum()),
        fn=int(((v == 1) & (y == 0)).sum()),
    )


def sensitivity(c: ConfusionCounts) -> float:
    """TP / (TP + FN): the proportion of forged blocks that were flagged."""
    denom = c.tp + c.fn
    if denom == 0:
        raise UndefinedRateError("no forged samples: sensitivity is undefined")
    return c.tp / denom


def specificity(c: ConfusionCounts) -> float:
    """TN / (TN + FP): the proportion of authentic blocks that were cleared."""
    denom = c.tn + c.fp
    if denom == 0:
        raise UndefinedRateError("no authentic samples: specificity is undefined")
    return c.tn / denom


_RATE_FUNCS = {"sensitivity": sensitivity, "specificity": specificity}


@dataclass(frozen=True)
class RunReport:
    """Per-run confusion counts for each tool column and the fused column."""

    run_index: int
    k: int | None              # None means the All-features row
    cells: dict[str, ConfusionCounts]

    def __post_init__(self):
        unknown = set(self.cells) - set(COLUMNS)
        if unknown:
            raise ValueError(f"unknown report columns: {sorted(unknown)}")

    def rate(self, column: str, metric: str) -> float:
        return _RATE_FUNCS[metric](self.cells[column])

    def serialize(self) -> str:
        k_label = "All" if self.k is None else str(self.k)
        lines = [f"RUNREPORT v1 run={self.run_index} k={k_label}",
                 "column,tp,fp,tn,fn"]
        for column in COLUMNS:
            if column in self.cells:
                c = self.cells[column]
                lines.append(f"{column},{c.tp},{c.fp},{c.tn},{c.fn}")
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "RunReport":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split()
        if header[:2] != ["RUNREPORT", "v1"]:
            raise ValueError("not a v1 run report")
        fields = dict(p.split("=", 1) for p in header[2:])
        k = None if fields["k"] == "All" else int(fields["k"])
        cells = {}
        for line in lines[2:]:
            column, tp, fp, tn, fn = line.split(",")
            cells[column] = ConfusionCounts(tp=int(tp), fp=int(fp),
                                            tn=int(tn), fn=int(fn))
        return cls(run_index=int(fields["run"]), k=k, cells=cells)


@dataclass(frozen=True)
class SummaryTable:
    """One metric's 5x4-style table: rows are k values (All last), columns fixed."""

    metric: str
    mode: str
    k_values: tuple
    cells: dict          # (k, column) -> float | None

    def value(self, k, column: str):
        return self.cells.get((k, column))

    def to_csv_text(self) -> str:
        lines = ["features," + ",".join(COLUMN_TITLES[c] for c in COLUMNS)]
        for k in self.k_values:
            row = ["All" if k is None else str(k)]
            for column in COLUMNS:
                value = self.cells.get((k, column))
                row.append("NA" if value is None else repr(float(value)))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _sorted_k(k_values) -> tuple:
    numeric = sorted(k for k in k_values if k is not None)
    return tuple(numeric) + ((None,) if None in set(k_values) else ())


def aggregate_runs(reports, mode: str = "best", metric: str = "sensitivity",
                   k_values=None) -> SummaryTable:
    """Collapse per-run reports into one table cell per (k, column).

    ``best`` takes the max over runs, ``mean`` the arithmetic mean.  Cells
    with no surviving report are left as None (emitted as NA).
    """
    reports = list(reports)
    if mode not in AGGREGATION_MODES:
        raise ValueError(f"mode must be one of {AGGREGATION_MODES}")
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if not reports and k_values is None:
        raise ValueError("aggregate_runs needs at least one report")
    if k_values is None:
        k_values = {r.k for r in reports}
    ordered_k = _sorted_k(k_values)
    cells = {}
    for k in ordered_k:
        group = [r for r in reports if r.k == k]
        for column in COLUMNS:
            values = []
            for r in group:
                if column not in r.cells:
                    continue
                try:
                    values.append(r.rate(column, metric))
                except UndefinedRateError:
                    # a one-item test split can lack a class; that run
                    # contributes nothing to this metric
                    continue
            if not values:
                cells[(k, column)] = None
            elif mode == "best":
                cells[(k, column)] = max(values)
            else:
                cells[(k, column)] = sum(values) / len(values)
    return SummaryTable(metric=metric, mode=mode, k_values=ordered_k, cells=cells)
