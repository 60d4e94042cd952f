import numpy as np
import pytest

from splicefuse.errors import ShapeError, UndefinedRateError
from splicefuse.evaluate import (COLUMNS, ConfusionCounts, RunReport,
                                 aggregate_runs, confusion, sensitivity,
                                 specificity)


def naive_confusion(verdicts, labels):
    """Brute-force counting loop; positive = forged (label 0)."""
    tp = fp = tn = fn = 0
    for v, y in zip(verdicts, labels):
        if v == 0 and y == 0:
            tp += 1
        elif v == 0 and y == 1:
            fp += 1
        elif v == 1 and y == 1:
            tn += 1
        else:
            fn += 1
    return tp, fp, tn, fn


class TestConfusion:
    def test_all_forged_all_detected(self):
        c = confusion([0] * 7, [0] * 7)
        assert (c.tp, c.fp, c.tn, c.fn) == (7, 0, 0, 0)

    def test_complement_verdicts(self):
        labels = [0, 1, 0, 1]
        verdicts = [1, 0, 1, 0]
        c = confusion(verdicts, labels)
        assert c.tp == 0 and c.tn == 0
        assert c.fp == 2 and c.fn == 2

    def test_randomized_matches_naive_loop(self):
        rng = np.random.default_rng(0)
        verdicts = rng.integers(0, 2, 50)
        labels = rng.integers(0, 2, 50)
        c = confusion(verdicts, labels)
        assert (c.tp, c.fp, c.tn, c.fn) == naive_confusion(verdicts, labels)

    def test_totals_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(1, 60))
            verdicts = rng.integers(0, 2, n)
            labels = rng.integers(0, 2, n)
            c = confusion(verdicts, labels)
            assert c.total == n
            assert c.tp + c.fn == int((labels == 0).sum())
            assert c.tn + c.fp == int((labels == 1).sum())

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        verdicts = rng.integers(0, 2, 30)
        labels = rng.integers(0, 2, 30)
        perm = rng.permutation(30)
        assert confusion(verdicts, labels) == confusion(verdicts[perm], labels[perm])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            confusion([0, 1], [0])

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError):
            confusion([0, 2], [0, 1])


class TestRates:
    def test_sensitivity_table_value(self):
        # tp=71, fn=11 reproduces the 86.59% fused cell at 75 features
        value = sensitivity(ConfusionCounts(tp=71, fp=0, tn=0, fn=11))
        assert value == pytest.approx(71 / 82)
        assert round(value * 100, 2) == 86.59

    def test_specificity_table_value(self):
        # tn=137, fp=13 reproduces the 91.33% fused cell at All features
        value = specificity(ConfusionCounts(tp=0, fp=13, tn=137, fn=0))
        assert value == pytest.approx(137 / 150)
        assert round(value * 100, 2) == 91.33

    def test_degenerate_rates(self):
        assert sensitivity(ConfusionCounts(tp=0, fp=0, tn=0, fn=5)) == 0.0
        assert sensitivity(ConfusionCounts(tp=4, fp=0, tn=0, fn=0)) == 1.0
        assert specificity(ConfusionCounts(tp=0, fp=3, tn=0, fn=0)) == 0.0
        assert specificity(ConfusionCounts(tp=0, fp=0, tn=9, fn=0)) == 1.0

    def test_zero_denominators_raise(self):
        with pytest.raises(UndefinedRateError):
            sensitivity(ConfusionCounts(tp=0, fp=1, tn=1, fn=0))
        with pytest.raises(UndefinedRateError):
            specificity(ConfusionCounts(tp=1, fp=0, tn=0, fn=1))

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(tp=-1, fp=0, tn=0, fn=0)


def _report(run_index, k, nfis_sens, n=100):
    tp = round(nfis_sens * n)
    cells = {column: ConfusionCounts(tp=tp, fp=5, tn=45, fn=n - tp)
             for column in COLUMNS}
    return RunReport(run_index=run_index, k=k, cells=cells)


class TestAggregateRuns:
    def test_single_run_equals_itself(self):
        report = _report(1, 30, 0.8)
        table = aggregate_runs([report], mode="best", metric="sensitivity")
        assert table.value(30, "nfis") == pytest.approx(0.8)

    def test_best_takes_max(self):
        table = aggregate_runs([_report(1, 30, 0.80), _report(2, 30, 0.86)],
                               mode="best", metric="sensitivity")
        assert table.value(30, "nfis") == pytest.approx(0.86)

    def test_mean_takes_average(self):
        table = aggregate_runs([_report(1, 50, 0.80), _report(2, 50, 0.90)],
                               mode="mean", metric="sensitivity")
        assert table.value(50, "nfis") == pytest.approx(0.85)

    def test_single_run_best_equals_mean(self):
        report = _report(3, None, 0.75)
        best = aggregate_runs([report], mode="best", metric="sensitivity")
        mean = aggregate_runs([report], mode="mean", metric="sensitivity")
        assert best.cells == mean.cells

    def test_k_ordering_all_last(self):
        reports = [_report(1, k, 0.5) for k in (None, 75, 30)]
        table = aggregate_runs(reports, mode="best", metric="specificity")
        assert table.k_values == (30, 75, None)
        lines = table.to_csv_text().splitlines()
        assert lines[0] == "features,DWT,EdgeGLCM,RunLength,NFIS"
        assert lines[1].startswith("30,")
        assert lines[-1].startswith("All,")

    def test_missing_cells_emit_na(self):
        table = aggregate_runs([_report(1, 30, 0.8)], mode="best",
                               metric="sensitivity", k_values=(30, 50))
        assert table.value(50, "nfis") is None
        assert ",NA,NA,NA,NA" in table.to_csv_text().splitlines()[2]

    def test_report_serialization_roundtrip(self):
        report = _report(2, None, 0.9)
        text = report.serialize()
        assert text.splitlines()[0] == "RUNREPORT v1 run=2 k=All"
        assert RunReport.deserialize(text) == report

    def test_rejects_unknown_modes(self):
        with pytest.raises(ValueError):
            aggregate_runs([_report(1, 30, 0.5)], mode="median")
        with pytest.raises(ValueError):
            aggregate_runs([_report(1, 30, 0.5)], metric="accuracy")
