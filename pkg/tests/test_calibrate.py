import math

import numpy as np
import pytest

from splicefuse.calibrate import SigmoidCalibrator, fit_sigmoid, sigmoid
from splicefuse.errors import CalibrationError


# --- independent oracle ------------------------------------------------------

def platt_targets(labels):
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    return np.where(labels == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))


def nll_oracle(a, b, f, t):
    """Plain-math negative log-likelihood of the fitted sigmoid."""
    total = 0.0
    for fi, ti in zip(f, t):
        z = a * fi + b
        p = 1.0 / (1.0 + math.exp(z)) if z < 35 else math.exp(-z)
        p = min(max(p, 1e-300), 1 - 1e-16)
        total -= ti * math.log(p) + (1 - ti) * math.log(1 - p)
    return total


def grid_minimum(f, t, span=10.0, steps=200):
    """Brute-force loss minimum over (A, B) in [-span, span]^2."""
    grid = np.linspace(-span, span, steps)
    best = math.inf
    for a in grid:
        for b in grid:
            z = np.asarray(a * f + b)
            per = np.where(z >= 0, t * z + np.log1p(np.exp(-np.abs(z))),
                           (t - 1) * z + np.log1p(np.exp(-np.abs(z))))
            best = min(best, float(per.sum()))
    return best


class TestSigmoid:
    def test_flat_when_a_and_b_zero(self):
        cal = SigmoidCalibrator(a=0.0, b=0.0)
        for f in (-100.0, -1.0, 0.0, 3.0, 500.0):
            assert sigmoid(cal, f) == 0.5

    def test_unit_a_at_zero(self):
        assert sigmoid(SigmoidCalibrator(a=1.0, b=0.0), 0.0) == 0.5

    def test_minus_two_slope_value(self):
        # p(1) = 1/(1 + exp(-2))
        expected = 1.0 / (1.0 + math.exp(-2.0))
        assert sigmoid(SigmoidCalibrator(a=-2.0, b=0.0), 1.0) == pytest.approx(
            expected, abs=1e-12)
        assert round(expected, 4) == 0.8808

    def test_overflow_safe_and_strictly_inside_unit_interval(self):
        cal = SigmoidCalibrator(a=1.0, b=0.0)
        for f in (-1000.0, -50.0, 50.0, 1000.0):
            p = sigmoid(cal, f)
            assert 0.0 < p < 1.0

    def test_vectorized(self):
        cal = SigmoidCalibrator(a=-1.0, b=0.5)
        f = np.array([-2.0, 0.0, 2.0])
        out = sigmoid(cal, f)
        assert out.shape == (3,)
        assert np.all(np.diff(out) > 0)   # increasing for a < 0

    def test_monotone_increasing_for_negative_a(self):
        rng = np.random.default_rng(0)
        cal = SigmoidCalibrator(a=-1.7, b=0.3)
        f = np.sort(rng.uniform(-20, 20, 100))
        p = sigmoid(cal, f)
        assert np.all(np.diff(p) > 0)

    def test_range_property_randomized(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            cal = SigmoidCalibrator(a=float(rng.uniform(-50, 50)),
                                    b=float(rng.uniform(-50, 50)))
            p = sigmoid(cal, float(rng.uniform(-100, 100)))
            assert 0.0 < p < 1.0


class TestFitSigmoid:
    def test_separated_values(self):
        f = np.concatenate([np.ones(10), -np.ones(10)])
        y = np.array([1] * 10 + [0] * 10)
        cal = fit_sigmoid(f, y)
        assert cal.converged
        assert cal.a < 0
        assert sigmoid(cal, 1.0) > 0.9 > 0.5 > sigmoid(cal, -1.0)

    def test_newton_beats_grid_on_three_datasets(self):
        rng = np.random.default_rng(2)
        datasets = []
        f = np.concatenate([np.ones(10), -np.ones(10)])
        y = np.array([1] * 10 + [0] * 10)
        datasets.append((f, y))
        f = np.concatenate([rng.normal(1.0, 1.2, 40), rng.normal(-1.0, 1.2, 40)])
        y = np.array([1] * 40 + [0] * 40)
        datasets.append((f, y))
        f = np.concatenate([rng.normal(0.5, 2.0, 60), rng.normal(-0.2, 2.0, 20)])
        y = np.array([1] * 60 + [0] * 20)
        datasets.append((f, y))
        for f, y in datasets:
            cal = fit_sigmoid(f, y)
            t = platt_targets(y)
            newton_loss = nll_oracle(cal.a, cal.b, f, t)
            assert newton_loss <= grid_minimum(f, t) + 1e-6

    def test_antisymmetric_data_centers_at_zero(self):
        rng = np.random.default_rng(3)
        f_half = rng.uniform(0.2, 3.0, 25)
        f = np.concatenate([f_half, -f_half])
        y = np.array([1] * 25 + [0] * 25)
        cal = fit_sigmoid(f, y)
        assert abs(cal.b) < 1e-6

    def test_uninformative_values_recover_prior(self):
        # every decision value carries one label of each class: the optimum
        # is the constant prior p = 1/2, i.e. A = B = 0
        rng = np.random.default_rng(4)
        base = rng.uniform(-3, 3, 30)
        f = np.concatenate([base, base])
        y = np.array([1] * 30 + [0] * 30)
        cal = fit_sigmoid(f, y)
        assert abs(cal.a) < 1e-6
        assert abs(cal.b) < 1e-6
        assert sigmoid(cal, 0.7) == pytest.approx(0.5, abs=1e-6)

    def test_loss_never_worse_than_prior_only_solution(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n_pos = int(rng.integers(3, 30))
            n_neg = int(rng.integers(3, 30))
            f = rng.normal(0, 2, n_pos + n_neg)
            y = np.array([1] * n_pos + [0] * n_neg)
            cal = fit_sigmoid(f, y)
            t = platt_targets(y)
            prior_b = math.log((n_neg + 1.0) / (n_pos + 1.0))
            assert nll_oracle(cal.a, cal.b, f, t) <= nll_oracle(0.0, prior_b, f, t) + 1e-9

    def test_single_class_rejected(self):
        with pytest.raises(CalibrationError):
            fit_sigmoid([0.5, 1.0], [1, 1])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            fit_sigmoid([0.5], [1, 0])

    def test_serialization_roundtrip(self):
        cal = SigmoidCalibrator(a=-1.25, b=0.0625)
        line = cal.serialize("wavelet")
        assert line == "SIGMOID v1 tool=wavelet A=-1.25 B=0.0625\n"
        tool, loaded = SigmoidCalibrator.deserialize(line)
        assert tool == "wavelet"
        assert loaded.a == cal.a and loaded.b == cal.b
