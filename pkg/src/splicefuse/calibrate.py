"""Sigmoid calibration of SVM decision values into probabilities.

Fits p(f) = 1 / (1 + exp(A*f + B)) by Newton's method with backtracking on
the negative log-likelihood, using the smoothed targets
t+ = (N+ + 1)/(N+ + 2) and t- = 1/(N- + 2) so the optimum stays finite even
on separable data.  The fit starts from the prior-only solution
(A, B) = (0, log((N- + 1)/(N+ + 1))), so its loss can only improve on it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError

_GRAD_TOL = 1e-10
_MAX_NEWTON_ITER = 200
_MIN_STEP = 1e-10
_HESS_RIDGE = 1e-12

_P_FLOOR = np.finfo(float).tiny
_P_CEIL = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class SigmoidCalibrator:
    """The (A, B) pair mapping a decision value to a probability."""

    a: float
    b: float
    converged: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("calibrator parameters must be finite")

    def serialize(self, tool: str) -> str:
        return f"SIGMOID v1 tool={tool} A={self.a!r} B={self.b!r}\n"

    @classmethod
    def deserialize(cls, line: str) -> tuple[str, "SigmoidCalibrator"]:
        parts = line.split()
        if parts[:2] != ["SIGMOID", "v1"]:
            raise ValueError("not a v1 sigmoid calibrator line")
        fields = dict(p.split("=", 1) for p in parts[2:])
        return fields["tool"], cls(a=float(fields["A"]), b=float(fields["B"]))


def _stable_p(z: np.ndarray) -> np.ndarray:
    """1 / (1 + exp(z)) without overflow for any finite z."""
    q = np.exp(-np.abs(z))
    return np.where(z >= 0, q / (1.0 + q), 1.0 / (1.0 + q))


def sigmoid(calibrator: SigmoidCalibrator, f) -> np.ndarray | float:
    """1 / (1 + exp(A*f + B)), computed overflow-safely and kept inside (0, 1)."""
    z = calibrator.a * np.atleast_1d(np.asarray(f, dtype=float)) + calibrator.b
    out = np.clip(_stable_p(z), _P_FLOOR, _P_CEIL)
    return float(out[0]) if np.ndim(f) == 0 else out


def _negative_log_likelihood(a: float, b: float, f: np.ndarray, t: np.ndarray) -> float:
    z = a * f + b
    per_sample = np.where(
        z >= 0,
        t * z + np.log1p(np.exp(-np.abs(z))),
        (t - 1.0) * z + np.log1p(np.exp(-np.abs(z))),
    )
    return float(per_sample.sum())


def fit_sigmoid(decision_values, labels) -> SigmoidCalibrator:
    """Fit (A, B) on decision values with labels in {0, 1}.

    Raises on single-class input; on non-convergence the best iterate is
    returned with ``converged=False`` and a warning.
    """
    f = np.asarray(decision_values, dtype=float).ravel()
    y = np.asarray(labels).ravel()
    if f.shape != y.shape:
        raise ValueError("decision values and labels must have equal length")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos + n_neg != y.size:
        raise ValueError("labels must be binary {0, 1}")
    if n_pos == 0 or n_neg == 0:
        raise CalibrationError("calibration needs both classes among the labels")

    t_pos = (n_pos + 1.0) / (n_pos + 2.0)
    t_neg = 1.0 / (n_neg + 2.0)
    t = np.where(y == 1, t_pos, t_neg)

    a = 0.0
    b = float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    loss = _negative_log_likelihood(a, b, f, t)
    converged = False
    for _ in range(_MAX_NEWTON_ITER):
        p = _stable_p(a * f + b)
        d1 = t - p
        g_a = float((f * d1).sum())
        g_b = float(d1.sum())
        if max(abs(g_a), abs(g_b)) < _GRAD_TOL:
            converged = True
            break
        pq = p * (1.0 - p)
        h11 = float((f * f * pq).sum()) + _HESS_RIDGE
        h22 = float(pq.sum()) + _HESS_RIDGE
        h12 = float((f * pq).sum())
        det = h11 * h22 - h12 * h12
        da = -(h22 * g_a - h12 * g_b) / det
        db = -(-h12 * g_a + h11 * g_b) / det
        descent = g_a * da + g_b * db
        step = 1.0
        while step >= _MIN_STEP:
            new_a, new_b = a + step * da, b + step * db
            new_loss = _negative_log_likelihood(new_a, new_b, f, t)
            # non-strict: near the optimum the decrease falls below float
            # resolution while the Newton step still shrinks the gradient
            if new_loss <= loss + 1e-4 * step * descent:
                a, b, loss = new_a, new_b, new_loss
                break
            step /= 2.0
        else:
            break  # line search failed: keep the best iterate
    if not converged:
        warnings.warn("sigmoid calibration did not reach gradient tolerance; "
                      "returning the best iterate", RuntimeWarning, stacklevel=2)
    return SigmoidCalibrator(a=a, b=b, converged=converged)
