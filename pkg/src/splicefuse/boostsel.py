"""Boosting feature selection: one decision stump per round, one feature per stump.

Sample weights start uniform and are multiplied by beta = eps/(1-eps) on the
correctly classified samples after each round, then renormalized, so the
misclassified samples dominate the next stump search.  Each round's winning
feature is withdrawn from later rounds, giving exactly k distinct features
after k rounds (greedy, so the k=30 selection is a prefix of the k=50 one).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoostingFailureError, FeatureExhaustionError

ALL_FEATURES = None  # sentinel k meaning identity selection


@dataclass(frozen=True)
class StumpLearner:
    """Single-feature threshold classifier over labels in {0, 1}.

    Predicts 1 when ``polarity * (value - threshold) > 0``, else 0.
    """

    feature_index: int
    threshold: float
    polarity: int
    weighted_error: float

    def predict(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        column = x[:, self.feature_index] if x.ndim == 2 else x
        return (self.polarity * (column - self.threshold) > 0).astype(int)


@dataclass(frozen=True)
class SelectionResult:
    """Ordered selected feature indices for one tool at one k."""

    tool: str
    indices: tuple[int, ...]
    round_errors: tuple[float, ...]
    k: int | None

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("selected indices must be unique")

    def apply(self, features) -> np.ndarray:
        return np.asarray(features, dtype=float)[:, list(self.indices)]

    def serialize(self) -> str:
        k_label = "All" if self.k is ALL_FEATURES else str(self.k)
        lines = [",".join([self.tool, k_label] + [str(i) for i in self.indices])]
        lines.append("round,weighted_error")
        for round_index, err in enumerate(self.round_errors, start=1):
            lines.append(f"{round_index},{err!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "SelectionResult":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split(",")
        tool, k_label = head[0], head[1]
        k = ALL_FEATURES if k_label == "All" else int(k_label)
        indices = tuple(int(v) for v in head[2:])
        errors = tuple(float(ln.split(",")[1]) for ln in lines[2:])
        return cls(tool=tool, indices=indices, round_errors=errors, k=k)


def update_weights(weights, predictions, labels, beta: float) -> np.ndarray:
    """Multiply correct samples' weights by beta, then renormalize to sum 1."""
    w = np.asarray(weights, dtype=float)
    preds = np.asarray(predictions)
    y = np.asarray(labels)
    if not (w.shape == preds.shape == y.shape):
        raise ValueError("weights, predictions and labels must have equal shape")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    updated = np.where(preds == y, w * beta, w)
    total = updated.sum()
    if total <= 0.0:
        raise BoostingFailureError("all sample weights vanished during the update")
    return updated / total


def best_stump(features, labels, weights, excluded=frozenset()) -> StumpLearner:
    """Exhaustive stump search over the non-excluded features.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values of a feature.  Ties break to the lowest feature index, then the
    lowest threshold, then polarity +1.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    w = np.asarray(weights, dtype=float)
    if x.ndim != 2:
        raise ValueError("features must be a samples x d matrix")
    n, d = x.shape
    excluded = set(excluded)
    if len(excluded) >= d:
        raise FeatureExhaustionError("every feature is excluded from the stump search")
    if len(np.unique(y)) < 2:
        raise ValueError("stump search needs at least one sample of each class")

    best = None  # (error, feature, threshold, polarity)
    positive = (y == 1)
    for feature in range(d):
        if feature in excluded:
            continue
        order = np.argsort(x[:, feature], kind="stable")
        v = x[order, feature]
        w_pos = np.cumsum(w[order] * positive[order])
        w_neg = np.cumsum(w[order] * ~positive[order])
        total_pos, total_neg = w_pos[-1], w_neg[-1]
        cut = np.flatnonzero(v[:-1] < v[1:])
        if cut.size == 0:
            continue  # constant feature: no midpoint thresholds
        thresholds = (v[cut] + v[cut + 1]) / 2.0
        # polarity +1 predicts 1 above the threshold
        err_plus = w_pos[cut] + (total_neg - w_neg[cut])
        err_minus = (total_pos - w_pos[cut]) + w_neg[cut]
        interleaved = np.empty(2 * cut.size)
        interleaved[0::2] = err_plus
        interleaved[1::2] = err_minus
        flat = int(np.argmin(interleaved))
        err = float(interleaved[flat])
        if best is None or err < best[0]:
            best = (err, feature, float(thresholds[flat // 2]), 1 if flat % 2 == 0 else -1)

    if best is None:
        raise FeatureExhaustionError("no feature offers a usable threshold (all constant)")
    err, feature, threshold, polarity = best
    return StumpLearner(feature_index=feature, threshold=threshold,
                        polarity=polarity, weighted_error=err)


def select_features(features, labels, k: int | None, seed: int = 0,
                    tool: str = "") -> SelectionResult:
    """Run k boosting rounds, selecting one new feature per round.

    ``k=None`` (or k >= dimension) is the identity selection.  A round with
    weighted error 0 keeps its feature and terminates the selection early; a
    round with error >= 0.5 raises.  The search itself is deterministic, so
    ``seed`` is accepted only for interface stability.
    """
    del seed
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if x.ndim != 2:
        raise ValueError("features must be a samples x d matrix")
    n, d = x.shape
    if k is not ALL_FEATURES and k < 1:
        raise ValueError("k must be >= 1")
    if k is ALL_FEATURES or k >= d:
        return SelectionResult(tool=tool, indices=tuple(range(d)), round_errors=(), k=k)

    weights = np.full(n, 1.0 / n)
    selected: list[int] = []
    errors: list[float] = []
    for round_index in range(1, k + 1):
        stump = best_stump(x, y, weights, excluded=selected)
        eps = stump.weighted_error
        if eps >= 0.5:
            raise BoostingFailureError(
                f"round {round_index}: best stump error {eps:.4f} >= 0.5",
                round_index=round_index,
            )
        selected.append(stump.feature_index)
        errors.append(eps)
        if eps == 0.0:
            break  # perfect stump: nothing left for boosting to reweight
        beta = eps / (1.0 - eps)
        weights = update_weights(weights, stump.predict(x), y, beta)
    return SelectionResult(tool=tool, indices=tuple(selected),
                           round_errors=tuple(errors), k=k)
