"""Takagi-Sugeno neuro-fuzzy fusion of the three calibrated tool scores.

A rule base with Gaussian input membership functions is seeded by
subtractive clustering over the joint (inputs, target) space: one rule per
cluster, membership centers at the cluster's input coordinates, widths from
the per-input data range.  Training is hybrid: each epoch first solves a
global ridge least-squares problem for every consequent parameter with the
premises frozen, then takes one gradient step on all centers and widths.

Firing strengths are products of Gaussians and are evaluated through a
max-shifted exponential so the normalization never underflows to 0/0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TrainingError

DEFAULT_RADIUS = 0.5
DEFAULT_EPOCHS = 50
DEFAULT_LEARNING_RATE = 0.01
SIGMA_FLOOR = 1e-3
_LS_RIDGE = 1e-8
_MAX_STEP_HALVINGS = 10

CONSEQUENT_TYPES = ("constant", "linear")


@dataclass
class GaussianMf:
    """Gaussian membership exp(-(x - c)^2 / (2 sigma^2))."""

    center: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")

    def membership(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        return np.exp(-((x - self.center) ** 2) / (2.0 * self.sigma ** 2))


@dataclass
class FuzzyRule:
    """One rule: a Gaussian per input plus a constant or linear consequent."""

    mfs: list[GaussianMf]
    consequent: np.ndarray

    def __post_init__(self):
        cons = np.asarray(self.consequent, dtype=float)
        n_inputs = len(self.mfs)
        if cons.shape not in ((1,), (n_inputs + 1,)):
            raise ValueError(
                f"consequent must have 1 or {n_inputs + 1} parameters, got {cons.shape}"
            )
        object.__setattr__(self, "consequent", cons)


class AnfisModel:
    """Ordered rule list with training metadata."""

    def __init__(self, rules: list[FuzzyRule], consequent_type: str):
        if consequent_type not in CONSEQUENT_TYPES:
            raise ValueError(f"consequent_type must be one of {CONSEQUENT_TYPES}")
        if not rules:
            raise ValueError("a model needs at least one rule")
        n_inputs = len(rules[0].mfs)
        arity = 1 if consequent_type == "constant" else n_inputs + 1
        for rule in rules:
            if len(rule.mfs) != n_inputs:
                raise ValueError("rules disagree on input dimension")
            if rule.consequent.shape[0] != arity:
                raise ValueError("rule consequent arity does not match the configured type")
        self.rules = rules
        self.consequent_type = consequent_type
        self.n_inputs = n_inputs
        self.epochs_trained = 0
        self.rmse_history: list[float] = []

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    @property
    def consequent_arity(self) -> int:
        return 1 if self.consequent_type == "constant" else self.n_inputs + 1

    def centers(self) -> np.ndarray:
        return np.array([[mf.center for mf in rule.mfs] for rule in self.rules])

    def sigmas(self) -> np.ndarray:
        return np.array([[mf.sigma for mf in rule.mfs] for rule in self.rules])

    def set_premises(self, centers: np.ndarray, sigmas: np.ndarray) -> None:
        for k, rule in enumerate(self.rules):
            for d, mf in enumerate(rule.mfs):
                mf.center = float(centers[k, d])
                mf.sigma = float(sigmas[k, d])


# ---------------------------------------------------------------------------
# Subtractive clustering


def subtractive_cluster(points, radius: float, accept_ratio: float = 0.5,
                        reject_ratio: float = 0.15,
                        squash_factor: float = 1.5) -> np.ndarray:
    """Density-based center picking by iterative potential subtraction.

    Potential of point i is sum_j exp(-4 ||x_i - x_j||^2 / radius^2); the
    max-potential point becomes a center and its influence is subtracted
    with squash radius ``squash_factor * radius``.  Candidates between the
    accept and reject thresholds are kept only if they are far enough from
    existing centers (min distance / radius + potential ratio >= 1).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("clustering needs at least one point")
    if radius <= 0:
        raise ValueError("radius must be > 0")
    n = pts.shape[0]
    alpha = 4.0 / radius ** 2
    beta = 4.0 / (squash_factor * radius) ** 2
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = (diff * diff).sum(axis=2)
    potentials = np.exp(-alpha * d2).sum(axis=1)

    centers: list[np.ndarray] = []
    first_potential = None
    while len(centers) < n:
        k = int(np.argmax(potentials))
        p_k = float(potentials[k])
        if first_potential is None:
            first_potential = p_k
        elif p_k > accept_ratio * first_potential:
            pass
        elif p_k < reject_ratio * first_potential:
            break
        else:
            dist = np.sqrt(((np.array(centers) - pts[k]) ** 2).sum(axis=1)).min()
            if dist / radius + p_k / first_potential < 1.0:
                potentials[k] = 0.0
                continue
        centers.append(pts[k].copy())
        potentials = potentials - p_k * np.exp(-beta * d2[:, k])
    return np.array(centers)


# ---------------------------------------------------------------------------
# Evaluation


def _normalized_firing(model: AnfisModel, x: np.ndarray) -> np.ndarray:
    """(n, R) normalized firing strengths via max-shifted log weights."""
    centers = model.centers()
    sigmas = model.sigmas()
    z = -(((x[:, None, :] - centers[None, :, :]) ** 2)
          / (2.0 * sigmas[None, :, :] ** 2)).sum(axis=2)
    w = np.exp(z - z.max(axis=1, keepdims=True))
    return w / w.sum(axis=1, keepdims=True)


def _consequent_values(model: AnfisModel, x: np.ndarray) -> np.ndarray:
    """(n, R) consequent output of every rule at every input row."""
    theta = np.stack([rule.consequent for rule in model.rules])
    if model.consequent_type == "constant":
        return np.broadcast_to(theta[:, 0], (x.shape[0], model.n_rules)).copy()
    return theta[:, 0][None, :] + x @ theta[:, 1:].T


def fis_eval_batch(model: AnfisModel, x) -> np.ndarray:
    """Fused output for each row of x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.n_inputs:
        raise ValueError(f"expected {model.n_inputs} inputs per row, got {x.shape[1]}")
    w = _normalized_firing(model, x)
    return (w * _consequent_values(model, x)).sum(axis=1)


def fis_eval(model: AnfisModel, x) -> float:
    """Fused output for a single input vector."""
    return float(fis_eval_batch(model, np.atleast_2d(np.asarray(x, dtype=float)))[0])


def fused_verdict(model: AnfisModel, scores, threshold: float = 0.5) -> tuple[int, float]:
    """Classify one calibrated score triple: 1 (authentic) iff the fused value > threshold."""
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.shape[0] != model.n_inputs:
        raise ValueError(f"expected {model.n_inputs} scores, got {scores.shape[0]}")
    value = fis_eval(model, scores)
    return (1 if value > threshold else 0), value


# ---------------------------------------------------------------------------
# Initialization and hybrid training


def _split_rows(rows) -> tuple[np.ndarray, np.ndarray]:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] < 2:
        raise ValueError("training rows must hold at least one input plus the target")
    return rows[:, :-1], rows[:, -1]


def init_fis(training_rows, radius: float = DEFAULT_RADIUS,
             consequent_type: str = "linear",
             sigma_floor: float = SIGMA_FLOOR) -> AnfisModel:
    """Cluster the joint (inputs, target) rows and build one rule per center.

    Membership centers are the cluster's input coordinates; all rules share
    the initial widths radius * (per-input range) / sqrt(8), floored for
    degenerate ranges.  Consequents are set by one least-squares solve.
    """
    x, y = _split_rows(training_rows)
    centers = subtractive_cluster(np.column_stack([x, y]), radius)
    input_centers = centers[:, :x.shape[1]]
    span = x.max(axis=0) - x.min(axis=0)
    sigmas = np.maximum(radius * span / np.sqrt(8.0), sigma_floor)
    arity = 1 if consequent_type == "constant" else x.shape[1] + 1
    rules = [
        FuzzyRule(
            mfs=[GaussianMf(center=float(c), sigma=float(s))
                 for c, s in zip(row, sigmas)],
            consequent=np.zeros(arity),
        )
        for row in input_centers
    ]
    model = AnfisModel(rules, consequent_type)
    solve_consequents(model, x, y)
    return model


def solve_consequents(model: AnfisModel, x, y, ridge: float = _LS_RIDGE) -> None:
    """Globally optimal consequent parameters for the current premises."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    w = _normalized_firing(model, x)
    if model.consequent_type == "constant":
        phi = w
    else:
        extended = np.column_stack([np.ones(x.shape[0]), x])
        phi = (w[:, :, None] * extended[:, None, :]).reshape(x.shape[0], -1)
    gram = phi.T @ phi + ridge * np.eye(phi.shape[1])
    theta = np.linalg.solve(gram, phi.T @ y)
    arity = model.consequent_arity
    for k, rule in enumerate(model.rules):
        rule.consequent = theta[k * arity:(k + 1) * arity].copy()


def rmse(model: AnfisModel, x, y) -> float:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    residual = fis_eval_batch(model, x) - y
    return float(np.sqrt((residual ** 2).mean()))


def premise_gradients(model: AnfisModel, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Analytic d RMSE / d center and d RMSE / d sigma, each (R, n_inputs)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    centers = model.centers()
    sigmas = model.sigmas()
    w = _normalized_firing(model, x)                       # (n, R)
    g = _consequent_values(model, x)                       # (n, R)
    out = (w * g).sum(axis=1)
    residual = out - y
    err = float(np.sqrt((residual ** 2).mean()))
    if err == 0.0:
        zeros = np.zeros_like(centers)
        return zeros, zeros.copy()
    # d out / d logw_k = w_k (g_k - out); chain through the Gaussian exponent
    d_logw = w * (g - out[:, None])                        # (n, R)
    diff = x[:, None, :] - centers[None, :, :]             # (n, R, D)
    common = (residual[:, None] * d_logw)[:, :, None]
    d_center = (common * diff / sigmas[None, :, :] ** 2).sum(axis=0)
    d_sigma = (common * diff ** 2 / sigmas[None, :, :] ** 3).sum(axis=0)
    scale = 1.0 / (n * err)
    return scale * d_center, scale * d_sigma


def train_hybrid(model: AnfisModel, training_rows, epochs: int = DEFAULT_EPOCHS,
                 learning_rate: float = DEFAULT_LEARNING_RATE) -> AnfisModel:
    """Hybrid training: per epoch, consequent least squares then one premise step.

    The recorded per-epoch RMSE is measured right after the least-squares
    stage.  A premise step that would make the RMSE non-finite is halved up
    to 10 times, then the epoch's premise update is skipped with a warning.
    The fusion pipeline feeds hard {0, 1} targets; any finite targets are
    accepted for model fitting.
    """
    x, y = _split_rows(training_rows)
    if x.shape[1] != model.n_inputs:
        raise ValueError(f"expected {model.n_inputs} inputs per row, got {x.shape[1]}")
    needed = model.n_rules * model.consequent_arity
    if x.shape[0] < needed:
        raise TrainingError(
            f"{x.shape[0]} rows cannot determine {needed} consequent parameters"
        )
    for epoch in range(epochs):
        solve_consequents(model, x, y)
        model.rmse_history.append(rmse(model, x, y))
        d_center, d_sigma = premise_gradients(model, x, y)
        centers = model.centers()
        sigmas = model.sigmas()
        step = learning_rate
        applied = False
        for _ in range(_MAX_STEP_HALVINGS + 1):
            new_centers = centers - step * d_center
            new_sigmas = np.maximum(sigmas - step * d_sigma, SIGMA_FLOOR)
            model.set_premises(new_centers, new_sigmas)
            if np.isfinite(rmse(model, x, y)):
                applied = True
                break
            step /= 2.0
        if not applied:
            model.set_premises(centers, sigmas)
            warnings.warn(f"epoch {epoch + 1}: premise step skipped "
                          "(non-finite error after 10 halvings)", RuntimeWarning,
                          stacklevel=2)
        model.epochs_trained += 1
    return model


# ---------------------------------------------------------------------------
# Persistence


def save_model(model: AnfisModel, path) -> None:
    lines = [f"ANFIS v1 rules={model.n_rules} cons={model.consequent_type}"]
    for rule in model.rules:
        for mf in rule.mfs:
            lines.append(f"mf c={mf.center!r} sigma={mf.sigma!r}")
        lines.append("cons " + " ".join(repr(float(p)) for p in rule.consequent))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> AnfisModel:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split()
    if header[:2] != ["ANFIS", "v1"]:
        raise ValueError(f"{path}: not a v1 ANFIS model file")
    fields = dict(p.split("=", 1) for p in header[2:])
    n_rules = int(fields["rules"])
    consequent_type = fields["cons"]
    rules = []
    cursor = 1
    while len(rules) < n_rules:
        mfs = []
        while lines[cursor].startswith("mf "):
            mf_fields = dict(p.split("=", 1) for p in lines[cursor].split()[1:])
            mfs.append(GaussianMf(center=float(mf_fields["c"]),
                                  sigma=float(mf_fields["sigma"])))
            cursor += 1
        cons = np.array([float(v) for v in lines[cursor].split()[1:]])
        cursor += 1
        rules.append(FuzzyRule(mfs=mfs, consequent=cons))
    return AnfisModel(rules, consequent_type)
