"""Binary RBF-kernel SVM trained by sequential minimal optimization.

The solver is a two-variable SMO with second-order working-set selection:
the first index maximizes the KKT violation, the second minimizes the
quadratic gain estimate along the feasible pair direction; iteration stops
when the maximal violation gap falls below tolerance.  Features are scaled
per feature to [0, 1] with the training minima/maxima, which are stored in
the model so test-time inputs are scaled identically.

The inner loop is plain scalar code compiled with numba; the uncompiled
Python function is kept reachable (``_smo_loop.py_func``) and the debug mode
single-steps the same loop while checking that the dual objective never
worsens.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import ConvergenceError, ShapeError, TrainingError

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 10_000_000
DEFAULT_C_GRID = tuple(float(2.0 ** e) for e in range(-5, 16, 2))       # 11 values
DEFAULT_GAMMA_GRID = tuple(float(2.0 ** e) for e in range(-15, 4, 2))   # 10 values

_KERNEL_SIZE_CAP = 10_000  # rows; full kernel matrices beyond this are refused


@dataclass(frozen=True)
class KernelParams:
    """Box constraint C and RBF width gamma."""

    c: float
    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError(f"C must be finite and > 0, got {self.c}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma}")


@dataclass
class SmoDiagnostics:
    """Solver internals kept for verification; not persisted."""

    alpha: np.ndarray
    iterations: int
    kkt_gap: float


@dataclass
class SvmModel:
    """Trained kernel classifier; support vectors are stored in scaled space."""

    params: KernelParams
    bias: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray           # alpha_i * y_i at the support vectors
    feature_lo: np.ndarray
    feature_hi: np.ndarray
    diagnostics: SmoDiagnostics | None = field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return self.feature_lo.shape[0]


def rbf_kernel(x, z, gamma: float) -> float:
    """exp(-gamma * ||x - z||^2) for two feature rows."""
    xv = np.asarray(x, dtype=float).ravel()
    zv = np.asarray(z, dtype=float).ravel()
    if xv.shape != zv.shape:
        raise ShapeError(f"kernel arguments differ in dimension: {xv.shape} vs {zv.shape}")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    d = xv - zv
    return float(np.exp(-gamma * np.dot(d, d)))


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between row sets, clamped at 0."""
    aa = (a * a).sum(axis=1)[:, None]
    bb = (b * b).sum(axis=1)[None, :]
    d2 = aa + bb - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def rbf_kernel_matrix(a, b, gamma: float) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"kernel arguments differ in dimension: {a.shape[1]} vs {b.shape[1]}")
    return np.exp(-gamma * squared_distances(a, b))


def scale_features(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Map each feature to [0, 1] by the stored training range (constant features to 0)."""
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = (x - lo) / safe
    return np.where(span > 0, scaled, 0.0)


@njit(cache=True)
def _smo_loop(K, y, C, tol, max_iter, alpha, G):  # pragma: no cover - compiled
    """Advance SMO from the given (alpha, G) state for at most max_iter steps.

    Mutates alpha and G in place; returns (steps taken, final violation gap).
    G must equal (Q @ alpha) - 1 for the incoming alpha.
    """
    n = K.shape[0]
    tau = 1e-12
    it = 0
    gap = np.inf
    while it < max_iter:
        m_val = -np.inf
        i = -1
        big_m = np.inf
        for t in range(n):
            u = -y[t] * G[t]
            if (y[t] > 0.0 and alpha[t] < C) or (y[t] < 0.0 and alpha[t] > 0.0):
                if u > m_val:
                    m_val = u
                    i = t
            if (y[t] < 0.0 and alpha[t] < C) or (y[t] > 0.0 and alpha[t] > 0.0):
                if u < big_m:
                    big_m = u
        if i < 0:
            gap = 0.0
            break
        gap = m_val - big_m
        if gap <= tol:
            break
        j = -1
        best_score = 0.0
        for t in range(n):
            if (y[t] < 0.0 and alpha[t] < C) or (y[t] > 0.0 and alpha[t] > 0.0):
                b_t = m_val + y[t] * G[t]
                if b_t > 0.0:
                    a_t = K[i, i] + K[t, t] - 2.0 * K[i, t]
                    if a_t <= 0.0:
                        a_t = tau
                    score = -(b_t * b_t) / a_t
                    if score < best_score:
                        best_score = score
                        j = t
        if j < 0:
            break
        old_i = alpha[i]
        old_j = alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0.0:
            quad = tau
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0.0:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0.0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            asum = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if asum > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = asum - C
            else:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = asum
            if asum > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = asum - C
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = asum
        dai = alpha[i] - old_i
        daj = alpha[j] - old_j
        if dai == 0.0 and daj == 0.0:
            break  # no representable progress on the selected pair
        for t in range(n):
            G[t] += y[t] * (y[i] * K[t, i] * dai + y[j] * K[t, j] * daj)
        it += 1
    return it, gap


def dual_objective(alpha: np.ndarray, K: np.ndarray, y: np.ndarray) -> float:
    """The minimized SMO objective 0.5 a'Qa - sum(a) with Q = yy' * K."""
    qa = (K * np.outer(y, y)) @ alpha
    return float(0.5 * alpha @ qa - alpha.sum())


def _solve_smo(K, y, c, tol, max_iter, debug=False):
    n = K.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    if debug:
        # single-step the identical loop, checking monotone descent per step
        prev = dual_objective(alpha, K, y)
        total = 0
        gap = np.inf
        while total < max_iter:
            steps, gap = _smo_loop.py_func(K, y, c, tol, 1, alpha, G)
            if steps == 0:
                break
            total += steps
            cur = dual_objective(alpha, K, y)
            if cur > prev + 1e-9 * max(1.0, abs(prev)):
                raise AssertionError(
                    f"dual objective increased: {prev!r} -> {cur!r} at step {total}"
                )
            prev = cur
        iterations = total
    else:
        iterations, gap = _smo_loop(K, y, c, tol, max_iter, alpha, G)
    converged = gap <= tol
    return alpha, G, iterations, gap, converged


def _bias_from_state(alpha, G, y, c):
    u = -y * G
    free = (alpha > 0.0) & (alpha < c)
    if free.any():
        return float(u[free].mean())
    i_up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    i_low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
    m_val = u[i_up].max() if i_up.any() else 0.0
    big_m = u[i_low].min() if i_low.any() else 0.0
    return float((m_val + big_m) / 2.0)


def train_svm(features, labels, params: KernelParams, tol: float = DEFAULT_TOL,
              seed: int = 0, max_iter: int = DEFAULT_MAX_ITER,
              debug: bool = False) -> SvmModel:
    """Fit the RBF SVM; labels are {0, 1} with authentic 1 mapped to +1.

    The solver is deterministic given the sample order, so ``seed`` is
    accepted only for interface stability.  ``debug`` single-steps the solver
    and asserts the dual objective never worsens.
    """
    del seed
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise ShapeError("features must be a samples x d matrix")
    labels = np.asarray(labels)
    if labels.shape != (x.shape[0],):
        raise ShapeError("labels must match the number of feature rows")
    if set(np.unique(labels).tolist()) - {0, 1}:
        raise ValueError("labels must be binary {0, 1}")
    if len(np.unique(labels)) < 2:
        raise TrainingError("training set contains a single class")
    if x.shape[0] > _KERNEL_SIZE_CAP:
        raise TrainingError(
            f"{x.shape[0]} samples exceed the full-kernel cap of {_KERNEL_SIZE_CAP}"
        )

    lo = x.min(axis=0)
    hi = x.max(axis=0)
    xs = scale_features(x, lo, hi)
    y = np.where(labels == 1, 1.0, -1.0)
    K = rbf_kernel_matrix(xs, xs, params.gamma)
    alpha, G, iterations, gap, converged = _solve_smo(K, y, params.c, tol, max_iter, debug)
    if not converged:
        raise ConvergenceError(
            f"SMO hit the {max_iter}-iteration cap with violation gap {gap:.3e}",
            worst_violation=gap,
        )
    bias = _bias_from_state(alpha, G, y, params.c)
    sv = alpha > 0.0
    return SvmModel(
        params=params,
        bias=bias,
        support_vectors=xs[sv],
        dual_coef=(alpha * y)[sv],
        feature_lo=lo,
        feature_hi=hi,
        diagnostics=SmoDiagnostics(alpha=alpha, iterations=iterations, kkt_gap=gap),
    )


def decision_values(model: SvmModel, features) -> np.ndarray:
    """f(x) = sum_i alpha_i y_i K(s_i, x) + b for raw (unscaled) feature rows."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    if x.shape[1] != model.n_features:
        raise ShapeError(
            f"expected {model.n_features}-dimensional rows, got {x.shape[1]}"
        )
    xs = scale_features(x, model.feature_lo, model.feature_hi)
    if model.support_vectors.shape[0] == 0:
        return np.full(x.shape[0], model.bias)
    K = rbf_kernel_matrix(xs, model.support_vectors, model.params.gamma)
    return K @ model.dual_coef + model.bias


def decision_value(model: SvmModel, x) -> float:
    """Decision value of a single feature row; sign(f) is the raw class vote."""
    return float(decision_values(model, np.atleast_2d(np.asarray(x, dtype=float)))[0])


def kkt_violations(model: SvmModel, features, labels) -> dict[str, float]:
    """Worst violation of each KKT condition over the training set.

    Requires the model's diagnostics (training alphas); returns the largest
    amount by which each condition is broken (0 when satisfied).
    """
    if model.diagnostics is None:
        raise ValueError("model carries no solver diagnostics")
    alpha = model.diagnostics.alpha
    x = np.asarray(features, dtype=float)
    y = np.where(np.asarray(labels) == 1, 1.0, -1.0)
    yf = y * decision_values(model, x)
    c = model.params.c
    lower = alpha <= 0.0
    upper = alpha >= c
    free = ~lower & ~upper
    out = {"alpha_zero": 0.0, "alpha_free": 0.0, "alpha_at_c": 0.0}
    if lower.any():
        out["alpha_zero"] = float(np.maximum(1.0 - yf[lower], 0.0).max())
    if free.any():
        out["alpha_free"] = float(np.abs(yf[free] - 1.0).max())
    if upper.any():
        out["alpha_at_c"] = float(np.maximum(yf[upper] - 1.0, 0.0).max())
    return out


# ---------------------------------------------------------------------------
# Grid search


@dataclass(frozen=True)
class GridCell:
    c: float
    gamma: float
    accuracy: float
    flagged: bool = False


@dataclass(frozen=True)
class GridSearchReport:
    cells: tuple[GridCell, ...]
    best: KernelParams
    folds: int

    def accuracy_of(self, c: float, gamma: float) -> float:
        for cell in self.cells:
            if cell.c == c and cell.gamma == gamma:
                return cell.accuracy
        raise KeyError((c, gamma))


def stratified_folds(labels, folds: int, rng) -> np.ndarray:
    """Assign each sample a fold id, balancing classes across folds."""
    y = np.asarray(labels)
    assignment = np.empty(y.shape[0], dtype=np.int64)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        assignment[idx] = np.arange(idx.size) % folds
    return assignment


def grid_search(features, labels, c_grid=DEFAULT_C_GRID, gamma_grid=DEFAULT_GAMMA_GRID,
                folds: int = 5, seed=0, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER) -> GridSearchReport:
    """Stratified k-fold cross-validation accuracy over the (C, gamma) grid.

    A cell whose training fails on any fold is scored 0 and flagged; ties on
    accuracy break to smaller C, then smaller gamma.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    c_values = sorted(float(c) for c in c_grid)
    gamma_values = sorted(float(g) for g in gamma_grid)
    if not c_values or not gamma_values:
        raise ValueError("grids must be non-empty")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    rng = np.random.default_rng(seed)
    assignment = stratified_folds(y, folds, rng)

    # per fold: scale on the training part, cache squared distances once,
    # then reuse exp(-gamma * D2) across the whole grid
    fold_data = []
    for fold in range(folds):
        test_mask = assignment == fold
        if not test_mask.any():
            continue
        train_mask = ~test_mask
        x_train_raw, y_train = x[train_mask], y[train_mask]
        x_test_raw, y_test = x[test_mask], y[test_mask]
        lo = x_train_raw.min(axis=0)
        hi = x_train_raw.max(axis=0)
        x_train = scale_features(x_train_raw, lo, hi)
        x_test = scale_features(x_test_raw, lo, hi)
        fold_data.append({
            "d2_train": squared_distances(x_train, x_train),
            "d2_test": squared_distances(x_test, x_train),
            "y_train": np.where(y_train == 1, 1.0, -1.0),
            "y_test": y_test,
            "single_class": len(np.unique(y_train)) < 2,
        })

    n_total = sum(fd["y_test"].size for fd in fold_data)
    cells = []
    best_params = None
    best_accuracy = -1.0
    for c in c_values:
        for gamma in gamma_values:
            correct = 0
            flagged = False
            for fd in fold_data:
                if fd["single_class"]:
                    flagged = True
                    break
                K = np.exp(-gamma * fd["d2_train"])
                y_train = fd["y_train"]
                alpha, G, _, gap, converged = _solve_smo(K, y_train, c, tol, max_iter)
                if not converged:
                    flagged = True
                    break
                bias = _bias_from_state(alpha, G, y_train, c)
                k_test = np.exp(-gamma * fd["d2_test"])
                f = k_test @ (alpha * y_train) + bias
                predicted = (f > 0).astype(int)
                correct += int((predicted == fd["y_test"]).sum())
            accuracy = 0.0 if flagged else correct / n_total
            cells.append(GridCell(c=c, gamma=gamma, accuracy=accuracy, flagged=flagged))
            if accuracy > best_accuracy:
                best_accuracy = accuracy
                best_params = KernelParams(c=c, gamma=gamma)
    return GridSearchReport(cells=tuple(cells), best=best_params, folds=folds)


# ---------------------------------------------------------------------------
# Persistence


def save_model(model: SvmModel, path) -> None:
    """Versioned text format; one support vector per line, full precision."""
    scale = ",".join(f"{float(lo)!r}:{float(hi)!r}"
                     for lo, hi in zip(model.feature_lo, model.feature_hi))
    lines = [
        f"SVMMODEL v1 C={float(model.params.c)!r} gamma={float(model.params.gamma)!r} "
        f"dim={model.n_features} nsv={model.support_vectors.shape[0]} "
        f"b={float(model.bias)!r} scale={scale}"
    ]
    for coef, row in zip(model.dual_coef, model.support_vectors):
        lines.append(" ".join([repr(float(coef))] + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> SvmModel:
    text = Path(path).read_text().splitlines()
    header = text[0].split()
    if header[:2] != ["SVMMODEL", "v1"]:
        raise ValueError(f"{path}: not a v1 SVM model file")
    fields = dict(part.split("=", 1) for part in header[2:])
    dim = int(fields["dim"])
    nsv = int(fields["nsv"])
    pairs = [p.split(":") for p in fields["scale"].split(",")] if fields["scale"] else []
    if len(pairs) != dim:
        raise ValueError(f"{path}: scale entries do not match dim")
    lo = np.array([float(a) for a, _ in pairs])
    hi = np.array([float(b) for _, b in pairs])
    coefs = np.empty(nsv)
    vectors = np.empty((nsv, dim))
    for i, line in enumerate(text[1:1 + nsv]):
        parts = line.split()
        coefs[i] = float(parts[0])
        vectors[i] = [float(v) for v in parts[1:]]
    return SvmModel(
        params=KernelParams(c=float(fields["C"]), gamma=float(fields["gamma"])),
        bias=float(fields["b"]),
        support_vectors=vectors,
        dual_coef=coefs,
        feature_lo=lo,
        feature_hi=hi,
    )
