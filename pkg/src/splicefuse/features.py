"""Texture feature extraction for the three detectors being fused.

Three fixed-arity feature vectors are computed per block:

* ``WAVELET`` (48 values): orthonormal 3-level Haar pyramid of the raw block
  and of its prediction-error image (pixel minus mean of its 4 neighbours,
  borders replicated).  For each image, 12 subbands in the order
  LL1, LL2, LL3, LH1, HL1, HH1, LH2, HL2, HH2, LH3, HL3, HH3 each contribute
  (mean of |coefficients|, population std of |coefficients|).  Raw image
  first, prediction-error image second.

* ``GLCM_EDGE`` (96 values): four directional absolute-difference edge maps
  (horizontal, vertical, diagonal, anti-diagonal), each quantized to 16
  levels; per map, directed co-occurrence matrices at offsets (1,0), (0,1),
  (1,1), (1,-1); per matrix the six statistics contrast, correlation,
  energy, homogeneity, entropy, dissimilarity.

* ``RUN_LENGTH`` (220 values): the block plus its horizontal/vertical/
  diagonal difference maps, quantized to 16 levels; per source image,
  run-length matrices along 0/45/90/135 degrees; per matrix eleven classical
  run statistics (SRE, LRE, GLN, RLN, RP, LGRE, HGRE, SRLGE, SRHGE, LRLGE,
  LRHGE) giving 4x4x11 = 176 values, then for each statistic the first four
  moments (mean, std, skewness, kurtosis) of its 16 per-matrix values,
  giving 44 more.

All operations are pure; identical pixels yield bit-identical vectors.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import EmptyPairError, ShapeError

_SQRT2 = math.sqrt(2.0)

GLCM_LEVELS = 16
GLCM_OFFSETS = ((1, 0), (0, 1), (1, 1), (1, -1))
GLCM_STAT_NAMES = ("contrast", "correlation", "energy", "homogeneity", "entropy",
                   "dissimilarity")

RL_LEVELS = 16
RL_DIRECTIONS = (0, 45, 90, 135)
RL_STAT_NAMES = ("sre", "lre", "gln", "rln", "rp", "lgre", "hgre", "srlge",
                 "srhge", "lrlge", "lrhge")

EDGE_DIRECTIONS = ("horizontal", "vertical", "diagonal", "anti_diagonal")

WAVELET_LEVELS = 3


class Tool(str, Enum):
    """The three detectors whose outputs get fused."""

    WAVELET = "wavelet"
    GLCM_EDGE = "glcm_edge"
    RUN_LENGTH = "run_length"


TOOL_ORDER = (Tool.WAVELET, Tool.GLCM_EDGE, Tool.RUN_LENGTH)
TOOL_DIMS = {Tool.WAVELET: 48, Tool.GLCM_EDGE: 96, Tool.RUN_LENGTH: 220}


@dataclass(frozen=True)
class FeatureVector:
    """Ordered real-valued features from one tool on one block."""

    tool: Tool
    values: np.ndarray
    block_id: str

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        expected = TOOL_DIMS[self.tool]
        if vals.ndim != 1 or vals.shape[0] != expected:
            raise ValueError(
                f"{self.tool.value} vector for {self.block_id!r} must have length "
                f"{expected}, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"{self.tool.value} vector for {self.block_id!r} has non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


# ---------------------------------------------------------------------------
# Haar wavelet pyramid


@dataclass(frozen=True)
class HaarPyramid:
    """Orthonormal 2-D Haar decomposition: final approximation plus detail triples.

    ``details[j]`` holds (LH, HL, HH) for level j+1, finest first.  The
    coefficient count of ``approx`` plus all details equals the input size.
    """

    approx: np.ndarray
    details: tuple[tuple[np.ndarray, np.ndarray, np.ndarray], ...]

    @property
    def levels(self) -> int:
        return len(self.details)

    @property
    def coefficient_count(self) -> int:
        return self.approx.size + sum(lh.size + hl.size + hh.size
                                      for lh, hl, hh in self.details)


def _haar_step(a: np.ndarray):
    """One orthonormal analysis level: columns first, then rows."""
    h_lo = (a[:, 0::2] + a[:, 1::2]) / _SQRT2
    h_hi = (a[:, 0::2] - a[:, 1::2]) / _SQRT2
    ll = (h_lo[0::2, :] + h_lo[1::2, :]) / _SQRT2
    lh = (h_lo[0::2, :] - h_lo[1::2, :]) / _SQRT2
    hl = (h_hi[0::2, :] + h_hi[1::2, :]) / _SQRT2
    hh = (h_hi[0::2, :] - h_hi[1::2, :]) / _SQRT2
    return ll, lh, hl, hh


def _haar_unstep(ll, lh, hl, hh) -> np.ndarray:
    h_lo = np.empty((ll.shape[0] * 2, ll.shape[1]))
    h_lo[0::2, :] = (ll + lh) / _SQRT2
    h_lo[1::2, :] = (ll - lh) / _SQRT2
    h_hi = np.empty_like(h_lo)
    h_hi[0::2, :] = (hl + hh) / _SQRT2
    h_hi[1::2, :] = (hl - hh) / _SQRT2
    a = np.empty((h_lo.shape[0], h_lo.shape[1] * 2))
    a[:, 0::2] = (h_lo + h_hi) / _SQRT2
    a[:, 1::2] = (h_lo - h_hi) / _SQRT2
    return a


def haar_dwt2(matrix, levels: int) -> HaarPyramid:
    """Orthonormal 2-D Haar analysis; both dimensions must divide by 2**levels."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    factor = 2 ** levels
    if m.shape[0] % factor or m.shape[1] % factor:
        raise ShapeError(
            f"matrix shape {m.shape} is not divisible by 2**{levels}"
        )
    details = []
    cur = m
    for _ in range(levels):
        cur, lh, hl, hh = _haar_step(cur)
        details.append((lh, hl, hh))
    return HaarPyramid(approx=cur, details=tuple(details))


def haar_idwt2(pyramid: HaarPyramid) -> np.ndarray:
    """Exact inverse of :func:`haar_dwt2`."""
    cur = pyramid.approx
    for lh, hl, hh in reversed(pyramid.details):
        cur = _haar_unstep(cur, lh, hl, hh)
    return cur


def prediction_error(matrix) -> np.ndarray:
    """Residual of each pixel against the mean of its 4 neighbours (borders replicated)."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError("prediction_error needs a non-empty 2-D matrix")
    p = np.pad(m, 1, mode="edge")
    neighbours = (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]) / 4.0
    return m - neighbours


def wavelet_subband_stats(matrix, levels: int = WAVELET_LEVELS) -> np.ndarray:
    """(mean, std) of |coefficients| for the 3*levels+levels subbands of one image.

    Subband order: LL1..LLk, then (LH, HL, HH) per level 1..k.
    """
    m = np.asarray(matrix, dtype=float)
    approximations = []
    detail_triples = []
    cur = m
    for _ in range(levels):
        cur, lh, hl, hh = _haar_step(cur)
        approximations.append(cur)
        detail_triples.append((lh, hl, hh))
    bands = approximations + [band for triple in detail_triples for band in triple]
    out = np.empty(2 * len(bands))
    for i, band in enumerate(bands):
        mag = np.abs(band)
        out[2 * i] = mag.mean()
        out[2 * i + 1] = mag.std()
    return out


def wavelet_features(block) -> FeatureVector:
    """48-value wavelet-statistics vector for one block."""
    base = block.pixels.astype(float)
    factor = 2 ** WAVELET_LEVELS
    if base.shape[0] % factor or base.shape[1] % factor:
        raise ShapeError(f"block shape {base.shape} unsupported for {WAVELET_LEVELS} levels")
    values = np.concatenate([
        wavelet_subband_stats(base),
        wavelet_subband_stats(prediction_error(base)),
    ])
    return FeatureVector(Tool.WAVELET, values, block.id)


# ---------------------------------------------------------------------------
# Directional edge maps


def directional_edge_maps(matrix) -> dict[str, np.ndarray]:
    """Absolute forward-difference maps along four directions, clamped to [0, 255].

    Positions without a forward neighbour copy the nearest computed value so
    every map keeps the input shape.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise ShapeError("edge maps need at least a 2x2 matrix")
    maps = {}

    d = np.abs(m[:, 1:] - m[:, :-1])
    maps["horizontal"] = np.concatenate([d, d[:, -1:]], axis=1)

    d = np.abs(m[1:, :] - m[:-1, :])
    maps["vertical"] = np.concatenate([d, d[-1:, :]], axis=0)

    d = np.abs(m[1:, 1:] - m[:-1, :-1])
    d = np.concatenate([d, d[:, -1:]], axis=1)
    maps["diagonal"] = np.concatenate([d, d[-1:, :]], axis=0)

    d = np.abs(m[1:, :-1] - m[:-1, 1:])
    d = np.concatenate([d[:, :1], d], axis=1)
    maps["anti_diagonal"] = np.concatenate([d, d[-1:, :]], axis=0)

    return {name: np.clip(v, 0.0, 255.0) for name, v in maps.items()}


def edge_images(block) -> dict[str, np.ndarray]:
    """The four 128x128 edge maps of one block."""
    return directional_edge_maps(block.pixels.astype(float))


def quantize_levels(matrix, levels: int) -> np.ndarray:
    """Uniform quantization of [0, 255] values; a value on a bin edge joins the lower bin."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    v = np.asarray(matrix, dtype=float)
    if v.size and (v.min() < 0 or v.max() > 255):
        raise ValueError("quantize_levels expects values in [0, 255]")
    q = np.ceil(v * levels / 256.0).astype(np.int64) - 1
    return np.maximum(q, 0)


# ---------------------------------------------------------------------------
# Gray-level co-occurrence


@dataclass(frozen=True)
class Glcm:
    """Directed co-occurrence counts at one offset, plus their normalization.

    The offset (dx, dy) pairs pixel (r, c) with pixel (r + dy, c + dx).
    """

    levels: int
    offset: tuple[int, int]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (self.levels, self.levels):
            raise ShapeError("GLCM counts must be levels x levels")
        if counts.min() < 0:
            raise ValueError("GLCM counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def normalized(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / float(total)


def glcm(matrix, levels: int, offset: tuple[int, int]) -> Glcm:
    """Count directed level pairs at the given offset (no symmetrization)."""
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ShapeError("glcm needs a 2-D matrix")
    if levels < 2:
        raise ValueError("levels must be >= 2")
    dx, dy = offset
    if dx == 0 and dy == 0:
        raise ValueError("offset must be nonzero")
    if m.size and (m.min() < 0 or m.max() >= levels):
        raise ValueError(f"matrix values must be pre-quantized to [0, {levels - 1}]")
    rows, cols = m.shape
    r0, r1 = max(0, -dy), rows - max(0, dy)
    c0, c1 = max(0, -dx), cols - max(0, dx)
    if r1 <= r0 or c1 <= c0:
        raise EmptyPairError(f"offset {offset} leaves no valid pairs in a {rows}x{cols} matrix")
    a = m[r0:r1, c0:c1].astype(np.int64)
    b = m[r0 + dy:r1 + dy, c0 + dx:c1 + dx].astype(np.int64)
    counts = np.bincount((a * levels + b).ravel(), minlength=levels * levels)
    return Glcm(levels=levels, offset=(dx, dy), counts=counts.reshape(levels, levels))


def glcm_stats(g: Glcm) -> np.ndarray:
    """Contrast, correlation, energy, homogeneity, entropy, dissimilarity.

    Correlation with a zero marginal variance is defined as 0; entropy is
    base-2 over nonzero cells.
    """
    p = g.normalized
    levels = np.arange(g.levels, dtype=float)
    i = levels[:, None]
    j = levels[None, :]
    contrast = ((i - j) ** 2 * p).sum()
    p_row = p.sum(axis=1)
    p_col = p.sum(axis=0)
    mu_r = (levels * p_row).sum()
    mu_c = (levels * p_col).sum()
    var_r = ((levels - mu_r) ** 2 * p_row).sum()
    var_c = ((levels - mu_c) ** 2 * p_col).sum()
    denom = math.sqrt(var_r * var_c)
    correlation = 0.0 if denom <= 0.0 else float(((i - mu_r) * (j - mu_c) * p).sum() / denom)
    energy = (p * p).sum()
    homogeneity = (p / (1.0 + (i - j) ** 2)).sum()
    nonzero = p[p > 0]
    entropy = float(-(nonzero * np.log2(nonzero)).sum()) if nonzero.size else 0.0
    dissimilarity = (np.abs(i - j) * p).sum()
    return np.array([contrast, correlation, energy, homogeneity, entropy, dissimilarity])


def glcm_edge_features(block) -> FeatureVector:
    """96-value vector: 4 edge maps x 4 offsets x 6 co-occurrence statistics."""
    values = []
    maps = edge_images(block)
    for name in EDGE_DIRECTIONS:
        quantized = quantize_levels(maps[name], GLCM_LEVELS)
        for offset in GLCM_OFFSETS:
            values.extend(glcm_stats(glcm(quantized, GLCM_LEVELS, offset)))
    return FeatureVector(Tool.GLCM_EDGE, np.array(values), block.id)


# ---------------------------------------------------------------------------
# Gray-level run lengths


@dataclass(frozen=True)
class RunLengthMatrix:
    """Counts of maximal constant-level runs by (level, length) along one direction.

    ``entries[g, l-1]`` counts runs of level ``g`` with exact length ``l``.
    """

    levels: int
    direction: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.int64)
        if entries.ndim != 2 or entries.shape[0] != self.levels:
            raise ShapeError("run-length entries must be levels x max_run_length")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)


def _scan_lines(m: np.ndarray, direction: int) -> list[np.ndarray]:
    rows, cols = m.shape
    if direction == 0:
        return [m[r, :] for r in range(rows)]
    if direction == 90:
        return [m[:, c] for c in range(cols)]
    if direction == 45:
        flipped = m[::-1, :]
        return [flipped.diagonal(k) for k in range(-(rows - 1), cols)]
    if direction == 135:
        return [m.diagonal(k) for k in range(-(rows - 1), cols)]
    raise ValueError(f"direction must be one of {RL_DIRECTIONS}, got {direction}")


def run_length_matrix(matrix, levels: int, direction: int) -> RunLengthMatrix:
    """Maximal-run decomposition along one direction's scan lines."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.size == 0:
        raise ShapeError("run_length_matrix needs a non-empty 2-D matrix")
    if m.min() < 0 or m.max() >= levels:
        raise ValueError(f"matrix values must be pre-quantized to [0, {levels - 1}]")
    lines = _scan_lines(m.astype(np.int64), direction)
    max_len = max(m.shape)
    entries = np.zeros((levels, max_len), dtype=np.int64)
    # encode all scan lines into one array with -1 separators, then run-length
    # encode in a single pass
    parts = []
    sep = np.array([-1], dtype=np.int64)
    for line in lines:
        parts.append(np.ascontiguousarray(line))
        parts.append(sep)
    flat = np.concatenate(parts[:-1])
    change = np.flatnonzero(flat[1:] != flat[:-1])
    starts = np.concatenate([[0], change + 1])
    ends = np.concatenate([change, [flat.size - 1]])
    values = flat[starts]
    lengths = ends - starts + 1
    keep = values >= 0
    np.add.at(entries, (values[keep], lengths[keep] - 1), 1)
    return RunLengthMatrix(levels=levels, direction=direction, entries=entries)


def run_length_stats(rlm: RunLengthMatrix) -> np.ndarray:
    """The eleven classical run statistics; statistics with zero denominators are 0."""
    e = rlm.entries.astype(float)
    total_runs = e.sum()
    if total_runs == 0:
        return np.zeros(len(RL_STAT_NAMES))
    gl = (np.arange(rlm.levels, dtype=float) + 1.0)[:, None]       # 1-based level index
    rl = (np.arange(e.shape[1], dtype=float) + 1.0)[None, :]       # run length
    per_level = e.sum(axis=1)
    per_length = e.sum(axis=0)
    n_pixels = (e * rl).sum()
    return np.array([
        (e / (rl * rl)).sum() / total_runs,                        # SRE
        (e * rl * rl).sum() / total_runs,                          # LRE
        (per_level * per_level).sum() / total_runs,                # GLN
        (per_length * per_length).sum() / total_runs,              # RLN
        total_runs / n_pixels,                                     # RP
        (e / (gl * gl)).sum() / total_runs,                        # LGRE
        (e * gl * gl).sum() / total_runs,                          # HGRE
        (e / (gl * gl * rl * rl)).sum() / total_runs,              # SRLGE
        (e * gl * gl / (rl * rl)).sum() / total_runs,              # SRHGE
        (e * rl * rl / (gl * gl)).sum() / total_runs,              # LRLGE
        (e * gl * gl * rl * rl).sum() / total_runs,                # LRHGE
    ])


def _four_moments(x: np.ndarray) -> list[float]:
    mean = float(x.mean())
    std = float(x.std())
    if std <= 0.0:
        return [mean, 0.0, 0.0, 0.0]
    z = (x - mean) / std
    return [mean, std, float((z ** 3).mean()), float((z ** 4).mean())]


def run_length_features(block) -> FeatureVector:
    """220-value vector: 176 per-matrix run statistics plus 44 aggregate moments."""
    base = block.pixels.astype(float)
    maps = directional_edge_maps(base)
    sources = [base, maps["horizontal"], maps["vertical"], maps["diagonal"]]
    values = []
    per_stat = [[] for _ in RL_STAT_NAMES]
    for src in sources:
        quantized = quantize_levels(src, RL_LEVELS)
        for direction in RL_DIRECTIONS:
            stats = run_length_stats(run_length_matrix(quantized, RL_LEVELS, direction))
            values.extend(stats)
            for s_idx, value in enumerate(stats):
                per_stat[s_idx].append(value)
    for collected in per_stat:
        values.extend(_four_moments(np.array(collected)))
    return FeatureVector(Tool.RUN_LENGTH, np.array(values), block.id)


# ---------------------------------------------------------------------------
# Dispatch and CSV export


_TOOL_FUNCS = {
    Tool.WAVELET: wavelet_features,
    Tool.GLCM_EDGE: glcm_edge_features,
    Tool.RUN_LENGTH: run_length_features,
}


def tool_features(block, tool: Tool) -> FeatureVector:
    """Compute one tool's feature vector for one block."""
    return _TOOL_FUNCS[Tool(tool)](block)


def write_feature_csv(path, tool: Tool, vectors, labels) -> None:
    """Write one tool's feature matrix: header ``block_id,label,f0..fK``, corpus order."""
    vectors = list(vectors)
    labels = list(labels)
    if len(vectors) != len(labels):
        raise ShapeError("vectors and labels must have equal length")
    tool = Tool(tool)
    if any(fv.tool is not tool for fv in vectors):
        raise ValueError(f"vector from another tool in the {tool.value} CSV")
    dim = TOOL_DIMS[tool]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block_id", "label"] + [f"f{i}" for i in range(dim)])
        for fv, label in zip(vectors, labels):
            writer.writerow([fv.block_id, label] + [repr(float(v)) for v in fv.values])


def read_feature_csv(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Read a feature CSV back as (block ids, labels, feature matrix)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["block_id", "label"]:
            raise ValueError(f"{path}: not a feature CSV")
        ids, labels, rows = [], [], []
        for row in reader:
            ids.append(row[0])
            labels.append(int(row[1]))
            rows.append([float(v) for v in row[2:]])
    dim = len(header) - 2
    matrix = np.array(rows, dtype=float) if rows else np.empty((0, dim))
    if matrix.size and matrix.shape[1] != dim:
        raise ValueError(f"{path}: inconsistent row width")
    return ids, np.array(labels, dtype=int), matrix
