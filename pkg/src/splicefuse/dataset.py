"""Corpus ingestion and reproducible train/test split planning.

The corpus lives on disk as two flat directories of 8-bit grayscale image
blocks::

    <root>/authentic/   -> label 1
    <root>/spliced/     -> label 0

Every readable 128x128 block becomes one :class:`ImageBlock`; files with the
wrong size, bit depth, or format are rejected per file and reported, never
fatally.  Split plans draw 90% of the corpus for training, independently per
run, with all randomness derived from ``(seed, run_index)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import CorpusLayoutError, SplitError

BLOCK_SIZE = 128
AUTHENTIC_DIR = "authentic"
SPLICED_DIR = "spliced"
TRAIN_FRACTION = 0.9

_SUPPORTED_SUFFIXES = (".pgm", ".png")
_SPLIT_RETRIES = 100


@dataclass(frozen=True)
class ImageBlock:
    """One grayscale block with its ground-truth label (1=authentic, 0=forged)."""

    id: str
    pixels: np.ndarray
    label: int

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.shape != (BLOCK_SIZE, BLOCK_SIZE):
            raise ValueError(
                f"block {self.id!r}: expected {BLOCK_SIZE}x{BLOCK_SIZE} pixels, got {px.shape}"
            )
        if not np.issubdtype(px.dtype, np.integer):
            raise ValueError(f"block {self.id!r}: pixel matrix must be integer-valued")
        if px.min() < 0 or px.max() > 255:
            raise ValueError(f"block {self.id!r}: pixel values outside [0, 255]")
        if self.label not in (0, 1):
            raise ValueError(f"block {self.id!r}: label must be 0 or 1, got {self.label!r}")
        px = px.astype(np.uint8)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class LoadReport:
    """Per-file rejections collected while loading a corpus."""

    rejected: tuple[tuple[str, str], ...] = ()

    def lines(self) -> list[str]:
        return [f"REJECTED {path} {reason}" for path, reason in self.rejected]


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint train/test id sets for one run of the protocol."""

    run_index: int
    seed: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


def read_block_pixels(path) -> np.ndarray:
    """Decode a single 8-bit grayscale block file, validating size and depth.

    Raises ValueError with a short reason on any unusable file; used both by
    corpus loading (where the error becomes a rejection record) and by
    single-image prediction.
    """
    path = Path(path)
    if path.suffix.lower() not in _SUPPORTED_SUFFIXES:
        raise ValueError(f"unsupported-format:{path.suffix or 'none'}")
    with Image.open(path) as img:
        if img.mode != "L":
            raise ValueError(f"not-8bit-grayscale:{img.mode}")
        if img.size != (BLOCK_SIZE, BLOCK_SIZE):
            raise ValueError(f"wrong-dimensions:{img.size[0]}x{img.size[1]}")
        return np.asarray(img, dtype=np.uint8)


def load_corpus(root_path) -> tuple[list[ImageBlock], LoadReport]:
    """Load all blocks under ``root/authentic`` and ``root/spliced``.

    Returns the corpus in deterministic lexicographic id order plus a report
    of per-file rejections.  A missing subdirectory is a fatal layout error.
    """
    root = Path(root_path)
    blocks: list[ImageBlock] = []
    rejected: list[tuple[str, str]] = []
    for sub, label in ((AUTHENTIC_DIR, 1), (SPLICED_DIR, 0)):
        directory = root / sub
        if not directory.is_dir():
            raise CorpusLayoutError(f"missing required subdirectory: {directory}")
        for path in sorted(directory.iterdir()):
            if not path.is_file():
                continue
            try:
                pixels = read_block_pixels(path)
            except (ValueError, OSError) as exc:
                rejected.append((str(path), str(exc)))
                continue
            blocks.append(ImageBlock(id=f"{sub}/{path.name}", pixels=pixels, label=label))
    blocks.sort(key=lambda b: b.id)
    return blocks, LoadReport(tuple(rejected))


def train_size(corpus_size: int, train_fraction: float = TRAIN_FRACTION) -> int:
    """Number of training items: round-half-up of ``train_fraction * corpus_size``."""
    if corpus_size <= 0:
        raise ValueError("corpus_size must be positive")
    # exact integer arithmetic for the protocol fraction 0.9, avoiding
    # float ties (0.9 * 1845 is exactly 1660.5)
    if train_fraction == TRAIN_FRACTION:
        return (9 * corpus_size + 5) // 10
    return int(math.floor(train_fraction * corpus_size + 0.5))


def make_splits(corpus, seed: int, runs: int = 5,
                train_fraction: float = TRAIN_FRACTION) -> list[SplitPlan]:
    """Produce one 90/10 split plan per run.

    Corpus items need only carry ``.id`` and ``.label``.  Each run draws its
    randomness from ``(seed, run_index)``; when the corpus holds both classes,
    any shuffle leaving a one-class train or test set is retried with a
    derived sub-seed (bounded retries, then error).  The class-presence
    requirement is waived for a side too small to hold both classes (a
    one-item test set), and extends to the train side because a one-class
    training split cannot train any downstream classifier.
    """
    corpus = list(corpus)
    if not corpus:
        raise SplitError("corpus is empty")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    n = len(corpus)
    if n < 10:
        raise SplitError(
            f"corpus of {n} blocks is too small: a 90/10 split must leave at least one test item"
        )
    ids = [b.id for b in corpus]
    if len(set(ids)) != n:
        raise SplitError("corpus ids are not unique")
    labels = np.array([b.label for b in corpus])
    classes = set(labels.tolist())
    n_train = train_size(n, train_fraction)
    if not 0 < n_train < n:
        raise SplitError(f"train fraction {train_fraction} leaves no usable split for {n} blocks")

    plans = []
    for run_index in range(1, runs + 1):
        for attempt in range(_SPLIT_RETRIES):
            rng = np.random.default_rng([seed, run_index, attempt])
            perm = rng.permutation(n)
            train_idx, test_idx = perm[:n_train], perm[n_train:]
            if len(classes) == 2:
                if test_idx.size >= 2 and set(labels[test_idx].tolist()) != classes:
                    continue
                if train_idx.size >= 2 and set(labels[train_idx].tolist()) != classes:
                    continue
            plans.append(SplitPlan(
                run_index=run_index,
                seed=seed,
                train_ids=tuple(sorted(ids[i] for i in train_idx)),
                test_ids=tuple(sorted(ids[i] for i in test_idx)),
            ))
            break
        else:
            raise SplitError(
                f"run {run_index}: no split with both classes in train and test "
                f"after {_SPLIT_RETRIES} attempts"
            )
    return plans
