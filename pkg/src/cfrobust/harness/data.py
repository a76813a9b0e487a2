"""Dataset ingestion, synthetic blobs and stratified folds."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import Dataset

log = logging.getLogger(__name__)


def load_csv(path) -> Dataset:
    """Read a headed CSV whose last column is the label.

    Labels may be integers or strings and are re-indexed in sorted order.
    Rows with missing or NaN features are dropped with a warning.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such dataset file: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    header, body = rows[0], rows[1:]
    if len(header) < 2:
        raise ValueError(f"{path}: need at least one feature and a label column")
    feats, labels, dropped = [], [], 0
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        values = []
        for name, cell in zip(header[:-1], row[:-1]):
            cell = cell.strip()
            if cell == "" or cell.lower() in ("nan", "na"):
                values.append(math.nan)
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value {cell!r} in column {name!r}") from None
        if not all(math.isfinite(v) for v in values) or row[-1].strip() == "":
            dropped += 1
            continue
        feats.append(values)
        labels.append(row[-1].strip())
    if dropped:
        msg = f"{path}: dropped {dropped} row(s) with missing values"
        log.warning(msg)
        warnings.warn(msg, stacklevel=2)
    if not feats:
        raise ValueError(f"{path}: every row was dropped")
    try:
        keys = sorted(set(labels), key=int)
        cast = int
    except ValueError:
        keys = sorted(set(labels))
        cast = str
    index = {k: i for i, k in enumerate(keys)}
    y = np.array([index[lab] for lab in labels], dtype=np.int64)
    names = tuple(str(cast(k)) for k in keys)
    return Dataset(np.array(feats, dtype=np.float64), y, tuple(header[:-1]), len(keys), names)


@dataclass(frozen=True)
class BlobsSpec:
    """Two isotropic unit-variance Gaussian blobs separated along the first axis."""

    d: int = 2
    n_per_class: int = 100
    separation: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if int(self.d) < 1:
            raise ValueError("d must be at least 1")
        if int(self.n_per_class) < 1:
            raise ValueError("n_per_class must be at least 1")
        if not float(self.separation) >= 0:
            raise ValueError("separation must be nonnegative")

    def to_dict(self) -> dict:
        return {"d": int(self.d), "n_per_class": int(self.n_per_class), "separation": float(self.separation), "seed": int(self.seed)}


def make_blobs(spec: BlobsSpec) -> Dataset:
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), int(spec.d)]))
    n, d = int(spec.n_per_class), int(spec.d)
    mean = np.zeros(d)
    mean[0] = spec.separation / 2.0
    X = np.vstack([rng.standard_normal((n, d)) - mean, rng.standard_normal((n, d)) + mean])
    y = np.repeat(np.arange(2), n)
    names = tuple(f"x{i}" for i in range(d))
    return Dataset(X, y, names, 2, ("0", "1"))


def kfold_indices(y, folds: int = 4, seed: int = 0, stratify: bool = True) -> list:
    """Return ``folds`` (train, test) index pairs, stratified by class if requested."""
    y = np.asarray(y)
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if y.shape[0] < folds:
        raise ValueError("fewer samples than folds")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xF01D]))
    assign = np.empty(y.shape[0], dtype=np.int64)
    if stratify:
        offset = 0
        for c in np.unique(y):
            idx = np.flatnonzero(y == c)
            idx = idx[rng.permutation(idx.size)]
            assign[idx] = (np.arange(idx.size) + offset) % folds
            offset += idx.size
    else:
        perm = rng.permutation(y.shape[0])
        assign[perm] = np.arange(y.shape[0]) % folds
    all_idx = np.arange(y.shape[0])
    return [(all_idx[assign != k], all_idx[assign == k]) for k in range(folds)]
