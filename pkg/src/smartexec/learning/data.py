"""Labeled feature datasets and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from smartexec.loopir import FEATURE_NAMES

CSV_COLUMNS = (*FEATURE_NAMES[1:], "label")

BINARY_CLASSES = ("seq", "par")
CHUNK_CLASSES = ("0.001", "0.01", "0.10", "0.50")
PREFETCH_CLASSES = ("1", "5", "10", "100", "500")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Raw-scale feature rows (bias column first) with integer class labels."""

    X: np.ndarray
    y: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if len(y) == 0:
            raise DatasetError("dataset is empty")
        if X.shape[0] != len(y):
            raise DatasetError(f"{X.shape[0]} rows but {len(y)} labels")
        if len(self.class_names) < 2:
            raise DatasetError("need at least two class names")
        if y.min() < 0 or y.max() >= len(self.class_names):
            raise DatasetError("label index out of range")
        if not np.all(np.isfinite(X)):
            raise DatasetError("features must be finite")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def targets(self) -> np.ndarray:
        """One-hot target matrix, N x C."""
        T = np.zeros((len(self.y), self.n_classes))
        T[np.arange(len(self.y)), self.y] = 1.0
        return T

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.class_names)


def train_test_split(data: Dataset, train_fraction: float, seed: int):
    """Shuffle deterministically and cut; the test part is ``None`` when empty."""
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError("train fraction must be in (0, 1]")
    perm = np.random.default_rng(seed).permutation(len(data))
    n_train = max(1, int(round(train_fraction * len(data))))
    train = data.subset(perm[:n_train])
    test = data.subset(perm[n_train:]) if n_train < len(data) else None
    return train, test


def write_dataset(data: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row, label in zip(data.X, data.y):
            w.writerow([_fmt_feature(v) for v in row[1:]] + [data.class_names[label]])


def _fmt_feature(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def read_dataset(path, class_names) -> Dataset:
    path = Path(path)
    class_names = tuple(class_names)
    lookup = {name: i for i, name in enumerate(class_names)}
    rows, labels = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise DatasetError(f"{path}: header must be {','.join(CSV_COLUMNS)}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(CSV_COLUMNS):
                raise DatasetError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields")
            label = rec[-1].strip()
            if label not in lookup:
                raise DatasetError(f"{path}:{lineno}: unknown label {label!r}")
            try:
                rows.append([1.0] + [float(v) for v in rec[:-1]])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            labels.append(lookup[label])
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return Dataset(np.array(rows), np.array(labels), class_names)
