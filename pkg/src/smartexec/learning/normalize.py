from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from smartexec.loopir import FEATURE_NAMES

# Count-valued inputs span many decades (8 ops up to 5e7 iterations), so they
# are compressed with log10(1 + v) before z-scoring.
LOG_FEATURES = frozenset({"iterations", "total_ops", "float_ops", "comparison_ops"})


@dataclass(frozen=True)
class Normalizer:
    """Per-feature forward transform for every non-bias input."""

    log10p1: tuple[bool, ...]
    mean: tuple[float, ...]
    stddev: tuple[float, ...]

    def __post_init__(self):
        n = len(FEATURE_NAMES) - 1
        if not (len(self.log10p1) == len(self.mean) == len(self.stddev) == n):
            raise ValueError(f"normalizer needs {n} entries per field")
        if not all(np.isfinite(self.mean)) or not all(np.isfinite(self.stddev)):
            raise ValueError("normalizer parameters must be finite")
        if min(self.stddev) <= 0:
            raise ValueError("normalizer stddev must be positive")

    @classmethod
    def identity(cls) -> "Normalizer":
        n = len(FEATURE_NAMES) - 1
        return cls((False,) * n, (0.0,) * n, (1.0,) * n)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return apply_normalizer(self, x)

    @cached_property
    def _params(self):
        return tuple(zip(self.log10p1, self.mean, self.stddev))

    def transform_one(self, x) -> list[float]:
        """Scalar-loop transform of one raw vector; cheaper than numpy at this size."""
        x = x.tolist() if isinstance(x, np.ndarray) else [float(v) for v in x]
        out = [x[0]]
        for v, (lg, m, s) in zip(x[1:], self._params):
            out.append(((math.log10(1.0 + v) if lg else v) - m) / s)
        return out


def _log_mask() -> np.ndarray:
    return np.array([name in LOG_FEATURES for name in FEATURE_NAMES[1:]])


def fit_normalizer(X: np.ndarray) -> Normalizer:
    """Fit on raw rows laid out as ``FEATURE_NAMES`` (bias column included)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    mask = _log_mask()
    Z = X[:, 1:].copy()
    Z[:, mask] = np.log10(1.0 + Z[:, mask])
    mean = Z.mean(axis=0)
    std = Z.std(axis=0)
    std[std == 0] = 1.0
    return Normalizer(tuple(bool(m) for m in mask), tuple(map(float, mean)),
                      tuple(map(float, std)))


def apply_normalizer(n: Normalizer, x: np.ndarray) -> np.ndarray:
    """Transform one raw vector or a matrix of rows; the bias entry passes through."""
    x = np.asarray(x, dtype=np.float64)
    out = x.copy()
    body = out[..., 1:]
    mask = np.asarray(n.log10p1)
    body[..., mask] = np.log10(1.0 + body[..., mask])
    body -= np.asarray(n.mean)
    body /= np.asarray(n.stddev)
    return out
