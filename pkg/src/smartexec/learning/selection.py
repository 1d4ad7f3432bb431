"""Single-split information-gain ranking of candidate loop features."""

from __future__ import annotations

import numpy as np


def entropy(labels) -> float:
    _, counts = np.unique(np.asarray(labels), return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def quartile_bins(x) -> np.ndarray:
    """Bin index per sample using the 25/50/75% quantiles as right-closed edges."""
    x = np.asarray(x, dtype=np.float64)
    edges = np.unique(np.quantile(x, [0.25, 0.5, 0.75]))
    return np.digitize(x, edges, right=True)


def information_gain(x, labels) -> float:
    labels = np.asarray(labels)
    bins = quartile_bins(x)
    conditional = 0.0
    for b in np.unique(bins):
        sel = bins == b
        conditional += sel.mean() * entropy(labels[sel])
    return entropy(labels) - conditional


def select_features_info_gain(X, labels, k: int) -> list[int]:
    """Indices of the ``k`` columns of ``X`` with the largest gain, best first.

    Ties keep the lower column index.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("no samples")
    if not 0 <= k <= X.shape[1]:
        raise ValueError(f"k={k} outside [0, {X.shape[1]}]")
    gains = [information_gain(X[:, j], labels) for j in range(X.shape[1])]
    # Round away float noise so equal gains tie exactly and fall back to index order.
    order = sorted(range(X.shape[1]), key=lambda j: (-round(gains[j], 12), j))
    return order[:k]
