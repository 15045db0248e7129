"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_matrix",
    "check_confidence_matrix",
    "check_labels",
    "check_weight_matrix",
    "as_label_tuple",
]

# |sum(r) - 1| up to this tolerance is silently renormalized; beyond it the
# row is rejected as malformed rather than quietly rescaled.
CONFIDENCE_SUM_TOL = 1e-6


def check_matrix(x, name="X", n_features=None):
    """Coerce ``x`` to a 2-D float64 array with finite entries."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    if n_features is not None and x.shape[1] != n_features:
        raise ValueError(
            f"{name} has {x.shape[1]} features, expected {n_features}"
        )
    return x


def check_confidence_matrix(r, n_classes=None, name="R"):
    """Validate an (n, K) matrix of confidence rows.

    Entries must lie in [0, 1] and each row must sum to 1 up to
    ``CONFIDENCE_SUM_TOL``; rows within the tolerance are renormalized to sum
    to exactly 1.
    """
    r = check_matrix(r, name=name, n_features=n_classes)
    if r.shape[1] < 2:
        raise ValueError(f"{name} needs at least 2 classes, got {r.shape[1]}")
    if np.any(r < -1e-12) or np.any(r > 1.0 + 1e-12):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    r = np.clip(r, 0.0, 1.0)
    sums = r.sum(axis=1)
    bad = np.abs(sums - 1.0) > CONFIDENCE_SUM_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ValueError(
            f"{name} row {i} sums to {sums[i]!r}, outside 1 +/- {CONFIDENCE_SUM_TOL}"
        )
    return r / sums[:, None]


def check_labels(y, n_classes, name="y"):
    """Validate 1-based integer class labels in {1..n_classes}."""
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    yi = y.astype(np.int64)
    if np.any(yi != y):
        raise ValueError(f"{name} must contain integers")
    if yi.min() < 1 or yi.max() > n_classes:
        raise ValueError(f"{name} labels must lie in 1..{n_classes}")
    return yi


def check_weight_matrix(w, n_classes=None, name="W"):
    """Validate an (n, K) matrix of nonnegative per-class loss weights."""
    w = check_matrix(w, name=name, n_features=n_classes)
    if np.any(w < 0):
        raise ValueError(f"{name} must be nonnegative")
    return w


def as_label_tuple(conditioning, n_classes=None):
    """Normalize a conditioning spec (int or iterable of ints) to a sorted
    tuple of unique 1-based labels."""
    if np.isscalar(conditioning):
        labels = (int(conditioning),)
    else:
        labels = tuple(int(c) for c in conditioning)
    if len(labels) == 0:
        raise ValueError("conditioning must name at least one class")
    if len(set(labels)) != len(labels):
        raise ValueError(f"conditioning has duplicate labels: {labels}")
    if any(c < 1 for c in labels):
        raise ValueError(f"conditioning labels are 1-based, got {labels}")
    if n_classes is not None and any(c > n_classes for c in labels):
        raise ValueError(f"conditioning labels must lie in 1..{n_classes}")
    return tuple(sorted(labels))
