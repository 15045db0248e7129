"""Per-example loss weights and empirical risks for confidence-annotated data.

A training example is a feature row plus a confidence row r (a probability
vector over the K classes). Each estimator kind turns r into a nonnegative
weight per class; the weighted cross entropy summed over classes and averaged
over examples is that estimator's empirical risk. Class *labels* on the public
surface are 1-based; the functions in this module work with 0-based column
indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net import forward, softmax_cross_entropy, _log_sum_exp
from .validation import check_confidence_matrix, check_matrix, check_weight_matrix

__all__ = [
    "ScConf",
    "SubConf",
    "NoRscConf",
    "NoRscSubConf",
    "WeightedBaseline",
    "Supervised",
    "EstimatorKind",
    "conditioning_labels",
    "needs_ratio",
    "prior_multiplier",
    "sc_conf_weights",
    "sub_conf_weights",
    "norsc_weights",
    "weighted_baseline_weights",
    "one_hot_weights",
    "per_example_weighted_loss",
    "empirical_risk",
    "supervised_risk",
    "margin_delta",
]


# ---------------------------------------------------------------------------
# Estimator kinds. Fields hold 1-based class labels (the file/CLI convention).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScConf:
    """Rescale confidences by the observed class's own confidence."""

    class_label: int


@dataclass(frozen=True)
class SubConf:
    """Rescale confidences by the total confidence of a class subset."""

    class_labels: tuple[int, ...]


@dataclass(frozen=True)
class NoRscConf:
    """Confidences reweighted by a marginal-over-conditional density ratio;
    robust to confidence noise that preserves the top class."""

    class_label: int


@dataclass(frozen=True)
class NoRscSubConf:
    """Subset-conditioned variant of NoRscConf."""

    class_labels: tuple[int, ...]


@dataclass(frozen=True)
class WeightedBaseline:
    """Use the confidence row itself as the weight (biased in general)."""


@dataclass(frozen=True)
class Supervised:
    """Ordinary supervised risk; takes labeled data, not confidences."""


EstimatorKind = ScConf | SubConf | NoRscConf | NoRscSubConf | WeightedBaseline | Supervised


def conditioning_labels(kind: EstimatorKind) -> tuple[int, ...]:
    """The 1-based labels whose class-conditional data the kind consumes.
    Empty tuple for kinds that do not condition on a class subset."""
    if isinstance(kind, (ScConf, NoRscConf)):
        return (kind.class_label,)
    if isinstance(kind, (SubConf, NoRscSubConf)):
        return tuple(sorted(kind.class_labels))
    return ()


def needs_ratio(kind: EstimatorKind) -> bool:
    return isinstance(kind, (NoRscConf, NoRscSubConf))


def prior_multiplier(kind: EstimatorKind, priors) -> float:
    """Constant in front of the weighted risk that makes it match the
    supervised risk in expectation. It does not affect the argmin, so
    training omits it; unbiasedness checks multiply it back in."""
    priors = np.asarray(priors, dtype=np.float64)
    labels = conditioning_labels(kind)
    if isinstance(kind, (ScConf, SubConf)):
        return float(sum(priors[c - 1] for c in labels))
    return 1.0


# ---------------------------------------------------------------------------
# Weight constructions
# ---------------------------------------------------------------------------


def _as_rows(r, n_classes=None):
    r = np.asarray(r, dtype=np.float64)
    single = r.ndim == 1
    rows = check_confidence_matrix(r, n_classes=n_classes)
    return rows, single


def sc_conf_weights(r, target: int, floor: float = 0.0) -> np.ndarray:
    """w_y = r_y / max(r_target, floor) for one or many confidence rows.

    ``target`` is a 0-based column index. With floor = 0 a zero confidence in
    the target column is an error; a positive floor caps the weights at
    1/floor instead.
    """
    rows, single = _as_rows(r)
    if not 0 <= target < rows.shape[1]:
        raise IndexError(f"target column {target} out of range for K={rows.shape[1]}")
    if floor < 0:
        raise ValueError("floor must be >= 0")
    denom = rows[:, target]
    if floor > 0.0:
        denom = np.maximum(denom, floor)
    elif np.any(denom == 0.0):
        raise ZeroDivisionError(
            "zero confidence in the conditioning class with floor=0"
        )
    w = rows / denom[:, None]
    return w[0] if single else w


def sub_conf_weights(r, subset, floor: float = 0.0) -> np.ndarray:
    """w_y = r_y / max(sum_{c in subset} r_c, floor).

    ``subset`` holds 0-based column indices; a singleton subset reproduces
    sc_conf_weights exactly.
    """
    rows, single = _as_rows(r)
    cols = np.asarray(sorted(set(int(c) for c in subset)), dtype=np.int64)
    if cols.size == 0:
        raise ValueError("subset must not be empty")
    if cols.min() < 0 or cols.max() >= rows.shape[1]:
        raise IndexError(f"subset {cols.tolist()} out of range for K={rows.shape[1]}")
    if floor < 0:
        raise ValueError("floor must be >= 0")
    denom = rows[:, cols].sum(axis=1)
    if floor > 0.0:
        denom = np.maximum(denom, floor)
    elif np.any(denom == 0.0):
        raise ZeroDivisionError(
            "zero total confidence on the conditioning subset with floor=0"
        )
    w = rows / denom[:, None]
    return w[0] if single else w


def norsc_weights(r, phi) -> np.ndarray:
    """w_y = phi * r_y with phi the density-ratio value at the example.

    phi is a scalar for a single row or an (n,) vector for a batch; negative
    ratios are rejected.
    """
    rows, single = _as_rows(r)
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim == 0:
        phi = np.full(rows.shape[0], float(phi))
    if phi.shape != (rows.shape[0],):
        raise ValueError(f"phi has shape {phi.shape}, expected ({rows.shape[0]},)")
    if np.any(phi < 0) or not np.all(np.isfinite(phi)):
        raise ValueError("density-ratio values must be finite and >= 0")
    w = phi[:, None] * rows
    return w[0] if single else w


def weighted_baseline_weights(r) -> np.ndarray:
    """w = r verbatim."""
    rows, single = _as_rows(r)
    w = rows.copy()
    return w[0] if single else w


def one_hot_weights(y_cols, n_classes: int) -> np.ndarray:
    """Supervised weights: one-hot rows from 0-based class columns."""
    y = np.asarray(y_cols, dtype=np.int64)
    if y.ndim != 1:
        raise ValueError("y_cols must be 1-D")
    if y.min() < 0 or y.max() >= n_classes:
        raise IndexError(f"class column out of range for K={n_classes}")
    w = np.zeros((y.shape[0], n_classes))
    w[np.arange(y.shape[0]), y] = 1.0
    return w


# ---------------------------------------------------------------------------
# Risks
# ---------------------------------------------------------------------------


def per_example_weighted_loss(model, x, w) -> np.ndarray:
    """sum_y w[i, y] * ce(logits_i, y) for each row i, without averaging."""
    x = check_matrix(x, name="x")
    w = check_weight_matrix(w, name="w")
    if x.shape[0] != w.shape[0]:
        raise ValueError(f"x has {x.shape[0]} rows, w has {w.shape[0]}")
    logits = forward(model, x)
    lse = _log_sum_exp(logits)
    return w.sum(axis=1) * lse - (w * logits).sum(axis=1)


def empirical_risk(model, x, w) -> float:
    """Mean weighted loss over the batch."""
    return float(np.mean(per_example_weighted_loss(model, x, w)))


def supervised_risk(model, x, y_cols) -> float:
    """Mean cross entropy against hard 0-based class columns."""
    x = check_matrix(x, name="x")
    losses = softmax_cross_entropy(forward(model, x), y_cols)
    return float(np.mean(losses))


def margin_delta(r) -> np.ndarray:
    """Gap between the largest and second-largest entry of each confidence
    row. Equals 1 exactly on one-hot rows."""
    rows, single = _as_rows(r)
    part = np.partition(rows, rows.shape[1] - 2, axis=1)
    delta = part[:, -1] - part[:, -2]
    return float(delta[0]) if single else delta
