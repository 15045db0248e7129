"""Scikit-learn style estimators wrapping the functional core."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import ratio as ratio_mod
from .net import forward, predict_class, softmax
from .training import TrainConfig, train_weighted, precompute_weights
from .synthetic import ConfidenceDataset
from .validation import as_label_tuple, check_confidence_matrix, check_matrix
from .weights import (
    NoRscConf,
    NoRscSubConf,
    ScConf,
    SubConf,
    Supervised,
    WeightedBaseline,
    needs_ratio,
)

__all__ = ["ConfidenceClassifier", "DensityRatioEstimator", "build_kind", "ESTIMATOR_NAMES"]

ESTIMATOR_NAMES = (
    "sc-conf",
    "sub-conf",
    "norsc-conf",
    "norsc-sub-conf",
    "weighted",
    "supervised",
)


def build_kind(name: str, conditioning=None):
    """Map an estimator name plus a conditioning (1-based label or label list)
    to an EstimatorKind instance."""
    if name not in ESTIMATOR_NAMES:
        raise ValueError(f"unknown estimator {name!r}; choose from {ESTIMATOR_NAMES}")
    if name == "supervised":
        return Supervised()
    if name == "weighted":
        return WeightedBaseline()
    labels = as_label_tuple(conditioning) if conditioning is not None else ()
    if not labels:
        raise ValueError(f"estimator {name!r} requires a conditioning class (subset)")
    if name in ("sc-conf", "norsc-conf"):
        if len(labels) != 1:
            raise ValueError(
                f"estimator {name!r} conditions on a single class, got {labels}; "
                f"use the sub-conf variant for subsets"
            )
        return ScConf(labels[0]) if name == "sc-conf" else NoRscConf(labels[0])
    return SubConf(labels) if name == "sub-conf" else NoRscSubConf(labels)


class ConfidenceClassifier(ClassifierMixin, BaseEstimator):
    """Multi-class classifier trained from single-class data with
    confidence annotations.

    The training set is a sample from one class (or class subset) together
    with a probability vector over all K classes per example. A weighted
    cross-entropy risk built from those confidences is minimized with Adam
    over a small ReLU network.

    Parameters
    ----------
    estimator : str, default="sc-conf"
        Risk estimator: "sc-conf" (rescale by the conditioning class's
        confidence), "sub-conf" (rescale by a class subset's total
        confidence), "norsc-conf" / "norsc-sub-conf" (density-ratio
        reweighting, robust to confidence noise that preserves the top
        class; requires ``ratio``), or "weighted" (use confidences as
        weights verbatim; biased in general).
    conditioning : int or sequence of int, default=1
        1-based label(s) of the class (subset) the training sample was
        drawn from. Ignored by "weighted".
    ratio : callable, optional
        Density-ratio model x -> p(x) / p(x | conditioning), e.g. a fitted
        DensityRatioEstimator's ``ratio_`` or an analytic oracle. Required
        by the norsc estimators.
    floor : float, default=1e-2
        Lower clip on the confidence denominator of sc-conf / sub-conf
        weights; caps individual weights at 1/floor.
    hidden_dims : tuple of int, default=(64, 64)
        Hidden-layer widths of the ReLU network.
    epochs, batch_size, learning_rate, weight_decay :
        Adam training schedule (decoupled weight decay).
    validation_fraction : float, default=0.2
        Fraction of the data held out for snapshot selection by weighted
        validation risk (no labels needed).
    random_state : int, default=0
        Seed for the parameter init, the train/validation split, and the
        epoch shuffles.

    Attributes
    ----------
    model_ : MlpModel
        Selected network snapshot.
    report_ : TrainReport
        Per-epoch risks and the selected epoch.
    classes_ : ndarray of shape (K,)
        Predicted labels are 1..K, matching the confidence columns.
    """

    def __init__(
        self,
        estimator="sc-conf",
        conditioning=1,
        *,
        ratio=None,
        floor=1e-2,
        hidden_dims=(64, 64),
        epochs=100,
        batch_size=100,
        learning_rate=1e-3,
        weight_decay=1e-4,
        validation_fraction=0.2,
        random_state=0,
    ):
        self.estimator = estimator
        self.conditioning = conditioning
        self.ratio = ratio
        self.floor = floor
        self.hidden_dims = hidden_dims
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def fit(self, X, R):
        """Fit from instances X (n, d) and confidence rows R (n, K).

        Returns self.
        """
        X = check_matrix(X, name="X")
        R = check_confidence_matrix(R, name="R")
        if X.shape[0] != R.shape[0]:
            raise ValueError("X and R disagree in length")
        if self.estimator == "supervised":
            raise ValueError(
                "supervised training takes labeled data and is provided by the "
                "experiment harness, not by this estimator"
            )
        kind = build_kind(self.estimator, self.conditioning)
        if needs_ratio(kind) and self.ratio is None:
            raise ValueError(f"estimator {self.estimator!r} requires ratio=")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")

        n_val = max(1, int(round(self.validation_fraction * X.shape[0])))
        if n_val >= X.shape[0]:
            raise ValueError("not enough rows for a train/validation split")
        seq = np.random.SeedSequence(self.random_state)
        split_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seq.entropy, spawn_key=(0,))
        )
        perm = split_rng.permutation(X.shape[0])
        val_idx, tr_idx = perm[:n_val], perm[n_val:]

        cond = as_label_tuple(self.conditioning, R.shape[1]) if self.conditioning else ()
        tr = ConfidenceDataset(X[tr_idx], R[tr_idx], cond or (1,))
        va = ConfidenceDataset(X[val_idx], R[val_idx], cond or (1,))
        w = precompute_weights(tr, kind, self.ratio, self.floor)
        w_val = precompute_weights(va, kind, self.ratio, self.floor)

        config = TrainConfig(
            epochs=self.epochs,
            batch_size=min(self.batch_size, tr_idx.shape[0]),
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            seed=self.random_state,
            floor=self.floor,
            hidden_dims=tuple(self.hidden_dims),
        )
        init_seq = np.random.SeedSequence(entropy=seq.entropy, spawn_key=(1,))
        self.model_, self.report_ = train_weighted(
            init_seq, tr.instances, w, va.instances, w_val, config
        )
        self.classes_ = np.arange(1, R.shape[1] + 1)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        """Network logits, shape (n, K)."""
        check_is_fitted(self, "model_")
        X = check_matrix(X, name="X", n_features=self.n_features_in_)
        return forward(self.model_, X)

    def predict_proba(self, X):
        """Softmax of the logits."""
        return softmax(self.decision_function(X))

    def predict(self, X):
        """Predicted 1-based labels (argmax logit, ties to the lowest label)."""
        check_is_fitted(self, "model_")
        X = check_matrix(X, name="X", n_features=self.n_features_in_)
        return self.classes_[predict_class(self.model_, X)]


class DensityRatioEstimator(BaseEstimator):
    """Least-squares density-ratio fitter phi(x) ~ p(x) / p(x | class data).

    Fits a nonnegative Gaussian-kernel expansion by matching the two samples
    under a Bregman score with the squared generator (ridge-regularized
    closed form).

    Parameters
    ----------
    n_centers : int, default=100
        Kernel centers subsampled from the marginal sample.
    ridge : float, default=1e-3
        Ridge added to the kernel Gram system.
    ridge_grid : sequence of float, optional
        When given, the ridge is chosen from this grid by k-fold
        cross-validation on the Bregman score.
    cv_folds : int, default=5
    bandwidth : float, optional
        Kernel bandwidth; defaults to the median pairwise distance among
        the centers.
    random_state : int, default=0
        Seed for the center subsample.

    Attributes
    ----------
    ratio_ : RatioModel
        The fitted model; also exposed through ``predict``.
    objective_ : float
        Empirical Bregman score of the fit on the training samples.
    """

    def __init__(
        self,
        n_centers=100,
        ridge=1e-3,
        ridge_grid=None,
        cv_folds=5,
        bandwidth=None,
        random_state=0,
    ):
        self.n_centers = n_centers
        self.ridge = ridge
        self.ridge_grid = ridge_grid
        self.cv_folds = cv_folds
        self.bandwidth = bandwidth
        self.random_state = random_state

    def fit(self, X_class, X_marginal):
        """Fit from the class-conditional sample (denominator) and a sample
        of the marginal (numerator). Returns self."""
        X_class = check_matrix(X_class, name="X_class")
        X_marginal = check_matrix(X_marginal, name="X_marginal", n_features=X_class.shape[1])
        config = ratio_mod.RatioConfig(
            n_centers=self.n_centers,
            ridge=self.ridge,
            ridge_grid=tuple(self.ridge_grid) if self.ridge_grid else None,
            cv_folds=self.cv_folds,
            bandwidth=self.bandwidth,
        )
        self.ratio_ = ratio_mod.fit_ratio(X_class, X_marginal, config, seed=self.random_state)
        self.objective_ = ratio_mod.empirical_bregman(self.ratio_, X_class, X_marginal)
        self.n_features_in_ = X_class.shape[1]
        return self

    def predict(self, X):
        """Ratio values at X; nonnegative by construction."""
        check_is_fitted(self, "ratio_")
        X = check_matrix(X, name="X", n_features=self.n_features_in_)
        return self.ratio_(X)
