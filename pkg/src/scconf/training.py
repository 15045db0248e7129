"""Mini-batch training of the MLP under a chosen risk estimator.

The estimator only enters through the per-example class weights, which are
model-independent and therefore computed once before the loop. Model selection
uses the same weighted risk on a held-out confidence sample (weak validation:
no labels required), taking the earliest epoch on ties.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .net import (
    AdamState,
    DivergenceError,
    MlpModel,
    adam_step,
    init_mlp,
    predict_class,
    weighted_batch_grad,
)
from .validation import check_labels, check_matrix, check_weight_matrix
from .weights import (
    EstimatorKind,
    NoRscConf,
    NoRscSubConf,
    ScConf,
    SubConf,
    Supervised,
    WeightedBaseline,
    empirical_risk,
    norsc_weights,
    sc_conf_weights,
    sub_conf_weights,
    weighted_baseline_weights,
)

__all__ = [
    "TrainConfig",
    "TrainReport",
    "precompute_weights",
    "train_weighted",
    "train",
    "evaluate_accuracy",
]


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 100
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 0
    estimator: EstimatorKind | None = None
    floor: float = 1e-2
    eval_every: int = 1
    hidden_dims: tuple[int, ...] = (64, 64)


@dataclass
class TrainReport:
    """Per-epoch risks and the selected snapshot.

    ``train_risks[e]`` is the mean weighted batch loss of epoch e;
    ``val_risks[i]`` is the validation risk after epoch ``val_epochs[i]``;
    ``selected_epoch`` is the (0-based) epoch whose snapshot was kept.
    ``wall_seconds`` is informational only and is excluded from serialized
    artifacts so identical runs stay byte-identical.
    """

    train_risks: list[float] = field(default_factory=list)
    val_risks: list[float] = field(default_factory=list)
    val_epochs: list[int] = field(default_factory=list)
    selected_epoch: int = -1
    test_accuracy: float | None = None
    wall_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "train_risks": self.train_risks,
            "val_risks": self.val_risks,
            "val_epochs": self.val_epochs,
            "selected_epoch": self.selected_epoch,
            "test_accuracy": self.test_accuracy,
        }


def precompute_weights(data, kind: EstimatorKind, ratio=None, floor: float = 1e-2) -> np.ndarray:
    """Per-example class weights for a ConfidenceDataset under an estimator
    kind. ``ratio`` (a callable x -> phi(x)) is required for the
    noise-robust kinds and ignored otherwise."""
    r = data.confidences
    n_classes = r.shape[1]

    def col(label):
        if not 1 <= label <= n_classes:
            raise ValueError(f"class label {label} out of range 1..{n_classes}")
        return label - 1

    if isinstance(kind, ScConf):
        return sc_conf_weights(r, col(kind.class_label), floor)
    if isinstance(kind, SubConf):
        return sub_conf_weights(r, [col(c) for c in kind.class_labels], floor)
    if isinstance(kind, (NoRscConf, NoRscSubConf)):
        if ratio is None:
            raise ValueError(f"{type(kind).__name__} requires a fitted or analytic ratio")
        return norsc_weights(r, ratio(data.instances))
    if isinstance(kind, WeightedBaseline):
        return weighted_baseline_weights(r)
    if isinstance(kind, Supervised):
        raise ValueError(
            "the supervised kind trains on labeled data; use one_hot_weights(labels)"
        )
    raise TypeError(f"unknown estimator kind: {kind!r}")


def train_weighted(
    init_seed,
    x: np.ndarray,
    w: np.ndarray,
    x_val: np.ndarray,
    w_val: np.ndarray,
    config: TrainConfig,
    test=None,
):
    """Adam training of a fresh MLP on precomputed weights.

    Returns (model, TrainReport); the model is the snapshot with the lowest
    validation risk. Raises DivergenceError if a batch loss or gradient goes
    non-finite. ``test`` is an optional (x, labels) pair scored at the end.
    """
    x = check_matrix(x, name="x")
    w = check_weight_matrix(w, name="w")
    x_val = check_matrix(x_val, name="x_val", n_features=x.shape[1])
    w_val = check_weight_matrix(w_val, n_classes=w.shape[1], name="w_val")
    n = x.shape[0]
    if w.shape[0] != n or x_val.shape[0] != w_val.shape[0]:
        raise ValueError("instances and weights disagree in length")
    if config.batch_size < 1 or config.batch_size > n:
        raise ValueError(f"batch_size must lie in 1..{n}, got {config.batch_size}")
    if config.epochs < 1 or config.eval_every < 1:
        raise ValueError("epochs and eval_every must be >= 1")

    start = time.perf_counter()
    dims = [x.shape[1], *config.hidden_dims, w.shape[1]]
    model = init_mlp(dims, init_seed)
    state = AdamState.init(model)
    shuffle_rng = np.random.default_rng(config.seed)

    report = TrainReport()
    best_risk = np.inf
    best_model = model.copy()
    best_epoch = 0

    for epoch in range(config.epochs):
        perm = shuffle_rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            batch = perm[lo : lo + config.batch_size]
            grads, loss = weighted_batch_grad(model, x[batch], w[batch])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            try:
                adam_step(model, state, grads, config.learning_rate, config.weight_decay)
            except DivergenceError as exc:
                raise DivergenceError(str(exc), epoch=epoch) from exc
            total += loss * batch.shape[0]
        report.train_risks.append(total / n)

        if (epoch + 1) % config.eval_every == 0 or epoch == config.epochs - 1:
            val_risk = empirical_risk(model, x_val, w_val)
            if not np.isfinite(val_risk):
                raise DivergenceError(f"non-finite validation risk at epoch {epoch}", epoch=epoch)
            report.val_risks.append(val_risk)
            report.val_epochs.append(epoch)
            if val_risk < best_risk:
                best_risk = val_risk
                best_model = model.copy()
                best_epoch = epoch

    report.selected_epoch = best_epoch
    model = best_model
    if test is not None:
        x_test, y_test = test
        report.test_accuracy = evaluate_accuracy(model, x_test, y_test)
    report.wall_seconds = time.perf_counter() - start
    return model, report


def train(init_seed, train_data, val_data, config: TrainConfig, ratio=None, test=None):
    """Train from ConfidenceDatasets: weights are derived from
    ``config.estimator`` (and ``ratio`` for the noise-robust kinds) once,
    then handed to train_weighted."""
    if config.estimator is None:
        raise ValueError("config.estimator must be set")
    if train_data.confidences.shape[1] != val_data.confidences.shape[1]:
        raise ValueError("train and validation data disagree on the class count")
    w = precompute_weights(train_data, config.estimator, ratio, config.floor)
    w_val = precompute_weights(val_data, config.estimator, ratio, config.floor)
    return train_weighted(
        init_seed, train_data.instances, w, val_data.instances, w_val, config, test=test
    )


def evaluate_accuracy(model: MlpModel, x, y_labels) -> float:
    """Fraction of rows whose predicted label (1-based) matches y_labels."""
    x = check_matrix(x, name="x")
    y = check_labels(y_labels, model.layer_dims[-1], name="y_labels")
    if y.shape[0] != x.shape[0]:
        raise ValueError("x and y_labels disagree in length")
    return float(np.mean(predict_class(model, x) + 1 == y))
