"""Tests for weight precomputation, the training loop, and evaluation."""

import numpy as np
import pytest

from scconf.net import DivergenceError, MlpModel, init_mlp
from scconf.synthetic import (
    ConfidenceDataset,
    GaussianMixtureSpec,
    build_confidence_dataset,
    sample_joint,
    true_density_ratio,
)
from scconf.training import (
    TrainConfig,
    evaluate_accuracy,
    precompute_weights,
    train,
    train_weighted,
)
from scconf.weights import (
    NoRscConf,
    ScConf,
    SubConf,
    Supervised,
    WeightedBaseline,
    sc_conf_weights,
    weighted_baseline_weights,
)

PHI_2 = 0.9772498680518208  # standard normal CDF at 2


def small_dataset(n=40, seed=0, k=3):
    spec = GaussianMixtureSpec(
        np.full(k, 1.0 / k),
        np.arange(k, dtype=float).reshape(-1, 1) * 2.0,
        np.stack([np.eye(1)] * k),
    )
    return build_confidence_dataset(spec, (1,), n, noise="clean", seed=seed), spec


# ---------------------------------------------------------------------------
# precompute_weights
# ---------------------------------------------------------------------------


def test_precompute_weighted_baseline_is_the_confidences():
    ds, _ = small_dataset()
    w = precompute_weights(ds, WeightedBaseline())
    np.testing.assert_allclose(w, ds.confidences, rtol=1e-15)
    np.testing.assert_array_equal(w, weighted_baseline_weights(ds.confidences))


def test_precompute_sc_conf_uniform_rows_give_unit_weights():
    ds = ConfidenceDataset(
        instances=np.random.default_rng(0).normal(size=(25, 2)),
        confidences=np.full((25, 3), 1.0 / 3.0),
        conditioning=(2,),
    )
    w = precompute_weights(ds, ScConf(2), floor=1e-2)
    np.testing.assert_array_equal(w, np.ones((25, 3)))


def test_precompute_sc_conf_maps_labels_to_columns():
    ds, _ = small_dataset()
    np.testing.assert_array_equal(
        precompute_weights(ds, ScConf(1), floor=1e-2),
        sc_conf_weights(ds.confidences, 0, floor=1e-2),
    )
    np.testing.assert_array_equal(
        precompute_weights(ds, ScConf(3), floor=1e-2),
        sc_conf_weights(ds.confidences, 2, floor=1e-2),
    )


def test_precompute_floor_caps_the_denominator():
    ds = ConfidenceDataset(
        instances=np.zeros((1, 1)),
        confidences=np.array([[0.1, 0.9]]),
        conditioning=(1,),
    )
    w = precompute_weights(ds, ScConf(1), floor=0.5)
    np.testing.assert_allclose(w, [[0.2, 1.8]], rtol=1e-15)


def test_precompute_norsc_uses_the_ratio_callable():
    ds, spec = small_dataset()
    ratio = lambda x: true_density_ratio(spec, x, (1,))
    w = precompute_weights(ds, NoRscConf(1), ratio=ratio)
    manual = ratio(ds.instances)[:, None] * weighted_baseline_weights(ds.confidences)
    np.testing.assert_array_equal(w, manual)


def test_precompute_error_paths():
    ds, _ = small_dataset()
    with pytest.raises(ValueError):
        precompute_weights(ds, NoRscConf(1))  # needs a ratio
    with pytest.raises(ValueError):
        precompute_weights(ds, Supervised())
    with pytest.raises(ValueError):
        precompute_weights(ds, ScConf(5))  # label out of range
    with pytest.raises(ValueError):
        precompute_weights(ds, SubConf((1, 4)))
    with pytest.raises(TypeError):
        precompute_weights(ds, object())


# ---------------------------------------------------------------------------
# train_weighted mechanics
# ---------------------------------------------------------------------------


def tiny_batch(n=30, d=2, k=3, seed=1):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    w = rng.uniform(0.0, 1.0, size=(n, k))
    return x, w


def test_zero_learning_rate_keeps_the_initial_model():
    x, w = tiny_batch()
    cfg = TrainConfig(epochs=1, batch_size=10, learning_rate=0.0, weight_decay=0.0,
                      seed=0, hidden_dims=(4,))
    model, report = train_weighted(7, x, w, x, w, cfg)
    expected = init_mlp([2, 4, 3], seed=7)
    for a, b in zip(model.weights, expected.weights):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(model.biases, expected.biases):
        np.testing.assert_array_equal(a, b)


def test_zero_weights_give_zero_risk_and_no_update():
    x, _ = tiny_batch()
    w = np.zeros((30, 3))
    cfg = TrainConfig(epochs=3, batch_size=10, learning_rate=1e-2, weight_decay=0.0,
                      seed=0, hidden_dims=(4,))
    model, report = train_weighted(7, x, w, x, w, cfg)
    assert report.train_risks == [0.0, 0.0, 0.0]
    assert report.val_risks == [0.0, 0.0, 0.0]
    assert report.selected_epoch == 0  # ties keep the earliest snapshot
    expected = init_mlp([2, 4, 3], seed=7)
    for a, b in zip(model.weights, expected.weights):
        np.testing.assert_array_equal(a, b)


def test_training_is_bitwise_deterministic():
    x, w = tiny_batch()
    cfg = TrainConfig(epochs=4, batch_size=10, seed=3, hidden_dims=(6,))
    m1, r1 = train_weighted(2, x, w, x, w, cfg)
    m2, r2 = train_weighted(2, x, w, x, w, cfg)
    for a, b in zip(m1.weights, m2.weights):
        np.testing.assert_array_equal(a, b)
    assert r1.train_risks == r2.train_risks
    assert r1.val_risks == r2.val_risks
    assert r1.selected_epoch == r2.selected_epoch


def test_selected_epoch_attains_the_minimum_validation_risk():
    x, w = tiny_batch(n=60)
    cfg = TrainConfig(epochs=8, batch_size=20, seed=1, hidden_dims=(8,))
    _, report = train_weighted(0, x, w, x, w, cfg)
    risks = np.array(report.val_risks)
    assert report.val_epochs[int(np.argmin(risks))] == report.selected_epoch
    assert report.val_risks[report.val_epochs.index(report.selected_epoch)] == risks.min()


def test_eval_every_schedules_validation():
    x, w = tiny_batch(n=20)
    cfg = TrainConfig(epochs=12, batch_size=10, seed=0, eval_every=5, hidden_dims=(4,))
    _, report = train_weighted(0, x, w, x, w, cfg)
    assert report.val_epochs == [4, 9, 11]  # every 5th epoch plus the final one
    assert len(report.val_risks) == 3
    assert report.selected_epoch in report.val_epochs


def test_train_weighted_argument_errors():
    x, w = tiny_batch()
    cfg = TrainConfig(epochs=1, batch_size=10, hidden_dims=(4,))
    with pytest.raises(ValueError):
        train_weighted(0, x, w[:-1], x, w, cfg)
    with pytest.raises(ValueError):
        train_weighted(0, x, w, x, w, TrainConfig(epochs=1, batch_size=31, hidden_dims=(4,)))
    with pytest.raises(ValueError):
        train_weighted(0, x, w, x, w, TrainConfig(epochs=0, batch_size=10, hidden_dims=(4,)))
    with pytest.raises(ValueError):
        train_weighted(0, x, -w, x, w, cfg)


def test_divergence_error_carries_the_epoch():
    x, w = tiny_batch()
    cfg = TrainConfig(epochs=3, batch_size=10, learning_rate=1e155, weight_decay=0.0,
                      seed=0, hidden_dims=(4,))
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(DivergenceError) as exc:
        train_weighted(0, x, w, x, w, cfg)
    assert exc.value.epoch is not None
    assert 0 <= exc.value.epoch < 3


# ---------------------------------------------------------------------------
# train() on confidence datasets
# ---------------------------------------------------------------------------


def test_train_requires_an_estimator_kind():
    ds, _ = small_dataset()
    with pytest.raises(ValueError):
        train(0, ds, ds, TrainConfig(epochs=1, batch_size=10, hidden_dims=(4,)))


def test_train_rejects_mismatched_class_counts():
    ds3, _ = small_dataset(k=3)
    ds2, _ = small_dataset(k=2)
    cfg = TrainConfig(epochs=1, batch_size=10, estimator=ScConf(1), hidden_dims=(4,))
    with pytest.raises(ValueError):
        train(0, ds3, ds2, cfg)


def test_training_risk_decreases_and_accuracy_is_near_bayes():
    # two unit-variance classes four apart: the Bayes accuracy is Phi(2);
    # training on class-1 data alone must land within two points of it
    sep = GaussianMixtureSpec(
        np.array([0.5, 0.5]),
        np.array([[0.0], [4.0]]),
        np.stack([np.eye(1), np.eye(1)]),
    )
    tr = build_confidence_dataset(sep, (1,), 2000, noise="clean", seed=101)
    va = build_confidence_dataset(sep, (1,), 400, noise="clean", seed=108)
    xt, yt = sample_joint(sep, 20000, seed=103)
    cfg = TrainConfig(
        epochs=60,
        batch_size=100,
        learning_rate=1e-3,
        weight_decay=1e-4,
        seed=0,
        estimator=ScConf(1),
        hidden_dims=(32,),
    )
    model, report = train(7, tr, va, cfg, test=(xt, yt))
    assert report.train_risks[-1] < report.train_risks[0]
    assert report.test_accuracy == pytest.approx(PHI_2, abs=0.02)
    assert report.test_accuracy == evaluate_accuracy(model, xt, yt)


# ---------------------------------------------------------------------------
# evaluate_accuracy
# ---------------------------------------------------------------------------


def constant_predictor(k, winner_col):
    biases = np.zeros(k)
    biases[winner_col] = 1.0
    return MlpModel(layer_dims=[2, k], weights=[np.zeros((2, k))], biases=[biases])


def test_evaluate_accuracy_counts_matches():
    model = constant_predictor(3, winner_col=1)  # always predicts label 2
    rng = np.random.default_rng(0)
    y = rng.integers(1, 4, size=200)
    acc = evaluate_accuracy(model, rng.normal(size=(200, 2)), y)
    assert acc == float(np.mean(y == 2))


def test_evaluate_accuracy_trivial_cases():
    model = constant_predictor(3, winner_col=2)
    x = np.zeros((5, 2))
    assert evaluate_accuracy(model, x, np.full(5, 3)) == 1.0
    assert evaluate_accuracy(model, x, np.full(5, 1)) == 0.0


def test_evaluate_accuracy_validates_labels():
    model = constant_predictor(3, winner_col=0)
    x = np.zeros((4, 2))
    with pytest.raises(ValueError):
        evaluate_accuracy(model, x, np.array([0, 1, 2, 3]))  # labels are 1-based
    with pytest.raises(ValueError):
        evaluate_accuracy(model, x, np.array([1, 2, 3, 4]))  # beyond K
    with pytest.raises(ValueError):
        evaluate_accuracy(model, x, np.array([1, 2]))  # length mismatch
