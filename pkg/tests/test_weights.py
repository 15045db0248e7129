"""Tests for the per-example weight constructors and weighted risks."""

import numpy as np
import pytest

from scconf.net import forward, init_mlp, softmax_cross_entropy
from scconf.weights import (
    NoRscConf,
    NoRscSubConf,
    ScConf,
    SubConf,
    Supervised,
    WeightedBaseline,
    conditioning_labels,
    empirical_risk,
    margin_delta,
    needs_ratio,
    norsc_weights,
    one_hot_weights,
    per_example_weighted_loss,
    prior_multiplier,
    sc_conf_weights,
    sub_conf_weights,
    supervised_risk,
    weighted_baseline_weights,
)


def random_confidences(n, k, seed):
    rng = np.random.default_rng(seed)
    r = rng.dirichlet(np.ones(k), size=n)
    return r


# ---------------------------------------------------------------------------
# weight constructors
# ---------------------------------------------------------------------------


def test_sc_conf_frozen_example():
    r = np.array([0.2, 0.7, 0.1])
    w = sc_conf_weights(r, 0, floor=0.01)
    np.testing.assert_allclose(w, [1.0, 3.5, 0.5], rtol=1e-15)


def test_sc_conf_floor_caps_weights():
    r = np.array([1e-4, 0.9999 - 1e-4, 1e-4])
    w = sc_conf_weights(r, 0, floor=1e-2)
    # denominator clipped at the floor, so no weight exceeds 1/floor
    assert np.all(w <= 100.0 + 1e-12)
    np.testing.assert_allclose(w, r / 1e-2, rtol=1e-15)


def test_sc_conf_zero_denominator_without_floor():
    r = np.array([0.0, 1.0])
    with pytest.raises(ZeroDivisionError):
        sc_conf_weights(r, 0, floor=0.0)


def test_sub_conf_frozen_example():
    r = np.array([0.5, 0.3, 0.2])
    w = sub_conf_weights(r, (0, 1), floor=0.01)
    np.testing.assert_allclose(w, [0.625, 0.375, 0.25], rtol=1e-15)


def test_singleton_sub_conf_is_bitwise_sc_conf():
    r = random_confidences(500, 4, seed=8)
    for j in range(4):
        a = sc_conf_weights(r, j, floor=1e-2)
        b = sub_conf_weights(r, (j,), floor=1e-2)
        assert np.array_equal(a, b)


def test_norsc_weights_elementwise():
    r = random_confidences(20, 3, seed=1)
    phi = np.random.default_rng(2).uniform(0.1, 5.0, size=20)
    w = norsc_weights(r, phi)
    np.testing.assert_allclose(w, phi[:, None] * r, rtol=1e-15)


def test_norsc_rejects_negative_ratio():
    r = random_confidences(3, 3, seed=1)
    with pytest.raises(ValueError):
        norsc_weights(r, np.array([1.0, -0.5, 2.0]))


def test_weighted_baseline_is_identity_on_confidences():
    # rows with exact float sums pass through bitwise
    r = np.array([[0.25, 0.5, 0.25], [0.125, 0.375, 0.5], [1.0, 0.0, 0.0]])
    assert np.array_equal(weighted_baseline_weights(r), r)
    # arbitrary rows only change by the validation renormalization
    rd = random_confidences(10, 3, seed=3)
    np.testing.assert_allclose(weighted_baseline_weights(rd), rd, rtol=1e-15)


def test_one_hot_weights():
    w = one_hot_weights(np.array([0, 2, 1]), 3)
    np.testing.assert_array_equal(w, [[1, 0, 0], [0, 0, 1], [0, 1, 0]])
    with pytest.raises(IndexError):
        one_hot_weights(np.array([3]), 3)


def test_weights_nonnegative_everywhere():
    r = random_confidences(200, 5, seed=4)
    phi = np.random.default_rng(5).uniform(0.0, 3.0, size=200)
    assert np.all(sc_conf_weights(r, 2, floor=1e-2) >= 0)
    assert np.all(sub_conf_weights(r, (1, 3), floor=1e-2) >= 0)
    assert np.all(norsc_weights(r, phi) >= 0)
    assert np.all(weighted_baseline_weights(r) >= 0)


def test_weight_constructors_are_pure():
    r = random_confidences(50, 3, seed=6)
    assert np.array_equal(sc_conf_weights(r, 1, floor=1e-2), sc_conf_weights(r, 1, floor=1e-2))
    assert np.array_equal(sub_conf_weights(r, (0, 2)), sub_conf_weights(r, (0, 2)))


# ---------------------------------------------------------------------------
# estimator kinds
# ---------------------------------------------------------------------------


def test_kind_metadata():
    assert conditioning_labels(ScConf(2)) == (2,)
    assert conditioning_labels(SubConf((1, 3))) == (1, 3)
    assert conditioning_labels(WeightedBaseline()) == ()
    assert needs_ratio(NoRscConf(1))
    assert needs_ratio(NoRscSubConf((1, 2)))
    assert not needs_ratio(ScConf(1))
    assert not needs_ratio(Supervised())


def test_prior_multiplier():
    priors = np.array([0.3, 0.3, 0.4])
    assert prior_multiplier(ScConf(1), priors) == pytest.approx(0.3)
    assert prior_multiplier(SubConf((1, 3)), priors) == pytest.approx(0.7)
    assert prior_multiplier(NoRscConf(2), priors) == 1.0
    assert prior_multiplier(WeightedBaseline(), priors) == 1.0


# ---------------------------------------------------------------------------
# risks
# ---------------------------------------------------------------------------


def test_empirical_risk_zero_weights():
    model = init_mlp([2, 3], seed=0)
    x = np.zeros((4, 2))
    assert empirical_risk(model, x, np.zeros((4, 3))) == 0.0


def test_empirical_risk_one_hot_single_example():
    model = init_mlp([2, 4, 3], seed=1)
    x = np.array([[0.3, -0.7]])
    w = one_hot_weights(np.array([2]), 3)
    direct = softmax_cross_entropy(forward(model, x)[0], 2)
    assert empirical_risk(model, x, w) == pytest.approx(direct, rel=1e-15)


def test_empirical_risk_double_loop_oracle():
    model = init_mlp([2, 5, 3], seed=42)
    rng = np.random.default_rng(43)
    x = rng.normal(size=(3, 2))
    w = rng.uniform(0.0, 2.0, size=(3, 3))
    total = 0.0
    for i in range(3):
        logits = forward(model, x[i])
        for y in range(3):
            total += w[i, y] * softmax_cross_entropy(logits, y)
    assert empirical_risk(model, x, w) == pytest.approx(total / 3, rel=1e-12)


def test_per_example_weighted_loss_shape_and_mean():
    model = init_mlp([2, 3, 3], seed=7)
    rng = np.random.default_rng(8)
    x = rng.normal(size=(6, 2))
    w = rng.uniform(size=(6, 3))
    per = per_example_weighted_loss(model, x, w)
    assert per.shape == (6,)
    assert per.mean() == pytest.approx(empirical_risk(model, x, w), rel=1e-14)


def test_supervised_risk_uniform_logits():
    model = init_mlp([3, 2], seed=0)
    model.weights[0][:] = 0.0
    x = np.array([[1.0, 2.0, 3.0]])
    assert supervised_risk(model, x, np.array([1])) == pytest.approx(np.log(2.0), rel=1e-15)


def test_supervised_risk_duplication_invariance():
    model = init_mlp([2, 4, 3], seed=3)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(5, 2))
    y = rng.integers(0, 3, size=5)
    doubled = supervised_risk(model, np.vstack([x, x]), np.concatenate([y, y]))
    assert supervised_risk(model, x, y) == pytest.approx(doubled, rel=1e-14)


def test_supervised_risk_equals_one_hot_weighted():
    model = init_mlp([2, 4, 3], seed=5)
    rng = np.random.default_rng(6)
    x = rng.normal(size=(9, 2))
    y = rng.integers(0, 3, size=9)
    a = supervised_risk(model, x, y)
    b = empirical_risk(model, x, one_hot_weights(y, 3))
    assert a == pytest.approx(b, abs=1e-12)


def test_supervised_risk_label_out_of_range():
    model = init_mlp([2, 3], seed=0)
    with pytest.raises(IndexError):
        supervised_risk(model, np.zeros((1, 2)), np.array([3]))


# ---------------------------------------------------------------------------
# margin
# ---------------------------------------------------------------------------


def test_margin_examples():
    assert margin_delta(np.array([0.0, 1.0, 0.0])) == 1.0
    assert margin_delta(np.ones(4) / 4) == 0.0
    assert margin_delta(np.array([0.5, 0.3, 0.2])) == pytest.approx(0.2, rel=1e-15)


def test_margin_batch_and_sort_oracle():
    r = random_confidences(100, 5, seed=10)
    got = margin_delta(r)
    srt = np.sort(r, axis=1)
    np.testing.assert_allclose(got, srt[:, -1] - srt[:, -2], rtol=1e-14)


def test_margin_needs_two_classes():
    with pytest.raises(ValueError):
        margin_delta(np.array([1.0]))
