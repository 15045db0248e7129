"""Tests for the scikit-learn facing estimator classes."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from scconf.estimators import (
    ConfidenceClassifier,
    DensityRatioEstimator,
    ESTIMATOR_NAMES,
    build_kind,
)
from scconf.ratio import RatioModel
from scconf.synthetic import (
    build_confidence_dataset,
    default_benchmark_spec,
    sample_class_conditional,
    sample_joint,
    true_density_ratio,
)
from scconf.weights import NoRscConf, NoRscSubConf, ScConf, SubConf, Supervised, WeightedBaseline


def training_data(n=120, cond=(1,), seed=0):
    spec = default_benchmark_spec()
    ds = build_confidence_dataset(spec, cond, n, noise="clean", seed=seed)
    return ds.instances, ds.confidences, spec


def fast_clf(**kw):
    kw.setdefault("epochs", 5)
    kw.setdefault("batch_size", 20)
    kw.setdefault("hidden_dims", (8,))
    return ConfidenceClassifier(**kw)


# ---------------------------------------------------------------------------
# build_kind
# ---------------------------------------------------------------------------


def test_build_kind_maps_names():
    assert build_kind("sc-conf", 2) == ScConf(2)
    assert build_kind("sub-conf", (1, 3)) == SubConf((1, 3))
    assert build_kind("norsc-conf", 1) == NoRscConf(1)
    assert build_kind("norsc-sub-conf", (2, 3)) == NoRscSubConf((2, 3))
    assert build_kind("weighted") == WeightedBaseline()
    assert build_kind("supervised") == Supervised()


def test_build_kind_rejects_bad_input():
    with pytest.raises(ValueError):
        build_kind("conf")  # unknown name
    with pytest.raises(ValueError):
        build_kind("sc-conf")  # conditioning required
    with pytest.raises(ValueError):
        build_kind("sc-conf", (1, 2))  # singleton estimators reject subsets
    with pytest.raises(ValueError):
        build_kind("norsc-conf", (1, 2))
    assert "sc-conf" in ESTIMATOR_NAMES and "supervised" in ESTIMATOR_NAMES


# ---------------------------------------------------------------------------
# ConfidenceClassifier
# ---------------------------------------------------------------------------


def test_get_params_set_params_clone():
    clf = fast_clf(estimator="sub-conf", conditioning=(1, 2), random_state=3)
    params = clf.get_params()
    assert params["estimator"] == "sub-conf"
    assert params["conditioning"] == (1, 2)
    assert params["random_state"] == 3
    twin = clone(clf)
    assert twin.get_params() == params
    clf.set_params(epochs=9, floor=0.5)
    assert clf.epochs == 9 and clf.floor == 0.5


def test_fit_returns_self_and_sets_attributes():
    x, r, _ = training_data()
    clf = fast_clf()
    assert clf.fit(x, r) is clf
    np.testing.assert_array_equal(clf.classes_, [1, 2, 3])
    assert clf.n_features_in_ == 2
    assert clf.report_.selected_epoch >= 0


def test_predict_surface():
    x, r, _ = training_data()
    clf = fast_clf(random_state=1).fit(x, r)
    xq = np.random.default_rng(5).normal(size=(40, 2)) * 2.0
    labels = clf.predict(xq)
    assert labels.shape == (40,)
    assert set(labels) <= {1, 2, 3}
    logits = clf.decision_function(xq)
    proba = clf.predict_proba(xq)
    assert logits.shape == (40, 3)
    assert proba.shape == (40, 3)
    assert np.all(proba >= 0.0)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    # the three views agree
    np.testing.assert_array_equal(np.argmax(logits, axis=1) + 1, labels)
    np.testing.assert_array_equal(np.argmax(proba, axis=1) + 1, labels)


def test_fit_is_deterministic_in_random_state():
    x, r, _ = training_data()
    a = fast_clf(random_state=7).fit(x, r)
    b = fast_clf(random_state=7).fit(x, r)
    xq = np.random.default_rng(0).normal(size=(25, 2))
    np.testing.assert_array_equal(a.predict(xq), b.predict(xq))
    for wa, wb in zip(a.model_.weights, b.model_.weights):
        np.testing.assert_array_equal(wa, wb)


def test_unfitted_estimator_raises():
    clf = fast_clf()
    with pytest.raises(NotFittedError):
        clf.predict(np.zeros((2, 2)))
    with pytest.raises(NotFittedError):
        clf.decision_function(np.zeros((2, 2)))


def test_fit_rejects_supervised_name():
    x, r, _ = training_data()
    with pytest.raises(ValueError):
        fast_clf(estimator="supervised").fit(x, r)


def test_fit_input_validation():
    x, r, _ = training_data()
    with pytest.raises(ValueError):
        fast_clf().fit(x[:-1], r)
    with pytest.raises(ValueError):
        fast_clf(validation_fraction=0.0).fit(x, r)
    with pytest.raises(ValueError):
        fast_clf(validation_fraction=1.0).fit(x, r)
    bad_r = r.copy()
    bad_r[0] = [0.5, 0.2, 0.1]  # row sums to 0.8
    with pytest.raises(ValueError):
        fast_clf().fit(x, bad_r)


def test_norsc_requires_ratio():
    x, r, spec = training_data()
    with pytest.raises(ValueError):
        fast_clf(estimator="norsc-conf", conditioning=1).fit(x, r)
    ratio = lambda q: true_density_ratio(spec, q, (1,))
    clf = fast_clf(estimator="norsc-conf", conditioning=1, ratio=ratio).fit(x, r)
    assert clf.predict(x[:5]).shape == (5,)


def test_sub_conf_accepts_subsets():
    x, r, _ = training_data(cond=(1, 2))
    clf = fast_clf(estimator="sub-conf", conditioning=(1, 2)).fit(x, r)
    assert set(clf.predict(x[:10])) <= {1, 2, 3}


def test_predict_rejects_wrong_feature_count():
    x, r, _ = training_data()
    clf = fast_clf().fit(x, r)
    with pytest.raises(ValueError):
        clf.predict(np.zeros((3, 5)))


# ---------------------------------------------------------------------------
# DensityRatioEstimator
# ---------------------------------------------------------------------------


def ratio_samples(n=200):
    spec = default_benchmark_spec()
    xc = sample_class_conditional(spec, (1,), n, seed=1)
    xu, _ = sample_joint(spec, n, seed=2)
    return xc, xu


def test_density_ratio_estimator_fit_predict():
    xc, xu = ratio_samples()
    est = DensityRatioEstimator(n_centers=50, random_state=0)
    assert est.fit(xc, xu) is est
    assert isinstance(est.ratio_, RatioModel)
    assert isinstance(est.objective_, float)
    # nonnegative on and off the training points
    assert np.all(est.predict(xu) >= 0.0)
    grid = np.random.default_rng(3).normal(size=(50, 2)) * 3.0
    assert np.all(est.predict(grid) >= 0.0)
    # fitted score cannot lose to the all-zero model
    assert est.objective_ <= 0.5 + 1e-10


def test_density_ratio_estimator_params_and_clone():
    est = DensityRatioEstimator(n_centers=20, ridge=0.1, bandwidth=0.7)
    p = est.get_params()
    assert p["n_centers"] == 20 and p["ridge"] == 0.1 and p["bandwidth"] == 0.7
    assert clone(est).get_params() == p


def test_density_ratio_estimator_unfitted_and_bad_query():
    est = DensityRatioEstimator()
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((2, 2)))
    xc, xu = ratio_samples(100)
    est.fit(xc, xu)
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 7)))
    with pytest.raises(ValueError):
        est.fit(xc, xu[:, :1])  # feature mismatch between the two samples
