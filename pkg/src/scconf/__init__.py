"""Multi-class classification from single-class data with confidence annotations.

The training data consists of instances drawn from a single class (or class
subset) together with a confidence vector over all classes per instance. The
package provides:

* unbiased weighted-risk estimators built from those confidences, plus a
  density-ratio-reweighted variant that tolerates confidence noise which
  preserves the top class, and the naive confidence-weighted baseline;
* a small from-scratch MLP/Adam engine with bitwise-reproducible training;
* least-squares density-ratio fitting between an unlabeled sample and the
  class-conditional sample;
* a Gaussian-mixture synthetic world with exact posteriors and Bayes accuracy;
* scikit-learn style wrappers and a CLI for dataset generation, training,
  evaluation, and experiment grids.
"""

from .estimators import ConfidenceClassifier, DensityRatioEstimator, build_kind, ESTIMATOR_NAMES
from .net import (
    AdamState,
    DivergenceError,
    MlpModel,
    adam_step,
    forward,
    init_mlp,
    predict_class,
    softmax,
    softmax_cross_entropy,
    weighted_batch_grad,
)
from .ratio import RatioConfig, RatioModel, empirical_bregman, fit_ratio
from .synthetic import (
    ConfidenceDataset,
    GaussianMixtureSpec,
    bayes_accuracy,
    bayes_predict,
    build_confidence_dataset,
    default_benchmark_spec,
    one_hot_corrupt,
    sample_class_conditional,
    sample_joint,
    true_density_ratio,
    true_posterior,
)
from .training import TrainConfig, TrainReport, evaluate_accuracy, precompute_weights, train, train_weighted
from .weights import (
    EstimatorKind,
    NoRscConf,
    NoRscSubConf,
    ScConf,
    SubConf,
    Supervised,
    WeightedBaseline,
    empirical_risk,
    margin_delta,
    norsc_weights,
    one_hot_weights,
    per_example_weighted_loss,
    prior_multiplier,
    sc_conf_weights,
    sub_conf_weights,
    supervised_risk,
    weighted_baseline_weights,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "ConfidenceClassifier",
    "ConfidenceDataset",
    "DensityRatioEstimator",
    "DivergenceError",
    "ESTIMATOR_NAMES",
    "EstimatorKind",
    "GaussianMixtureSpec",
    "MlpModel",
    "NoRscConf",
    "NoRscSubConf",
    "RatioConfig",
    "RatioModel",
    "ScConf",
    "SubConf",
    "Supervised",
    "TrainConfig",
    "TrainReport",
    "WeightedBaseline",
    "adam_step",
    "bayes_accuracy",
    "bayes_predict",
    "build_confidence_dataset",
    "build_kind",
    "default_benchmark_spec",
    "empirical_bregman",
    "empirical_risk",
    "evaluate_accuracy",
    "fit_ratio",
    "forward",
    "init_mlp",
    "margin_delta",
    "norsc_weights",
    "one_hot_corrupt",
    "one_hot_weights",
    "per_example_weighted_loss",
    "precompute_weights",
    "predict_class",
    "prior_multiplier",
    "sample_class_conditional",
    "sample_joint",
    "sc_conf_weights",
    "softmax",
    "softmax_cross_entropy",
    "sub_conf_weights",
    "supervised_risk",
    "train",
    "train_weighted",
    "true_density_ratio",
    "true_posterior",
    "weighted_baseline_weights",
    "weighted_batch_grad",
]
