"""Gaussian-mixture ground truth: exact posteriors, densities, and samplers.

This is the controlled world used by the experiments: every quantity the
estimators only approximate on real data (class-posterior confidences, the
marginal-over-conditional density ratio, the Bayes accuracy) is available in
closed form here.

Seeding: samplers split the given seed into a label stream and a noise stream
(SeedSequence spawn keys 0 and 1). Joint and class-conditional draws with the
same seed therefore share their standard-normal draws, which pairs the two
samples for low-variance bias comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from .validation import as_label_tuple

__all__ = [
    "GaussianMixtureSpec",
    "ConfidenceDataset",
    "MonteCarloEstimate",
    "default_benchmark_spec",
    "sample_joint",
    "sample_class_conditional",
    "class_log_densities",
    "log_marginal_density",
    "true_posterior",
    "true_density_ratio",
    "one_hot_corrupt",
    "bayes_predict",
    "bayes_accuracy",
    "build_confidence_dataset",
]

NOISE_MODES = ("clean", "onehot")

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(eq=False)
class GaussianMixtureSpec:
    """A K-component Gaussian mixture with one component per class.

    ``priors`` is (K,) and must sum to 1 within 1e-12; ``means`` is (K, d);
    ``covariances`` is (K, d, d) SPD, or (K, d) for diagonal covariances.
    Class k (0-based component index) carries the 1-based label k+1.
    """

    priors: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    _chols: np.ndarray = field(init=False, repr=False)
    _log_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        cov = np.asarray(self.covariances, dtype=np.float64)
        if self.priors.ndim != 1 or self.priors.shape[0] < 2:
            raise ValueError("priors must be a 1-D array with K >= 2 entries")
        k = self.priors.shape[0]
        if np.any(self.priors <= 0):
            raise ValueError("priors must be strictly positive")
        if abs(self.priors.sum() - 1.0) > 1e-12:
            raise ValueError(f"priors sum to {self.priors.sum()!r}, expected 1")
        self.priors = self.priors / self.priors.sum()
        if self.means.ndim != 2 or self.means.shape[0] != k:
            raise ValueError("means must have shape (K, d)")
        d = self.means.shape[1]
        if cov.shape == (k, d):
            if np.any(cov <= 0):
                raise ValueError("diagonal covariances must be positive")
            full = np.zeros((k, d, d))
            for i in range(k):
                np.fill_diagonal(full[i], cov[i])
            cov = full
        if cov.shape != (k, d, d):
            raise ValueError(f"covariances must be (K, d, d) or (K, d), got {cov.shape}")
        self.covariances = cov
        chols = np.empty_like(cov)
        for i in range(k):
            try:
                chols[i] = np.linalg.cholesky(cov[i])
            except np.linalg.LinAlgError as exc:
                raise ValueError(f"covariance of class {i + 1} is not positive definite") from exc
        self._chols = chols
        # log of the Gaussian normalizing constant per class
        self._log_norms = -(
            0.5 * d * _LOG_2PI
            + np.array([np.log(np.diag(c)).sum() for c in chols])
        )

    @property
    def n_classes(self) -> int:
        return self.priors.shape[0]

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def to_dict(self) -> dict:
        return {
            "priors": self.priors.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixtureSpec":
        return cls(
            priors=np.asarray(d["priors"], dtype=np.float64),
            means=np.asarray(d["means"], dtype=np.float64),
            covariances=np.asarray(d["covariances"], dtype=np.float64),
        )


@dataclass
class ConfidenceDataset:
    """Instances drawn from a class-conditional with their confidence rows."""

    instances: np.ndarray
    confidences: np.ndarray
    conditioning: tuple[int, ...]
    noise: str = "clean"


class MonteCarloEstimate(NamedTuple):
    value: float
    stderr: float


def default_benchmark_spec() -> GaussianMixtureSpec:
    """Three classes in the plane: means on an equilateral triangle of side 3,
    identity covariances, priors (0.3, 0.3, 0.4)."""
    side = 3.0
    means = np.array(
        [
            [0.0, 0.0],
            [side, 0.0],
            [side / 2.0, side * np.sqrt(3.0) / 2.0],
        ]
    )
    return GaussianMixtureSpec(
        priors=np.array([0.3, 0.3, 0.4]),
        means=means,
        covariances=np.stack([np.eye(2)] * 3),
    )


def _split_streams(seed):
    """Label stream and noise stream derived from one seed without mutating
    a caller-owned SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        base = seed
    else:
        base = np.random.SeedSequence(seed)
    children = [
        np.random.SeedSequence(entropy=base.entropy, spawn_key=base.spawn_key + (i,))
        for i in range(2)
    ]
    return tuple(np.random.default_rng(c) for c in children)


def _mix_sample(spec: GaussianMixtureSpec, cols: np.ndarray, noise_rng) -> np.ndarray:
    z = noise_rng.standard_normal((cols.shape[0], spec.n_features))
    return spec.means[cols] + np.einsum("nij,nj->ni", spec._chols[cols], z)


def sample_joint(spec: GaussianMixtureSpec, n: int, seed=0):
    """Draw (x, y) from the mixture. Returns (X, y) with 1-based labels."""
    if n < 1:
        raise ValueError("n must be >= 1")
    label_rng, noise_rng = _split_streams(seed)
    cols = label_rng.choice(spec.n_classes, size=n, p=spec.priors)
    return _mix_sample(spec, cols, noise_rng), cols + 1


def sample_class_conditional(spec: GaussianMixtureSpec, class_labels, n: int, seed=0) -> np.ndarray:
    """Draw x from p(x | y in class_labels) (1-based labels).

    For a multi-class conditioning the latent label follows the prior
    restricted to the subset.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    labels = as_label_tuple(class_labels, spec.n_classes)
    label_rng, noise_rng = _split_streams(seed)
    idx = np.asarray(labels, dtype=np.int64) - 1
    if len(labels) == 1:
        cols = np.full(n, idx[0], dtype=np.int64)
    else:
        p = spec.priors[idx] / spec.priors[idx].sum()
        cols = idx[label_rng.choice(idx.shape[0], size=n, p=p)]
    return _mix_sample(spec, cols, noise_rng)


def class_log_densities(spec: GaussianMixtureSpec, x) -> np.ndarray:
    """log p(x | y) for every class, shape (n, K)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != spec.n_features:
        raise ValueError(f"x has {x.shape[1]} features, spec has {spec.n_features}")
    out = np.empty((x.shape[0], spec.n_classes))
    for k in range(spec.n_classes):
        v = solve_triangular(spec._chols[k], (x - spec.means[k]).T, lower=True)
        out[:, k] = spec._log_norms[k] - 0.5 * np.sum(v * v, axis=0)
    return out


def _log_joint(spec, x):
    return class_log_densities(spec, x) + np.log(spec.priors)


def log_marginal_density(spec: GaussianMixtureSpec, x) -> np.ndarray:
    """log p(x) = logsumexp_y [log prior_y + log p(x | y)], shape (n,)."""
    lj = _log_joint(spec, x)
    m = lj.max(axis=1)
    return m + np.log(np.exp(lj - m[:, None]).sum(axis=1))


def true_posterior(spec: GaussianMixtureSpec, x) -> np.ndarray:
    """Exact class posteriors p(y | x), shape (n, K); rows sum to 1 and are
    strictly positive up to floating-point underflow."""
    lj = _log_joint(spec, x)
    lj -= lj.max(axis=1, keepdims=True)
    e = np.exp(lj)
    return e / e.sum(axis=1, keepdims=True)


def true_density_ratio(spec: GaussianMixtureSpec, x, class_labels) -> np.ndarray:
    """phi(x) = p(x) / p(x | y in class_labels), computed in log space.

    Via Bayes' rule this equals prior(class_labels) / P(y in class_labels | x).
    """
    labels = as_label_tuple(class_labels, spec.n_classes)
    idx = np.asarray(labels, dtype=np.int64) - 1
    lj = _log_joint(spec, x)
    m = lj.max(axis=1)
    log_marg = m + np.log(np.exp(lj - m[:, None]).sum(axis=1))
    sub = lj[:, idx]
    ms = sub.max(axis=1)
    log_sub = ms + np.log(np.exp(sub - ms[:, None]).sum(axis=1))
    prior_mass = spec.priors[idx].sum()
    return prior_mass * np.exp(log_marg - log_sub)


def one_hot_corrupt(r) -> np.ndarray:
    """Collapse each confidence row onto its argmax (ties: lowest index)."""
    rows = np.atleast_2d(np.asarray(r, dtype=np.float64))
    out = np.zeros_like(rows)
    out[np.arange(rows.shape[0]), np.argmax(rows, axis=1)] = 1.0
    return out[0] if np.asarray(r).ndim == 1 else out


def bayes_predict(spec: GaussianMixtureSpec, x) -> np.ndarray:
    """Labels (1-based) of the maximum-posterior class."""
    return np.argmax(_log_joint(spec, x), axis=1) + 1


def bayes_accuracy(spec: GaussianMixtureSpec, n_mc: int = 200_000, seed=0) -> MonteCarloEstimate:
    """Monte-Carlo estimate of the Bayes classifier's accuracy, with the
    binomial standard error."""
    x, y = sample_joint(spec, n_mc, seed)
    p = float(np.mean(bayes_predict(spec, x) == y))
    return MonteCarloEstimate(p, float(np.sqrt(p * (1.0 - p) / n_mc)))


def build_confidence_dataset(
    spec: GaussianMixtureSpec, class_labels, n: int, noise: str = "clean", seed=0
) -> ConfidenceDataset:
    """Class-conditional sample with exact posterior confidences, optionally
    collapsed to one-hot rows (noise="onehot")."""
    if noise not in NOISE_MODES:
        raise ValueError(f"noise must be one of {NOISE_MODES}, got {noise!r}")
    labels = as_label_tuple(class_labels, spec.n_classes)
    x = sample_class_conditional(spec, labels, n, seed)
    r = true_posterior(spec, x)
    if noise == "onehot":
        r = one_hot_corrupt(r)
    return ConfidenceDataset(instances=x, confidences=r, conditioning=labels, noise=noise)
