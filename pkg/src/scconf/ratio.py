"""Direct density-ratio fitting phi(x) ~ p(x) / p(x | class subset).

The model class is a Gaussian-kernel expansion with nonnegative coefficients.
Fitting minimizes an empirical Bregman matching score built from the
class-conditional sample (denominator) and an unlabeled sample (numerator);
with the squared generator eta(t) = (t-1)^2 / 2 this is least-squares
importance fitting, whose minimizer has a ridge-regularized closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls
from scipy.spatial.distance import cdist

from .validation import check_matrix

__all__ = [
    "RatioModel",
    "RatioConfig",
    "eta_squared",
    "eta_squared_grad",
    "gaussian_kernel",
    "median_pairwise_distance",
    "empirical_bregman",
    "fit_ratio",
]


def eta_squared(t):
    """Default Bregman generator eta(t) = (t - 1)^2 / 2."""
    t = np.asarray(t, dtype=np.float64)
    return 0.5 * (t - 1.0) ** 2


def eta_squared_grad(t):
    t = np.asarray(t, dtype=np.float64)
    return t - 1.0


def gaussian_kernel(x, centers, sigma: float) -> np.ndarray:
    """k(x, c) = exp(-||x - c||^2 / (2 sigma^2)), shape (n, B)."""
    x = check_matrix(x, name="x")
    centers = check_matrix(centers, name="centers", n_features=x.shape[1])
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    sq = cdist(x, centers, metric="sqeuclidean")
    return np.exp(-sq / (2.0 * sigma * sigma))


def median_pairwise_distance(points) -> float:
    """Median Euclidean distance over distinct pairs; the usual kernel
    bandwidth heuristic. Falls back to 1.0 when no positive distance exists."""
    points = check_matrix(points, name="points")
    if points.shape[0] < 2:
        return 1.0
    d = cdist(points, points)
    iu = np.triu_indices(points.shape[0], k=1)
    med = float(np.median(d[iu]))
    return med if med > 0.0 else 1.0


@dataclass
class RatioModel:
    """Fitted ratio phi(x) = sum_b alpha_b k(x, c_b), alpha >= 0."""

    centers: np.ndarray
    sigma: float
    alpha: np.ndarray

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.sigma = float(self.sigma)
        if self.centers.ndim != 2 or self.alpha.shape != (self.centers.shape[0],):
            raise ValueError("centers must be (B, d) and alpha (B,)")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")

    def __call__(self, x) -> np.ndarray:
        """Ratio values at the query points; nonnegative whenever alpha is."""
        k = gaussian_kernel(x, self.centers, self.sigma)
        return k @ self.alpha

    def to_dict(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "sigma": self.sigma,
            "alpha": self.alpha.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RatioModel":
        return cls(
            centers=np.asarray(d["centers"], dtype=np.float64),
            sigma=float(d["sigma"]),
            alpha=np.asarray(d["alpha"], dtype=np.float64),
        )


@dataclass
class RatioConfig:
    """Knobs for fit_ratio.

    ``ridge`` is used directly unless ``ridge_grid`` is given, in which case
    the ridge is chosen by k-fold cross-validation on the empirical Bregman
    score. ``bandwidth`` overrides the median heuristic when set.
    """

    n_centers: int = 100
    ridge: float = 1e-3
    ridge_grid: tuple[float, ...] | None = None
    cv_folds: int = 5
    bandwidth: float | None = None


def empirical_bregman(phi, sc_samples, u_samples, eta=None, eta_grad=None) -> float:
    """Sample-based Bregman matching score of a candidate ratio phi.

        mean_sc[eta'(phi) * phi] - mean_sc[eta(phi)] - mean_u[eta'(phi)]

    ``phi`` is any callable mapping (n, d) points to (n,) values (a fitted
    RatioModel or an analytic oracle). Up to a constant that does not depend
    on phi, this is the Bregman divergence to the true ratio, so smaller is
    better; with the squared generator the zero model scores 0.5 and the
    constant-one model scores 0.
    """
    if eta is None:
        eta = eta_squared
    if eta_grad is None:
        eta_grad = eta_squared_grad
    sc = check_matrix(sc_samples, name="sc_samples")
    u = check_matrix(u_samples, name="u_samples", n_features=sc.shape[1])
    phi_sc = np.asarray(phi(sc), dtype=np.float64)
    phi_u = np.asarray(phi(u), dtype=np.float64)
    if phi_sc.shape != (sc.shape[0],) or phi_u.shape != (u.shape[0],):
        raise ValueError("phi must map (n, d) points to (n,) values")
    return float(
        np.mean(eta_grad(phi_sc) * phi_sc)
        - np.mean(eta(phi_sc))
        - np.mean(eta_grad(phi_u))
    )


def _solve_alpha(h_mat: np.ndarray, h_vec: np.ndarray, ridge: float) -> np.ndarray:
    """Minimize alpha' H alpha / 2 - h' alpha + ridge ||alpha||^2, then project
    onto the nonnegative orthant. If the projected point is worse than both
    trivial models, fall back to the exact nonnegative solution via NNLS."""
    b = h_mat.shape[0]
    m = h_mat + 2.0 * ridge * np.eye(b)
    try:
        alpha = np.linalg.solve(m, h_vec)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"kernel system is singular ({exc}); use a positive ridge"
        ) from exc
    alpha = np.maximum(alpha, 0.0)

    def objective(a):
        return 0.5 * a @ m @ a - h_vec @ a

    ones = np.ones(b)
    if objective(alpha) > min(objective(np.zeros(b)), objective(ones)) + 1e-12:
        # Exact nonnegative minimizer: with M = C C' (Cholesky), the objective
        # is ||C' a - C^{-1} h||^2 / 2 up to a constant.
        c = np.linalg.cholesky(m)
        target = np.linalg.solve(c, h_vec)
        alpha, _ = nnls(c.T, target)
    return alpha


def fit_ratio(sc_samples, u_samples, config: RatioConfig | None = None, seed=0) -> RatioModel:
    """Fit the kernel ratio model from a class-conditional sample (denominator)
    and an unlabeled sample (numerator).

    Centers are subsampled from the unlabeled sample without replacement;
    the bandwidth defaults to the median pairwise distance among centers.
    """
    if config is None:
        config = RatioConfig()
    sc = check_matrix(sc_samples, name="sc_samples")
    u = check_matrix(u_samples, name="u_samples", n_features=sc.shape[1])
    if config.n_centers < 1:
        raise ValueError("n_centers must be >= 1")
    if config.ridge < 0:
        raise ValueError("ridge must be >= 0")

    rng = np.random.default_rng(seed)
    n_centers = min(config.n_centers, u.shape[0])
    centers = u[rng.choice(u.shape[0], size=n_centers, replace=False)]
    sigma = config.bandwidth if config.bandwidth else median_pairwise_distance(centers)

    if config.ridge_grid:
        ridge = _cv_ridge(sc, u, centers, sigma, config)
    else:
        ridge = config.ridge

    k_sc = gaussian_kernel(sc, centers, sigma)
    h_mat = k_sc.T @ k_sc / sc.shape[0]
    h_vec = gaussian_kernel(u, centers, sigma).mean(axis=0)
    alpha = _solve_alpha(h_mat, h_vec, ridge)
    return RatioModel(centers=centers, sigma=sigma, alpha=alpha)


def _cv_ridge(sc, u, centers, sigma, config: RatioConfig) -> float:
    """Pick the ridge from config.ridge_grid by k-fold CV on the empirical
    Bregman score, folds cut from both samples in parallel."""
    folds = max(2, int(config.cv_folds))
    sc_parts = np.array_split(np.arange(sc.shape[0]), folds)
    u_parts = np.array_split(np.arange(u.shape[0]), folds)
    best_ridge, best_score = None, np.inf
    for ridge in config.ridge_grid:
        scores = []
        for f in range(folds):
            sc_hold = np.isin(np.arange(sc.shape[0]), sc_parts[f])
            u_hold = np.isin(np.arange(u.shape[0]), u_parts[f])
            if sc_hold.all() or u_hold.all() or not sc_hold.any() or not u_hold.any():
                continue
            k_sc = gaussian_kernel(sc[~sc_hold], centers, sigma)
            h_mat = k_sc.T @ k_sc / k_sc.shape[0]
            h_vec = gaussian_kernel(u[~u_hold], centers, sigma).mean(axis=0)
            model = RatioModel(centers, sigma, _solve_alpha(h_mat, h_vec, ridge))
            scores.append(empirical_bregman(model, sc[sc_hold], u[u_hold]))
        score = float(np.mean(scores)) if scores else np.inf
        if score < best_score:
            best_ridge, best_score = ridge, score
    return best_ridge if best_ridge is not None else config.ridge
