#!/usr/bin/env python3
"""
Gaussian mixture densities over RGB vectors, fitted by EM.

The EM loop follows the textbook E-step / M-step with a trace-scaled ridge
added to every covariance after each M-step. Means are seeded by k-means++
followed by a few Lloyd iterations.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy import linalg
from scipy.special import logsumexp
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from .errors import DataError, NumericalError

logger = logging.getLogger(__name__)

DIM = 3
LOG_2PI = np.log(2.0 * np.pi)
LLOYD_ITERS = 10
_MIN_RIDGE = 1e-10


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    """One weighted Gaussian of a mixture"""
    weight: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(DIM)
        cov = np.array(self.covariance, dtype=np.float64).reshape(DIM, DIM)
        if not self.weight > 0:
            raise DataError(f"component weight must be > 0, got {self.weight}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise DataError("component covariance must be symmetric")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor; non-SPD covariances are degenerate"""
        try:
            return linalg.cholesky(self.covariance, lower=True)
        except linalg.LinAlgError:
            raise NumericalError("degenerate component")

    def log_density(self, X: np.ndarray) -> np.ndarray:
        """log N(x; mean, covariance) for each row of X"""
        chol = self.cholesky()
        z = linalg.solve_triangular(chol, (X - self.mean).T, lower=True)
        log_det = 2.0 * np.sum(np.log(np.diag(chol)))
        return -0.5 * (DIM * LOG_2PI + log_det + np.sum(z * z, axis=0))

    def to_dict(self) -> Dict:
        return {
            "weight": self.weight,
            "mean": self.mean.tolist(),
            "covariance": self.covariance.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'GaussianComponent':
        return cls(weight=data["weight"], mean=data["mean"], covariance=data["covariance"])


@dataclass(frozen=True, eq=False)
class Gmm:
    """Gaussian mixture model over 3-D vectors"""
    components: Tuple[GaussianComponent, ...]

    def __post_init__(self):
        components = tuple(self.components)
        if not components:
            raise DataError("a mixture needs at least one component")
        total = sum(c.weight for c in components)
        if abs(total - 1.0) > 1e-9:
            raise DataError(f"component weights must sum to 1, got {total!r}")
        object.__setattr__(self, "components", components)

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def component_log_densities(self, X: np.ndarray) -> np.ndarray:
        """(n, K) matrix of log(weight_k) + log N_k(x)"""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != DIM or not np.all(np.isfinite(X)):
            raise DataError("GMM inputs must be finite 3-vectors")
        return np.column_stack([np.log(c.weight) + c.log_density(X) for c in self.components])

    def to_dict(self) -> Dict:
        return {"components": [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, data: Dict) -> 'Gmm':
        return cls(tuple(GaussianComponent.from_dict(c) for c in data["components"]))


@dataclass(frozen=True)
class EmConfig:
    """EM hyperparameters"""
    n_components: int = 5
    max_iters: int = 200
    rel_tol: float = 1e-6
    cov_regularizer: float = 1e-6
    seed: int = 42

    def __post_init__(self):
        if self.n_components < 1:
            raise DataError("n_components must be >= 1")
        if self.rel_tol <= 0:
            raise DataError("rel_tol must be > 0")
        if self.cov_regularizer < 0:
            raise DataError("cov_regularizer must be >= 0")


def log_pdf(model: Gmm, x) -> float:
    """log Σ_k weight_k · N(x; mean_k, cov_k) at a single point"""
    return float(log_pdf_batch(model, np.asarray(x, dtype=np.float64).reshape(1, DIM))[0])


def log_pdf_batch(model: Gmm, X: np.ndarray) -> np.ndarray:
    """Mixture log-density for every row of X"""
    return logsumexp(model.component_log_densities(X), axis=1)


def responsibilities(model: Gmm, x) -> np.ndarray:
    """Posterior component memberships of a single point"""
    weighted = model.component_log_densities(np.asarray(x, dtype=np.float64).reshape(1, DIM))[0]
    return np.exp(weighted - logsumexp(weighted))


def _regularize(cov: np.ndarray, cov_regularizer: float) -> np.ndarray:
    """Add the trace-scaled ridge, then lift a near-singular result to eigenvalue _MIN_RIDGE"""
    cov = 0.5 * (cov + cov.T)
    cov = cov + cov_regularizer * np.trace(cov) / DIM * np.eye(DIM)
    smallest = float(linalg.eigvalsh(cov)[0])
    if smallest < _MIN_RIDGE:
        cov = cov + (_MIN_RIDGE - smallest) * np.eye(DIM)
    return cov


def _initial_means(data: np.ndarray, cfg: EmConfig) -> np.ndarray:
    if cfg.n_components == 1:
        return data.mean(axis=0, keepdims=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        kmeans = KMeans(n_clusters=cfg.n_components, init="k-means++", n_init=1,
                        max_iter=LLOYD_ITERS, random_state=cfg.seed)
        kmeans.fit(data)
    return kmeans.cluster_centers_


def fit_em_with_history(data, cfg: EmConfig) -> Tuple[Gmm, List[float]]:
    """
    Fit a full-covariance GMM by EM.

    Args:
        data: (n, 3) array of finite vectors
        cfg: EM hyperparameters

    Returns:
        (fitted model, mean log-likelihood after each E-step)
    """
    data = np.asarray(data, dtype=np.float64).reshape(-1, DIM)
    n = data.shape[0]
    K = cfg.n_components
    if not np.all(np.isfinite(data)):
        raise DataError("EM data must be finite")
    if n < K or np.unique(data, axis=0).shape[0] < K:
        raise DataError("insufficient data")

    means = _initial_means(data, cfg)
    base_cov = _regularize(np.cov(data, rowvar=False, bias=True), cfg.cov_regularizer)
    covs = np.repeat(base_cov[None, :, :], K, axis=0)
    weights = np.full(K, 1.0 / K)

    history: List[float] = []
    for _ in range(cfg.max_iters):
        model = _assemble(weights, means, covs)
        # E-step
        weighted = model.component_log_densities(data)
        log_norm = logsumexp(weighted, axis=1)
        mean_ll = float(np.mean(log_norm))
        if not np.isfinite(mean_ll):
            raise NumericalError("numerical failure")
        history.append(mean_ll)
        if len(history) > 1:
            gain = (history[-1] - history[-2]) / max(abs(history[-2]), np.finfo(np.float64).tiny)
            if gain < cfg.rel_tol:
                break
        resp = np.exp(weighted - log_norm[:, None])

        # M-step
        nk = resp.sum(axis=0) + 10 * np.finfo(np.float64).eps
        weights = nk / nk.sum()
        means = (resp.T @ data) / nk[:, None]
        for k in range(K):
            diff = data - means[k]
            cov = (resp[:, k, None] * diff).T @ diff / nk[k]
            covs[k] = _regularize(cov, cfg.cov_regularizer)
    else:
        # the loop ended on max_iters; score the final M-step too
        model = _assemble(weights, means, covs)
        history.append(float(np.mean(log_pdf_batch(model, data))))

    logger.debug("EM finished: K=%d, n=%d, %d likelihood evaluations, mean ll %.6f",
                 K, n, len(history), history[-1])
    return model, history


def fit_em(data, cfg: EmConfig) -> Gmm:
    """Fit a GMM by EM (see fit_em_with_history)"""
    model, _ = fit_em_with_history(data, cfg)
    return model


def _assemble(weights: np.ndarray, means: np.ndarray, covs: np.ndarray) -> Gmm:
    weights = weights / weights.sum()
    return Gmm(tuple(GaussianComponent(w, m, c) for w, m, c in zip(weights, means, covs)))
