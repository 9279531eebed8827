"""Gaussian mixture color models in CIELAB and the confidence maps derived from them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..scene import Frame

COV_FLOOR = 1e-4
CONF_FLOOR = 1e-6


@dataclass
class Gmm:
    weights: np.ndarray       # (K,)
    means: np.ndarray         # (K, 3)
    covs: np.ndarray          # (K, 3, 3)
    loglik_history: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.weights)

    def component_log_density(self, X: np.ndarray) -> np.ndarray:
        """log(weight_k * N(x | mean_k, cov_k)) for every row of X, shape (n, K)."""
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.means.shape[1])
        d = X.shape[1]
        out = np.full((len(X), self.K), -np.inf)
        for k in range(self.K):
            if self.weights[k] <= 0:
                continue
            chol = np.linalg.cholesky(self.covs[k])
            diff = (X - self.means[k]) @ np.linalg.inv(chol).T
            maha = np.einsum("ij,ij->i", diff, diff)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            out[:, k] = np.log(self.weights[k]) - 0.5 * (d * np.log(2 * np.pi) + logdet + maha)
        return out

    def log_density(self, X: np.ndarray) -> np.ndarray:
        comp = self.component_log_density(X)
        top = comp.max(axis=1, keepdims=True)
        return (top + np.log(np.exp(comp - top).sum(axis=1, keepdims=True)))[:, 0]


def _floor_cov(cov: np.ndarray, floor: float) -> np.ndarray:
    # eigenvalue clipping is the constrained ML covariance, so EM stays monotone
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
    if vals.min() >= floor:
        return cov
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def _kmeanspp(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    centers = [X[rng.integers(len(X))]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total <= 0:
            break
        idx = rng.choice(len(X), p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _m_step(X, resp, prev: Gmm | None, floor):
    nk = resp.sum(axis=0)
    K, dim = resp.shape[1], X.shape[1]
    weights = nk / nk.sum()
    means = np.zeros((K, dim))
    covs = np.zeros((K, dim, dim))
    for k in range(K):
        if nk[k] <= 1e-12:
            means[k] = prev.means[k] if prev is not None else X.mean(axis=0)
            covs[k] = prev.covs[k] if prev is not None else np.eye(dim) * floor
            weights[k] = 0.0
            continue
        means[k] = resp[:, k] @ X / nk[k]
        diff = X - means[k]
        covs[k] = _floor_cov((resp[:, k, None] * diff).T @ diff / nk[k], floor)
    weights = weights / weights.sum()
    return Gmm(weights, means, covs)


def fit_gmm(pixels, K: int, iters: int = 30, tol: float = 1e-5, seed: int = 0,
            floor: float = COV_FLOOR) -> Gmm:
    """k-means++ seeding, then EM until the mean log-likelihood gain drops below ``tol``.

    K is reduced to the number of distinct colors when there are fewer.
    ``loglik_history`` holds the mean per-sample log-likelihood after each EM step.
    """
    X = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    if len(X) == 0:
        raise ValueError("cannot fit a GMM to zero pixels")
    K = int(min(K, len(np.unique(X, axis=0))))
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(X, K, rng)
    K = len(centers)
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    resp = np.zeros((len(X), K))
    resp[np.arange(len(X)), np.argmin(d2, axis=1)] = 1.0
    gmm = _m_step(X, resp, None, floor)

    history = []
    for _ in range(iters):
        comp = gmm.component_log_density(X)
        top = comp.max(axis=1, keepdims=True)
        ll_point = top[:, 0] + np.log(np.exp(comp - top).sum(axis=1))
        history.append(float(ll_point.mean()))
        if len(history) > 1 and history[-1] - history[-2] < tol:
            break
        resp = np.exp(comp - ll_point[:, None])
        gmm = _m_step(X, resp, gmm, floor)
    else:
        history.append(float(gmm.log_density(X).mean()))
    gmm.loglik_history = history
    return gmm


def confidence_map(gmm: Gmm, frame: Frame) -> np.ndarray:
    """Per-pixel mixture density divided by its frame maximum, floored at 1e-6."""
    logp = gmm.log_density(frame.lab.reshape(-1, 3)).reshape(frame.height, frame.width)
    return np.maximum(np.exp(logp - logp.max()), CONF_FLOOR)
