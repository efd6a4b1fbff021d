"""Flow-statistics baseline: per-class diagonal Gaussian mixtures.

The feature vector of a flow is 8-dimensional: the payload sizes and
inter-arrival times of its first four non-zero-payload packets (the first
inter-arrival is measured from the flow's opening packet). Flows with
fewer than four such packets get a NaN row and are classified by the
training class prior.

Mixtures are fit per class with plain EM on diagonal covariances; a
variance floor keeps degenerate dimensions from collapsing.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

__all__ = ["extract_flow_stats", "FlowStatsClassifier", "VARIANCE_FLOOR"]

VARIANCE_FLOOR = 1e-6
N_PACKETS = 4
N_FEATURES = 2 * N_PACKETS


def extract_flow_stats(flows) -> np.ndarray:
    """(n, 8) matrix of sizes and inter-arrival times; NaN rows for short flows."""
    X = np.full((len(flows), N_FEATURES), np.nan)
    for i, flow in enumerate(flows):
        nz = [p for p in flow.packets if p.payload_len > 0][:N_PACKETS]
        if len(nz) < N_PACKETS:
            continue
        sizes = [p.payload_len for p in nz]
        prev = flow.packets[0].timestamp
        iats = []
        for p in nz:
            iats.append(p.timestamp - prev)
            prev = p.timestamp
        X[i, :N_PACKETS] = sizes
        X[i, N_PACKETS:] = iats
    return X


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


class _DiagonalMixture:
    """One class's mixture: weights, means, and per-dimension variances."""

    def __init__(self, weights, means, variances):
        self.weights = weights
        self.means = means
        self.variances = variances

    def log_pdf(self, X: np.ndarray) -> np.ndarray:
        """Component-wise log density, shape (n, k)."""
        diff = X[:, None, :] - self.means[None, :, :]
        var = self.variances[None, :, :]
        quad = np.sum(diff * diff / var + np.log(2.0 * np.pi * var), axis=2)
        return -0.5 * quad + np.log(self.weights)[None, :]

    def log_likelihood(self, X: np.ndarray) -> np.ndarray:
        return _logsumexp(self.log_pdf(X), axis=1)


def _fit_mixture(X, n_components, rng, tol, max_iter):
    n, d = X.shape
    k = min(n_components, n)
    pick = rng.choice(n, size=k, replace=False)
    means = X[pick].astype(np.float64).copy()
    variances = np.tile(np.maximum(X.var(axis=0), VARIANCE_FLOOR), (k, 1))
    weights = np.full(k, 1.0 / k)
    mix = _DiagonalMixture(weights, means, variances)

    history = []
    prev = -np.inf
    for _ in range(max_iter):
        log_resp = mix.log_pdf(X)
        ll = float(_logsumexp(log_resp, axis=1).sum())
        history.append(ll)
        if abs(ll - prev) < tol:
            break
        prev = ll
        resp = np.exp(log_resp - _logsumexp(log_resp, axis=1)[:, None])
        nk = resp.sum(axis=0) + 1e-12
        mix.weights = nk / n
        mix.means = (resp.T @ X) / nk[:, None]
        diff = X[:, None, :] - mix.means[None, :, :]
        mix.variances = np.maximum(
            np.einsum("nk,nkd->kd", resp, diff * diff) / nk[:, None], VARIANCE_FLOOR
        )
    return mix, history


class FlowStatsClassifier(BaseEstimator, ClassifierMixin):
    """Per-class diagonal GMM classifier over flow-statistics vectors.

    ``predict`` returns, per row, the class maximizing mixture likelihood
    times the training prior; NaN rows fall back to the prior argmax.
    """

    def __init__(
        self,
        components_per_class: int = 2,
        tol: float = 1e-6,
        max_iter: int = 200,
        random_state: int = 0,
    ):
        self.components_per_class = components_per_class
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"bad shapes: X {X.shape}, y {y.shape}")
        if self.components_per_class < 1:
            raise ValueError("components_per_class must be >= 1")
        classes = np.unique(y)
        rng = np.random.default_rng(self.random_state)

        self.classes_ = classes
        self.log_priors_ = np.log(
            np.array([(y == c).sum() for c in classes], dtype=np.float64) / y.size
        )
        self.mixtures_ = {}
        self.ll_history_ = {}
        for c in classes:
            rows = X[(y == c) & ~np.isnan(X).any(axis=1)]
            if rows.shape[0] == 0:
                self.mixtures_[int(c)] = None
                self.ll_history_[int(c)] = []
                continue
            mix, history = _fit_mixture(
                rows, self.components_per_class, rng, self.tol, self.max_iter
            )
            self.mixtures_[int(c)] = mix
            self.ll_history_[int(c)] = history
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "mixtures_"):
            raise ValueError("classifier is not fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected (n, {self.n_features_in_}) matrix, got {X.shape}")
        n = X.shape[0]
        scores = np.full((n, self.classes_.size), -np.inf)
        usable = ~np.isnan(X).any(axis=1)
        for j, c in enumerate(self.classes_):
            mix = self.mixtures_[int(c)]
            if mix is None:
                continue
            scores[usable, j] = mix.log_likelihood(X[usable]) + self.log_priors_[j]
        out = np.empty(n, dtype=self.classes_.dtype)
        prior_fallback = self.classes_[int(np.argmax(self.log_priors_))]
        has_score = np.isfinite(scores).any(axis=1)
        out[~has_score] = prior_fallback
        if has_score.any():
            out[has_score] = self.classes_[np.argmax(scores[has_score], axis=1)]
        return out
