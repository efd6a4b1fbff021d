"""Gradient-boosted decision trees over ternary header-bit vectors.

The pool members are boosted ensembles of axis-aligned regression trees
fit to multiclass softmax gradients (one tree per class per round, with
second-order leaf values). Because every input coordinate takes a value
in {-1, 0, 1}, split search only ever needs the two thresholds -0.5 and
0.5, which keeps exact greedy search cheap: per node we accumulate
gradient/hessian sums for each of the three input values with dense
mat-vecs and score both cut points of every feature at once.

Training is deterministic: there is no row or column subsampling, and
ties in split gain resolve to the lowest feature index and threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .validation import check_matrix_labels, check_ternary_matrix

__all__ = ["BoostedTernaryClassifier", "Tree"]

MODEL_FORMAT = "acdc-ensemble/1"


@dataclass
class Tree:
    """Flat array representation of one regression tree.

    ``feature[i] == -1`` marks node i as a leaf with prediction
    ``value[i]``; otherwise the node routes x to ``left[i]`` when
    ``x[feature[i]] <= threshold[i]`` and ``right[i]`` otherwise.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[node]
            active = np.flatnonzero(feat >= 0)
            if active.size == 0:
                break
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]

    def to_lists(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_lists(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int32),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int32),
            right=np.asarray(d["right"], dtype=np.int32),
            value=np.asarray(d["value"], dtype=np.float64),
        )


class _TreeBuilder:
    def __init__(self, max_depth, reg_lambda, min_samples_leaf, min_gain):
        self.max_depth = max_depth
        self.reg_lambda = reg_lambda
        self.min_samples_leaf = min_samples_leaf
        self.min_gain = min_gain
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def build(self, neg_mask, pos_mask, g, h, idx, depth, node=None) -> int:
        """Grow the subtree for the sample subset ``idx``; returns node id."""
        if node is None:
            node = self._new_node()
        lam = self.reg_lambda
        g_node = g[idx]
        h_node = h[idx]
        g_tot = g_node.sum()
        h_tot = h_node.sum()
        leaf_value = -g_tot / (h_tot + lam)

        if depth >= self.max_depth or idx.size < 2 * self.min_samples_leaf:
            self.value[node] = leaf_value
            return node

        # Per-feature sums of g/h/count for input values -1 and +1; the
        # value-0 sums follow by subtraction from the node totals.
        neg = neg_mask[idx]
        pos = pos_mask[idx]
        g_neg = neg.T @ g_node
        g_pos = pos.T @ g_node
        h_neg = neg.T @ h_node
        h_pos = pos.T @ h_node
        c_neg = neg.sum(axis=0)
        c_pos = pos.sum(axis=0)
        n = float(idx.size)

        score_parent = g_tot * g_tot / (h_tot + lam)
        gains = np.full((g_neg.shape[0], 2), -np.inf)
        for t, (g_l, h_l, c_l) in enumerate(
            [
                (g_neg, h_neg, c_neg),  # threshold -0.5: left = {-1}
                (g_tot - g_pos, h_tot - h_pos, n - c_pos),  # threshold 0.5: left = {-1, 0}
            ]
        ):
            g_r = g_tot - g_l
            h_r = h_tot - h_l
            c_r = n - c_l
            ok = (c_l >= self.min_samples_leaf) & (c_r >= self.min_samples_leaf)
            gain = g_l * g_l / (h_l + lam) + g_r * g_r / (h_r + lam) - score_parent
            gains[:, t] = np.where(ok, gain, -np.inf)

        flat = int(np.argmax(gains))
        best_feature, best_t = divmod(flat, 2)
        best_gain = gains[best_feature, best_t]
        if not np.isfinite(best_gain) or best_gain <= self.min_gain:
            self.value[node] = leaf_value
            return node

        thresh = -0.5 if best_t == 0 else 0.5
        if best_t == 0:
            left_local = neg[:, best_feature] > 0
        else:
            left_local = pos[:, best_feature] == 0
        idx_left = idx[left_local]
        idx_right = idx[~left_local]

        self.feature[node] = best_feature
        self.threshold[node] = thresh
        self.left[node] = self.build(neg_mask, pos_mask, g, h, idx_left, depth + 1)
        self.right[node] = self.build(neg_mask, pos_mask, g, h, idx_right, depth + 1)
        return node

    def finish(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
        )


def _softmax(raw: np.ndarray) -> np.ndarray:
    z = raw - raw.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class BoostedTernaryClassifier(BaseEstimator, ClassifierMixin):
    """Multiclass gradient-boosted trees for {-1, 0, 1} feature matrices.

    Parameters mirror the usual GBDT knobs; ``random_state`` is accepted
    for interface compatibility but training is fully deterministic.
    """

    def __init__(
        self,
        n_rounds: int = 50,
        max_depth: int = 6,
        learning_rate: float = 0.1,
        reg_lambda: float = 1.0,
        min_samples_leaf: int = 1,
        min_gain: float = 0.0,
        random_state: int = 0,
    ):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda
        self.min_samples_leaf = min_samples_leaf
        self.min_gain = min_gain
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_matrix_labels(X, y)
        classes, y_enc = np.unique(y, return_inverse=True)
        if classes.size < 2:
            raise ValueError(f"training needs >= 2 classes, got {classes.size}")
        n, d = X.shape
        k = classes.size

        neg_mask = (X == -1).astype(np.float64)
        pos_mask = (X == 1).astype(np.float64)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), y_enc] = 1.0

        priors = np.bincount(y_enc, minlength=k) / n
        base = np.log(np.clip(priors, 1e-12, None))
        raw = np.tile(base, (n, 1))

        trees: list[list[Tree]] = []
        all_idx = np.arange(n)
        for _ in range(self.n_rounds):
            p = _softmax(raw)
            grad = p - onehot
            hess = p * (1.0 - p)
            round_trees = []
            for c in range(k):
                builder = _TreeBuilder(
                    self.max_depth, self.reg_lambda, self.min_samples_leaf, self.min_gain
                )
                builder.build(neg_mask, pos_mask, grad[:, c], hess[:, c], all_idx, depth=0)
                tree = builder.finish()
                raw[:, c] += self.learning_rate * tree.predict(X)
                round_trees.append(tree)
            trees.append(round_trees)

        self.classes_ = classes
        self.base_score_ = base
        self.trees_ = trees
        self.n_features_in_ = d
        return self

    def _check_fitted(self):
        if not hasattr(self, "trees_"):
            raise ValueError("classifier is not fitted")

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_ternary_matrix(X, n_features=self.n_features_in_)
        raw = np.tile(self.base_score_, (X.shape[0], 1))
        for round_trees in self.trees_:
            for c, tree in enumerate(round_trees):
                raw[:, c] += self.learning_rate * tree.predict(X)
        return raw

    def predict_proba(self, X) -> np.ndarray:
        return _softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X)
        if X.shape[0] == 0:
            self._check_fitted()
            return np.empty(0, dtype=self.classes_.dtype)
        raw = self.decision_function(X)
        return self.classes_[np.argmax(raw, axis=1)]

    def split_feature_ids(self) -> set[int]:
        """Distinct feature columns used by any split in the ensemble."""
        self._check_fitted()
        used: set[int] = set()
        for round_trees in self.trees_:
            for tree in round_trees:
                used.update(int(f) for f in tree.feature if f >= 0)
        return used

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "format": MODEL_FORMAT,
            "params": self.get_params(),
            "classes": self.classes_.tolist(),
            "base_score": self.base_score_.tolist(),
            "n_features_in": int(self.n_features_in_),
            "trees": [[t.to_lists() for t in r] for r in self.trees_],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedTernaryClassifier":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {d.get('format')!r}")
        model = cls(**d["params"])
        model.classes_ = np.asarray(d["classes"], dtype=np.int64)
        model.base_score_ = np.asarray(d["base_score"], dtype=np.float64)
        model.n_features_in_ = int(d["n_features_in"])
        model.trees_ = [[Tree.from_lists(t) for t in r] for r in d["trees"]]
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")))

    @classmethod
    def load(cls, path: str | Path) -> "BoostedTernaryClassifier":
        return cls.from_dict(json.loads(Path(path).read_text()))
