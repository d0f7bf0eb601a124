"""Bagged random forest with hard majority voting."""

import math

import numpy as np

from ..errors import DimensionMismatch, EmptyData
from ..flows import N_CLASSES
from .tree import DecisionTree, fit_tree


def balanced_class_weights(y, n_classes=N_CLASSES):
    """``n / (K * count_c)`` over the K classes present; absent classes get 1."""
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    present = counts > 0
    weights = np.ones(n_classes)
    weights[present] = y.shape[0] / (present.sum() * counts[present])
    return weights


def tree_rngs(seed, n_trees):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_trees)]


class RandomForest:
    def __init__(self, trees, class_weights, max_features, seed, hyperparameters=None):
        self.trees = list(trees)
        self.class_weights = np.asarray(class_weights, dtype=np.float64)
        self.max_features = max_features
        self.seed = seed
        self.hyperparameters = dict(hyperparameters or {})

    @property
    def n_features(self):
        return self.trees[0].n_features

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def votes(self, X):
        """(n_trees, n_rows) matrix of per-tree argmax classes."""
        X = self._check(X)
        return np.stack([np.argmax(t.predict_proba(X), axis=1) for t in self.trees])

    def predict_proba(self, X):
        X = self._check(X)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def predict(self, X):
        votes = self.votes(X)
        tally = np.stack([(votes == c).sum(axis=0) for c in range(N_CLASSES)])
        return np.argmax(tally, axis=0)  # first max = lowest class code

    def to_dict(self):
        return {
            "trees": [t.to_dict() for t in self.trees],
            "class_weights": self.class_weights.tolist(),
            "max_features": self.max_features,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d, hyperparameters=None):
        return cls(
            [DecisionTree.from_dict(t) for t in d["trees"]],
            d["class_weights"], d["max_features"], d["seed"], hyperparameters,
        )


def rf_fit(
    X,
    y,
    t_trees=150,
    class_balanced=True,
    max_depth=None,
    min_samples_leaf=1,
    max_features="sqrt",
    bootstrap=True,
    seed=0,
):
    """Fit ``t_trees`` Gini trees, each on n bootstrap draws.

    Class-balanced weighting scales each row by ``n / (K * count_c)``;
    ``max_features="sqrt"`` considers ``round(sqrt(d))`` features per split.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise EmptyData("random forest needs at least 2 rows")
    n, d = X.shape
    if max_features == "sqrt":
        k = max(1, int(round(math.sqrt(d))))
    elif max_features is None:
        k = d
    else:
        k = int(max_features)
    cw = balanced_class_weights(y) if class_balanced else np.ones(N_CLASSES)
    trees = []
    sample_indices = []
    for rng in tree_rngs(seed, t_trees):
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(
            fit_tree(
                X[idx], y[idx], cw[y[idx]],
                max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                max_features=k, rng=rng,
            )
        )
        sample_indices.append(idx)
    hp = {
        "t_trees": t_trees,
        "class_balanced": class_balanced,
        "max_depth": max_depth,
        "min_samples_leaf": min_samples_leaf,
        "max_features": max_features,
        "bootstrap": bootstrap,
        "seed": seed,
    }
    model = RandomForest(trees, cw, k, seed, hp)
    model.sample_indices_ = sample_indices
    return model


def rf_predict(model, x):
    """Majority vote over trees (ties to the lowest class) plus mean leaf
    histograms. A single row gives ``(int, probs)``; a matrix gives arrays."""
    single = np.ndim(x) == 1
    cls, probs = model.predict(x), model.predict_proba(x)
    if single:
        return int(cls[0]), probs[0]
    return cls, probs
