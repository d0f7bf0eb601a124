"""Multiclass gradient boosting with second-order leaf-wise trees.

Each round fits one regression tree per class to the softmax cross-entropy
gradient ``p - y`` and Hessian ``p (1 - p)``. Leaves take the Newton weight
``-G / (H + lambda)``; splits must beat ``gamma``. The regularization of a
tree is ``gamma * leaves + lambda / 2 * sum(w^2)``.
"""

import numpy as np

from ..errors import BadHyperparameter, DimensionMismatch, EmptyData
from ..flows import N_CLASSES
from .tree import FlatTree, fit_newton_tree


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_loss(y, margins):
    z = margins - margins.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - z[np.arange(y.shape[0]), y]))


class BoostedTrees:
    def __init__(
        self,
        rounds,
        base_scores,
        learning_rate,
        n_features,
        hyperparameters=None,
        train_loss=(),
        initial_loss=None,
        regularization=(),
    ):
        self.rounds = [list(r) for r in rounds]
        self.base_scores = np.asarray(base_scores, dtype=np.float64)
        self.learning_rate = float(learning_rate)
        self.n_features = int(n_features)
        self.hyperparameters = dict(hyperparameters or {})
        self.train_loss = list(train_loss)
        self.initial_loss = initial_loss
        self.regularization = list(regularization)

    def predict_margin(self, X, n_rounds=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        F = np.tile(self.base_scores, (X.shape[0], 1))
        for trees in self.rounds[:n_rounds]:
            for k, tree in enumerate(trees):
                F[:, k] += self.learning_rate * tree.predict_value(X)[:, 0]
        return F

    def predict_proba(self, X):
        return softmax(self.predict_margin(X))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self):
        return {
            "rounds": [[t.to_dict() for t in r] for r in self.rounds],
            "base_scores": self.base_scores.tolist(),
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "train_loss": self.train_loss,
            "initial_loss": self.initial_loss,
            "regularization": self.regularization,
        }

    @classmethod
    def from_dict(cls, d, hyperparameters=None):
        return cls(
            [[FlatTree.from_dict(t) for t in r] for r in d["rounds"]],
            d["base_scores"], d["learning_rate"], d["n_features"], hyperparameters,
            d.get("train_loss", ()), d.get("initial_loss"), d.get("regularization", ()),
        )


def gbdt_fit(
    X,
    y,
    rounds=100,
    learning_rate=0.05,
    max_depth=10,
    max_leaves=64,
    lambda_l2=1.0,
    gamma_leaf=0.0,
    min_samples_leaf=20,
    min_hess=1e-3,
    seed=0,
):
    """Boost ``rounds`` x 7 trees; per-round training log-loss is kept in
    ``model.train_loss``.

    Base scores are the log of add-one smoothed class priors. ``seed`` is
    recorded only: the grower uses every row and feature, so it is
    deterministic without one.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise EmptyData("boosting needs at least 2 rows")
    if int(rounds) < 1:
        raise BadHyperparameter(f"rounds must be >= 1, got {rounds}")
    if not 0 < learning_rate <= 1:
        raise BadHyperparameter(f"learning_rate must lie in (0, 1], got {learning_rate}")
    if max_leaves < 2 or max_depth < 1 or lambda_l2 < 0 or gamma_leaf < 0:
        raise BadHyperparameter("max_leaves >= 2, max_depth >= 1, lambda/gamma >= 0 required")
    n, d = X.shape
    K = N_CLASSES
    Y = np.zeros((n, K))
    Y[np.arange(n), y] = 1.0
    counts = np.bincount(y, minlength=K)
    base = np.log((counts + 1.0) / (n + K))
    F = np.tile(base, (n, 1))
    order = np.argsort(X, axis=0, kind="stable")

    model = BoostedTrees(
        [], base, learning_rate, d,
        hyperparameters={
            "rounds": int(rounds),
            "learning_rate": learning_rate,
            "max_depth": max_depth,
            "max_leaves": max_leaves,
            "lambda_l2": lambda_l2,
            "gamma_leaf": gamma_leaf,
            "min_samples_leaf": min_samples_leaf,
            "min_hess": min_hess,
            "seed": seed,
        },
        initial_loss=log_loss(y, F),
    )
    for _ in range(int(rounds)):
        P = softmax(F)
        G = P - Y
        H = np.maximum(P * (1.0 - P), 1e-16)
        trees, omega = [], 0.0
        step = np.empty_like(F)
        for k in range(K):
            tree, fitted = fit_newton_tree(
                X, G[:, k], H[:, k], order,
                lam=lambda_l2, gamma=gamma_leaf, max_depth=max_depth,
                max_leaves=max_leaves, min_samples_leaf=min_samples_leaf, min_hess=min_hess,
            )
            leaves = tree.value[tree.feature < 0, 0]
            omega += gamma_leaf * leaves.size + 0.5 * lambda_l2 * float(np.sum(leaves**2))
            trees.append(tree)
            step[:, k] = fitted
        F += learning_rate * step
        model.rounds.append(trees)
        model.regularization.append(omega)
        model.train_loss.append(log_loss(y, F))
    return model


def gbdt_predict(model, x):
    """Softmax over the accumulated per-class margins."""
    probs = model.predict_proba(x)
    return probs[0] if np.ndim(x) == 1 else probs
