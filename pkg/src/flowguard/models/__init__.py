"""From-scratch classifiers. Every model exposes ``predict_proba(X)`` with
one column per AttackGroup."""

from .boosting import BoostedTrees, gbdt_fit, gbdt_predict, log_loss, softmax
from .forest import RandomForest, balanced_class_weights, rf_fit, rf_predict
from .mlp import MlpModel, he_init, loss_and_grads, mlp_fit, mlp_predict
from .tree import DecisionTree, FlatTree, fit_newton_tree, fit_tree

__all__ = [
    "BoostedTrees",
    "DecisionTree",
    "FlatTree",
    "MlpModel",
    "RandomForest",
    "balanced_class_weights",
    "fit_newton_tree",
    "fit_tree",
    "gbdt_fit",
    "gbdt_predict",
    "he_init",
    "log_loss",
    "loss_and_grads",
    "mlp_fit",
    "mlp_predict",
    "rf_fit",
    "rf_predict",
    "softmax",
]
