"""Probability-voting ensembles and the validation grid search over weights."""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import BadDistribution, BadStep, BadWeights, ConfigError
from .metrics import macro_f1
from .models import gbdt_fit, mlp_fit, rf_fit


def _check_probs(probs):
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:
        probs = probs[None, :]
    if probs.ndim not in (2, 3) or probs.shape[0] < 1:
        raise BadDistribution("expected an (M, C) or (M, n, C) probability array")
    if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=-1) - 1.0) > 1e-6):
        raise BadDistribution("every member row must be a distribution summing to 1")
    return probs


def _check_weights(weights, m):
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if weights.shape[0] != m:
        raise BadWeights(f"{weights.shape[0]} weights for {m} members")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise BadWeights(f"weights must be >= 0 and sum to 1, got {weights.tolist()}")
    return weights


def _mix(probs, weights):
    mix = np.zeros(probs.shape[1:])
    for w, p in zip(weights, probs):
        mix += w * p
    return mix


def weighted_vote(probs, weights):
    """``argmax_c sum_m w_m P_m(c)``; ties go to the lowest class code.

    ``probs`` is (M, C) for one sample or (M, n, C) for a batch.
    """
    probs = _check_probs(probs)
    weights = _check_weights(weights, probs.shape[0])
    mix = _mix(probs, weights)
    return np.argmax(mix, axis=-1), mix


def soft_vote(probs):
    """Unweighted mean of member distributions, then argmax."""
    probs = _check_probs(probs)
    m = probs.shape[0]
    return weighted_vote(probs, np.full(m, 1.0 / m))


def simplex_grid(m, step):
    """All weight vectors on the m-simplex with spacing ``step``, in
    lexicographic order."""
    k = 1.0 / step
    if step <= 0 or abs(k - round(k)) > 1e-9:
        raise BadStep(f"step {step} does not divide 1 evenly")
    k = int(round(k))
    for head in itertools.product(range(k + 1), repeat=m - 1):
        rest = k - sum(head)
        if rest >= 0:
            yield tuple(h / k for h in head) + (rest / k,)


@dataclass
class WeightSearch:
    weights: tuple
    score: float
    log: list = field(default_factory=list)


def search_weights(member_probs, y_val, step=0.1, metric=macro_f1):
    """Exhaustive simplex grid search on validation data.

    ``member_probs`` holds one (n, C) probability matrix per member. The
    first grid point reaching the best metric wins, which is the
    lexicographically smallest weight vector among ties.
    """
    member_probs = np.asarray(member_probs, dtype=np.float64)
    y_val = np.asarray(y_val)
    m = member_probs.shape[0]
    if m not in (2, 3, 4):
        raise ConfigError(f"weight search supports 2 to 4 members, got {m}")
    if y_val.size == 0 or np.unique(y_val).size < 2:
        raise ConfigError("validation set needs at least 2 classes")
    best = None
    log = []
    for w in simplex_grid(m, step):
        score = float(metric(y_val, np.argmax(_mix(member_probs, w), axis=1)))
        log.append({"weights": list(w), "score": score})
        if best is None or score > best.score:
            best = WeightSearch(w, score)
    best.log = log
    return best


class EnsembleModel:
    def __init__(self, members, weights, mode="weighted", names=None, search_log=None):
        if len(members) < 1:
            raise ConfigError("an ensemble needs at least one member")
        self.members = list(members)
        m = len(self.members)
        if mode == "soft":
            weights = np.full(m, 1.0 / m)
        elif mode != "weighted":
            raise ConfigError(f"unknown ensemble mode {mode!r}")
        self.weights = _check_weights(weights, m)
        self.mode = mode
        self.names = list(names or [f"member{i}" for i in range(m)])
        self.search_log = search_log or []

    def member_probs(self, X):
        return np.stack([mdl.predict_proba(X) for mdl in self.members])

    def predict_proba(self, X):
        return _mix(self.member_probs(X), self.weights)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


V2_MEMBERS = {
    "rf": {"t_trees": 150, "class_balanced": True},
    "gbdt": {"rounds": 100, "learning_rate": 0.05, "max_depth": 10, "max_leaves": 64},
    "mlp": {"hidden": (256, 128, 64)},
}

# Library-default style settings for the earlier ensembles.
DEFAULT_MEMBERS = {
    "rf": {"t_trees": 100, "class_balanced": False},
    "gbdt": {"rounds": 100, "learning_rate": 0.1, "max_depth": 30, "max_leaves": 31},
    "mlp": {"hidden": (100,)},
}


def fit_members(X, y, settings, seed=0, overrides=None):
    overrides = overrides or {}
    cfg = {k: {**v, **overrides.get(k, {})} for k, v in settings.items()}
    seeds = np.random.SeedSequence(seed).generate_state(3)
    return [
        rf_fit(X, y, seed=int(seeds[0]), **cfg["rf"]),
        gbdt_fit(X, y, seed=int(seeds[1]), **cfg["gbdt"]),
        mlp_fit(X, y, seed=int(seeds[2]), **cfg["mlp"]),
    ]


def build_v1(X, y, seed=0, overrides=None):
    """Soft vote over default-setting RF, boosted trees and MLP."""
    members = fit_members(X, y, DEFAULT_MEMBERS, seed, overrides)
    return EnsembleModel(members, None, mode="soft", names=["rf", "gbdt", "mlp"])


def build_weighted(X, y, X_val, y_val, seed=0, step=0.1, overrides=None, settings=None):
    members = fit_members(X, y, settings or DEFAULT_MEMBERS, seed, overrides)
    val_probs = np.stack([mdl.predict_proba(X_val) for mdl in members])
    found = search_weights(val_probs, y_val, step=step)
    return EnsembleModel(
        members, found.weights, mode="weighted", names=["rf", "gbdt", "mlp"], search_log=found.log
    )


def build_v2(X, y, X_val, y_val, seed=0, step=0.1, overrides=None):
    """RF(150, class-balanced) + boosted trees(depth 10, 64 leaves, lr 0.05)
    + MLP(256-128-64), weights picked by validation macro-F1."""
    return build_weighted(X, y, X_val, y_val, seed, step, overrides, settings=V2_MEMBERS)
