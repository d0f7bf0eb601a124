"""Shapley attributions with an interventional value function.

The value of a coalition S is the mean model output over background rows
after overwriting the features in S with those of the explained row.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyBackground, TooManyFeatures
from .flows import GROUP_NAMES

MAX_EXACT_FEATURES = 12
_ROW_BUDGET = 200_000


@dataclass
class ShapExplanation:
    phi: np.ndarray
    baseline: float
    fx: float
    class_explained: int
    method: str
    n_permutations: int = 0
    seed: int = None
    stderr: np.ndarray = None
    feature_names: tuple = field(default=None)

    @property
    def efficiency_gap(self):
        return float(self.phi.sum() + self.baseline - self.fx)

    def to_dict(self):
        names = self.feature_names or tuple(f"f{i}" for i in range(self.phi.size))
        stderr = self.stderr if self.stderr is not None else np.zeros_like(self.phi)
        return {
            "phi": {n: float(v) for n, v in zip(names, self.phi)},
            "stderr": {n: float(v) for n, v in zip(names, stderr)},
            "baseline": self.baseline,
            "fx": self.fx,
            "class_explained": GROUP_NAMES[self.class_explained],
            "method": self.method,
            "n_permutations": self.n_permutations,
            "seed": self.seed,
            "efficiency_gap": self.efficiency_gap,
        }


def class_output(model, cls):
    """Value function: the model's probability for class ``cls``."""
    return lambda X: model.predict_proba(X)[:, cls]


def sample_background(rows, size=100, seed=0):
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] <= size:
        return rows
    idx = np.sort(np.random.default_rng(seed).choice(rows.shape[0], size, replace=False))
    return rows[idx]


def _prepare(x, background):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    background = np.asarray(background, dtype=np.float64)
    if background.ndim != 2 or background.shape[0] == 0:
        raise EmptyBackground("background set is empty")
    if background.shape[1] != x.size:
        raise ConfigError("background and x differ in feature count")
    return x, background


def _values(f, x, background, masks):
    """Coalition values for a (k, d) boolean mask matrix, batched."""
    nb = background.shape[0]
    out = np.empty(masks.shape[0])
    chunk = max(1, _ROW_BUDGET // nb)
    for s in range(0, masks.shape[0], chunk):
        m = masks[s : s + chunk]
        hybrid = np.where(m[:, None, :], x[None, None, :], background[None, :, :])
        pred = np.asarray(f(hybrid.reshape(-1, x.size)), dtype=np.float64)
        out[s : s + chunk] = pred.reshape(m.shape[0], nb).mean(axis=1)
    return out


def coalition_value(f, x, background, S):
    """Mean of ``f`` over background rows with features ``S`` taken from x."""
    x, background = _prepare(x, background)
    mask = np.zeros((1, x.size), dtype=bool)
    mask[0, list(S)] = True
    return float(_values(f, x, background, mask)[0])


def shap_exact(f, x, background, class_explained=0, feature_names=None):
    """Shapley values by enumerating all 2^d coalitions (d <= 12)."""
    x, background = _prepare(x, background)
    d = x.size
    if d > MAX_EXACT_FEATURES:
        raise TooManyFeatures(f"exact enumeration is limited to {MAX_EXACT_FEATURES} features, got {d}")
    codes = np.arange(2**d)
    masks = ((codes[:, None] >> np.arange(d)[None, :]) & 1).astype(bool)
    v = _values(f, x, background, masks)
    size = masks.sum(axis=1)
    weight = np.array(
        [math.factorial(s) * math.factorial(d - s - 1) / math.factorial(d) for s in range(d)]
    )
    phi = np.zeros(d)
    for i in range(d):
        without = codes[~masks[:, i]]
        phi[i] = np.sum(weight[size[without]] * (v[without | (1 << i)] - v[without]))
    return ShapExplanation(
        phi=phi, baseline=float(v[0]), fx=float(v[-1]), class_explained=int(class_explained),
        method="exact", feature_names=feature_names,
    )


def shap_sampled(f, x, background, n_permutations=200, seed=0, class_explained=0, feature_names=None):
    """Average marginal contribution over random feature orderings.

    Every permutation's contributions telescope to ``fx - baseline``, so
    efficiency holds for any ``n_permutations``. ``stderr`` is the standard
    error of each feature's mean contribution.
    """
    if n_permutations < 1:
        raise ConfigError("n_permutations must be >= 1")
    x, background = _prepare(x, background)
    d = x.size
    rng = np.random.default_rng(seed)
    perms = np.stack([rng.permutation(d) for _ in range(n_permutations)])
    # prefix coalitions: row j of a permutation's chain holds its first j features
    rank = np.argsort(perms, axis=1)
    chains = rank[:, None, :] < np.arange(d + 1)[None, :, None]
    v = _values(f, x, background, chains.reshape(-1, d)).reshape(n_permutations, d + 1)
    contrib = np.zeros((n_permutations, d))
    np.put_along_axis(contrib, perms, np.diff(v, axis=1), axis=1)
    phi = contrib.mean(axis=0)
    if n_permutations > 1:
        stderr = contrib.std(axis=0, ddof=1) / math.sqrt(n_permutations)
    else:
        stderr = np.zeros(d)
    return ShapExplanation(
        phi=phi, baseline=float(v[0, 0]), fx=float(v[0, -1]), class_explained=int(class_explained),
        method="sampled", n_permutations=n_permutations, seed=seed, stderr=stderr,
        feature_names=feature_names,
    )
