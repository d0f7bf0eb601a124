"""CART trees stored as flat node arrays.

Two growers live here: a depth-first weighted-Gini classifier used by the
random forest, and a best-first (leaf-wise) second-order regression tree used
by the boosted model.
"""

import heapq

import numpy as np

from ..errors import DimensionMismatch, EmptyData
from ..flows import N_CLASSES


class FlatTree:
    """Binary tree; ``feature[i] < 0`` marks node ``i`` as a leaf.

    ``value`` is (n_nodes, n_outputs): a class histogram for classifiers, a
    single leaf weight for regression trees.
    """

    def __init__(self, feature, threshold, left, right, value, n_features):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        if self.value.ndim == 1:
            self.value = self.value[:, None]
        self.n_features = int(n_features)

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X):
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active[r] = self.feature[node[r]] >= 0
        return node

    def predict_value(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"], d["n_features"])


class DecisionTree(FlatTree):
    """Classification tree whose leaves hold class distributions."""

    def __init__(self, *args, max_depth=None, min_samples_leaf=1, **kwargs):
        super().__init__(*args, **kwargs)
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def predict_proba(self, X):
        return self.predict_value(X)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self):
        d = super().to_dict()
        d.update(max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["feature"], d["threshold"], d["left"], d["right"], d["value"], d["n_features"],
            max_depth=d.get("max_depth"), min_samples_leaf=d.get("min_samples_leaf", 1),
        )


def _threshold(lo, hi):
    thr = 0.5 * (lo + hi)
    # midpoint can round up to hi for adjacent floats
    return lo if thr >= hi else thr


def _best_gini_split(X, Yw, idx, feats, min_leaf):
    """Best (feature, threshold, go_left_mask) for the rows ``idx``, or None.

    Maximizing sum(L_c^2)/W_L + sum(R_c^2)/W_R is equivalent to minimizing
    the weighted child Gini impurity.
    """
    m = idx.size
    Xn = X[np.ix_(idx, feats)]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    cum = np.cumsum(Yw[idx][order], axis=0)  # (m, k, C)
    left = cum[:-1]
    right = cum[-1][None] - left
    wl = left.sum(axis=2)
    wr = right.sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(wl > 0, (left**2).sum(axis=2) / wl, 0.0) + np.where(
            wr > 0, (right**2).sum(axis=2) / wr, 0.0
        )
    pos = np.arange(1, m)[:, None]
    valid = (xs[:-1] < xs[1:]) & (pos >= min_leaf) & (m - pos >= min_leaf)
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf).T  # feature-major: ties -> low feature, low threshold
    f_at, p_at = np.unravel_index(np.argmax(score), score.shape)
    thr = _threshold(xs[p_at, f_at], xs[p_at + 1, f_at])
    return int(feats[f_at]), thr, X[idx, feats[f_at]] <= thr


def fit_tree(
    rows,
    labels,
    sample_weights=None,
    max_depth=None,
    min_samples_leaf=1,
    max_features=None,
    rng=None,
    n_classes=N_CLASSES,
):
    """Grow a weighted-Gini classification tree depth-first.

    A node becomes a leaf when it is pure, at ``max_depth``, or has no split
    leaving ``min_samples_leaf`` rows on both sides. Impure nodes split even
    on zero gain (XOR needs this). ``max_features`` features are sampled per
    node with ``rng``; if none of them admits a split the rest are tried.
    """
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyData("fit_tree needs at least one row")
    n, d = X.shape
    w = np.ones(n) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)
    if np.any(w < 0) or not np.any(w > 0):
        raise EmptyData("sample weights must be >= 0 and not all zero")
    Yw = np.zeros((n, n_classes))
    Yw[np.arange(n), y] = w
    if max_features is None or max_features >= d:
        max_features = d
    rng = rng if rng is not None else np.random.default_rng(0)

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        hist = Yw[idx].sum(axis=0)
        total = hist.sum()
        value.append(hist / total if total > 0 else np.full(n_classes, 1.0 / n_classes))
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if np.count_nonzero(value[node] > 0) <= 1 or idx.size < 2 * min_samples_leaf:
            continue
        if max_features < d:
            feats = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            feats = np.arange(d)
        split = _best_gini_split(X, Yw, idx, feats, min_samples_leaf)
        if split is None and feats.size < d:
            rest = np.setdiff1d(np.arange(d), feats)
            split = _best_gini_split(X, Yw, idx, rest, min_samples_leaf)
        if split is None:
            continue
        f, thr, go_left = split
        li = new_node(idx[go_left])
        ri = new_node(idx[~go_left])
        feature[node], threshold[node], left[node], right[node] = f, thr, li, ri
        # right pushed first so the left subtree is numbered first
        stack.append((ri, idx[~go_left], depth + 1))
        stack.append((li, idx[go_left], depth + 1))

    return DecisionTree(
        feature, threshold, left, right, np.array(value), d,
        max_depth=max_depth, min_samples_leaf=min_samples_leaf,
    )


class _Leaf:
    __slots__ = ("node", "order", "depth", "G", "H", "split")

    def __init__(self, node, order, depth, G, H):
        self.node, self.order, self.depth, self.G, self.H = node, order, depth, G, H
        self.split = None


def _best_newton_split(X, g, h, order, lam, gamma, min_leaf, min_hess):
    """Best split of a leaf from its per-feature sorted row indices.

    Returns (gain, feature, position, threshold) or None.
    """
    m, d = order.shape
    if m < 2 * min_leaf:
        return None
    xs = X[order, np.arange(d)[None, :]]
    GL = np.cumsum(g[order], axis=0)[:-1]
    HL = np.cumsum(h[order], axis=0)[:-1]
    G, H = GL[-1, 0] + g[order[-1, 0]], HL[-1, 0] + h[order[-1, 0]]
    GR, HR = G - GL, H - HL
    gain = 0.5 * (GL**2 / (HL + lam) + GR**2 / (HR + lam) - G**2 / (H + lam)) - gamma
    pos = np.arange(1, m)[:, None]
    valid = (
        (xs[:-1] < xs[1:])
        & (pos >= min_leaf)
        & (m - pos >= min_leaf)
        & (HL >= min_hess)
        & (HR >= min_hess)
    )
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf).T
    f_at, p_at = np.unravel_index(np.argmax(gain), gain.shape)
    best = float(gain[f_at, p_at])
    if not best > 0.0:
        return None
    thr = _threshold(xs[p_at, f_at], xs[p_at + 1, f_at])
    return best, int(f_at), int(p_at), thr


def fit_newton_tree(
    X,
    g,
    h,
    root_order,
    lam=1.0,
    gamma=0.0,
    max_depth=10,
    max_leaves=64,
    min_samples_leaf=20,
    min_hess=1e-3,
):
    """Grow a regression tree leaf-wise on gradient/Hessian statistics.

    The leaf with the largest positive gain is split next, until
    ``max_leaves`` is reached or no leaf below ``max_depth`` can improve the
    regularized objective. Leaf weights are ``-G / (H + lam)``.

    ``root_order`` holds the row indices sorted by each feature, shape
    (n, d); children inherit it by stable filtering, so nothing is re-sorted.

    Returns the tree and the leaf weight of every training row.
    """
    n, d = X.shape
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(G, H):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-G / (H + lam))
        return len(feature) - 1

    def consider(leaf):
        if leaf.depth < max_depth:
            leaf.split = _best_newton_split(X, g, h, leaf.order, lam, gamma, min_samples_leaf, min_hess)
        if leaf.split is not None:
            heapq.heappush(heap, (-leaf.split[0], leaf.node, leaf))

    col = root_order[:, 0]
    G0, H0 = float(g[col].sum()), float(h[col].sum())
    root = _Leaf(new_node(G0, H0), root_order, 0, G0, H0)
    heap = []
    leaves = {root.node: root}
    consider(root)
    in_left = np.zeros(n, dtype=bool)
    while heap and len(leaves) < max_leaves:
        _, _, leaf = heapq.heappop(heap)
        _, f, p, thr = leaf.split
        left_rows = leaf.order[: p + 1, f]
        in_left[left_rows] = True
        mask = in_left[leaf.order.T]
        n_left = p + 1
        lo = leaf.order.T[mask].reshape(d, n_left).T
        ro = leaf.order.T[~mask].reshape(d, leaf.order.shape[0] - n_left).T
        in_left[left_rows] = False
        GL, HL = float(g[lo[:, 0]].sum()), float(h[lo[:, 0]].sum())
        GR, HR = float(g[ro[:, 0]].sum()), float(h[ro[:, 0]].sum())
        li, ri = new_node(GL, HL), new_node(GR, HR)
        node = leaf.node
        feature[node], threshold[node], left[node], right[node] = f, thr, li, ri
        del leaves[node]
        for child in (_Leaf(li, lo, leaf.depth + 1, GL, HL), _Leaf(ri, ro, leaf.depth + 1, GR, HR)):
            leaves[child.node] = child
            consider(child)

    fitted = np.empty(n)
    for leaf in leaves.values():
        fitted[leaf.order[:, 0]] = value[leaf.node]
    tree = FlatTree(feature, threshold, left, right, np.array(value), d)
    return tree, fitted
