"""Feature engineering, mutual-information selection, min-max scaling,
SMOTE oversampling and stratified splitting."""

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    BadBins,
    BadFractions,
    BadK,
    ClassTooSmall,
    ConfigError,
    FormatVersionError,
    LengthMismatch,
    MissingColumn,
    PlanNotFit,
)
from .flows import N_CLASSES, LabeledDataset

PLAN_FORMAT_VERSION = 1
ENGINEERED_FEATURES = ("len_ratio", "size_var")


def discretize(values, bins):
    """Equal-width bin index for each value over [min, max]."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros(values.shape, dtype=np.int64)
    idx = np.floor((values - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def mutual_information(feature_col, labels, bins=10):
    """MI in nats between a binned feature and integer class labels."""
    feature_col = np.asarray(feature_col, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if bins < 2:
        raise BadBins(f"bins must be >= 2, got {bins}")
    if feature_col.shape[0] != labels.shape[0]:
        raise LengthMismatch("feature and labels differ in length")
    n = feature_col.shape[0]
    if n == 0:
        raise LengthMismatch("empty input")
    b = discretize(feature_col, bins)
    _, c = np.unique(labels, return_inverse=True)
    c = c.reshape(-1)
    joint = np.zeros((bins, c.max() + 1))
    np.add.at(joint, (b, c), 1.0)
    joint /= n
    pb = joint.sum(axis=1, keepdims=True)
    pc = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / (pb @ pc)[nz])))
    return max(mi, 0.0)


@dataclass
class PreprocessPlan:
    feature_names: tuple
    selected_features: tuple = None
    mi_scores: tuple = None
    feature_mins: tuple = None
    feature_maxs: tuple = None
    engineered: tuple = ()
    bins: int = 10
    seed: int = 0

    @property
    def is_fit(self):
        return self.feature_mins is not None and self.selected_features is not None

    @property
    def selected_names(self):
        return tuple(self.feature_names[i] for i in self.selected_features)

    def to_dict(self):
        if not self.is_fit:
            raise PlanNotFit("cannot serialize an unfitted plan")
        return {
            "format_version": PLAN_FORMAT_VERSION,
            "feature_names": list(self.feature_names),
            "selected_features": [int(i) for i in self.selected_features],
            "mi_scores": [float(v) for v in self.mi_scores],
            "feature_mins": [float(v) for v in self.feature_mins],
            "feature_maxs": [float(v) for v in self.feature_maxs],
            "engineered": list(self.engineered),
            "bins": self.bins,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format_version") != PLAN_FORMAT_VERSION:
            raise FormatVersionError(
                f"plan format_version {d.get('format_version')!r} != {PLAN_FORMAT_VERSION}"
            )
        return cls(
            feature_names=tuple(d["feature_names"]),
            selected_features=tuple(d["selected_features"]),
            mi_scores=tuple(d["mi_scores"]),
            feature_mins=tuple(d["feature_mins"]),
            feature_maxs=tuple(d["feature_maxs"]),
            engineered=tuple(d["engineered"]),
            bins=int(d["bins"]),
            seed=int(d["seed"]),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def engineer_features(rows, schema):
    """Append ``len_ratio`` and ``size_var`` columns."""
    schema = list(schema)
    need = ("fwd_bytes", "bwd_bytes", "pkt_len_std", "pkt_len_mean")
    missing = [c for c in need if c not in schema]
    if missing:
        raise MissingColumn(f"schema lacks {missing}")
    rows = np.asarray(rows, dtype=np.float64)
    col = {name: rows[:, schema.index(name)] for name in need}
    len_ratio = (col["fwd_bytes"] + 1.0) / (col["bwd_bytes"] + 1.0)
    size_var = col["pkt_len_std"] / (col["pkt_len_mean"] + 1e-9)
    out = np.column_stack([rows, len_ratio, size_var])
    return out, tuple(schema) + ENGINEERED_FEATURES


def select_features(ds, k, bins=10):
    """Score every column by MI with the labels and keep the top ``k``.

    Ties go to the lower column index. The kept indices are returned in
    ascending order.
    """
    if not 1 <= k <= ds.d:
        raise BadK(f"k must be in [1, {ds.d}], got {k}")
    scores = np.array(
        [mutual_information(ds.rows[:, j], ds.labels, bins) for j in range(ds.d)]
    )
    # lexsort: primary key is the last one
    order = np.lexsort((np.arange(ds.d), -scores))
    keep = tuple(sorted(int(i) for i in order[:k]))
    return PreprocessPlan(
        feature_names=ds.schema,
        selected_features=keep,
        mi_scores=tuple(float(s) for s in scores),
        bins=bins,
    )


def fit_normalizer(rows, plan):
    rows = np.asarray(rows, dtype=np.float64)
    return replace(
        plan,
        feature_mins=tuple(float(v) for v in rows.min(axis=0)),
        feature_maxs=tuple(float(v) for v in rows.max(axis=0)),
    )


def normalize(rows, plan):
    """Min-max scale onto [0, 1] with the plan's training statistics.

    ``rows`` must already be restricted to the selected columns.
    """
    if plan is None or plan.feature_mins is None:
        raise PlanNotFit("normalization statistics are not fit")
    rows = np.asarray(rows, dtype=np.float64)
    lo = np.asarray(plan.feature_mins)
    hi = np.asarray(plan.feature_maxs)
    if rows.shape[-1] != lo.shape[0]:
        raise LengthMismatch(f"expected {lo.shape[0]} columns, got {rows.shape[-1]}")
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.clip((rows - lo) / safe, 0.0, 1.0)
    return np.where(span > 0, out, 0.0)


def fit_plan(train, k=20, bins=10, engineer=False, seed=0):
    """Fit the full transform on training rows only."""
    rows, schema = train.rows, train.schema
    engineered = ()
    if engineer:
        rows, schema = engineer_features(rows, schema)
        engineered = ENGINEERED_FEATURES
    k = min(k, len(schema))
    plan = select_features(LabeledDataset(schema, rows, train.labels), k, bins)
    plan = replace(plan, engineered=engineered, seed=seed)
    return fit_normalizer(rows[:, list(plan.selected_features)], plan)


def transform(rows, plan, schema=None):
    """Raw canonical rows -> engineered, selected, normalized rows."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    base = plan.feature_names[: len(plan.feature_names) - len(plan.engineered)]
    if schema is not None and tuple(schema) != tuple(base):
        raise MissingColumn("dataset schema does not match the fitted plan")
    if rows.shape[1] != len(base):
        raise LengthMismatch(f"expected {len(base)} raw columns, got {rows.shape[1]}")
    if plan.engineered:
        rows, _ = engineer_features(rows, base)
    return normalize(rows[:, list(plan.selected_features)], plan)


def transform_dataset(ds, plan):
    return LabeledDataset(plan.selected_names, transform(ds.rows, plan, ds.schema), ds.labels)


def smote_oversample(ds, k_neighbors=5, seed=0, return_parents=False):
    """Oversample every minority class up to the majority count.

    Synthetic rows are ``x + u * (x_nn - x)`` with ``x_nn`` one of the
    ``min(k_neighbors, count - 1)`` nearest same-class rows. Originals are
    kept, unchanged, as a prefix of the output. With ``return_parents`` the
    (base, neighbour) row indices of each synthetic row are returned too.
    """
    if k_neighbors < 1:
        raise ConfigError("k_neighbors must be >= 1")
    counts = np.bincount(ds.labels, minlength=N_CLASSES)
    target = counts.max() if ds.n else 0
    rng = np.random.default_rng(seed)
    new_rows, new_labels, parents = [], [], []
    for c in range(N_CLASSES):
        need = int(target - counts[c])
        if counts[c] == 0 or need == 0:
            continue
        if counts[c] < 2:
            raise ClassTooSmall(f"class {c} has {counts[c]} sample(s); SMOTE needs 2")
        members = np.flatnonzero(ds.labels == c)
        X = ds.rows[members]
        k = min(k_neighbors, len(members) - 1)
        base = rng.integers(0, len(members), size=need)
        pick = rng.integers(0, k, size=need)
        u = rng.random(size=need)
        _, nn = cKDTree(X).query(X, k=k + 1)
        nn = np.asarray(nn).reshape(len(members), k + 1)
        # drop self; duplicates may push self out of slot 0
        is_self = nn == np.arange(len(members))[:, None]
        slot = np.argsort(is_self, axis=1, kind="stable")[:, :k]
        neigh = np.take_along_axis(nn, slot, axis=1)
        partner = neigh[base, pick]
        x = X[base]
        syn = x + u[:, None] * (X[partner] - x)
        new_rows.append(syn)
        new_labels.append(np.full(need, c))
        parents.append(np.column_stack([members[base], members[partner]]))
    if not new_rows:
        out = ds
        par = np.empty((0, 2), dtype=np.int64)
    else:
        out = LabeledDataset(
            ds.schema,
            np.vstack([ds.rows] + new_rows),
            np.concatenate([ds.labels] + new_labels),
        )
        par = np.vstack(parents)
    return (out, par) if return_parents else out


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_frac, self.val_frac, self.test_frac)
        if any(not 0 < f < 1 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise BadFractions(f"split fractions must lie in (0,1) and sum to 1: {fr}")


def _allocate(n, spec):
    n_train = int(round(n * spec.train_frac))
    n_val = int(round(n * spec.val_frac))
    if n >= 3:
        n_train = min(max(n_train, 1), n - 2)
        n_val = min(max(n_val, 1), n - n_train - 1)
    n_val = min(n_val, n - n_train)
    return n_train, n_val


def split_indices(labels, spec=None):
    """Row indices of the (train, val, test) partition, each sorted."""
    spec = spec or SplitSpec()
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n < 10:
        raise BadFractions(f"need at least 10 rows to split, got {n}")
    rng = np.random.default_rng(spec.seed)
    parts = ([], [], [])
    groups = (
        [np.flatnonzero(labels == c) for c in range(N_CLASSES)]
        if spec.stratified
        else [np.arange(n)]
    )
    for idx in groups:
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        n_train, n_val = _allocate(idx.size, spec)
        parts[0].append(idx[:n_train])
        parts[1].append(idx[n_train : n_train + n_val])
        parts[2].append(idx[n_train + n_val :])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


def stratified_split(ds, spec=None):
    """Partition ``ds`` into (train, val, test) with per-class allocation;
    remainders are decided by a seeded shuffle."""
    return tuple(ds.subset(i) for i in split_indices(ds.labels, spec))
