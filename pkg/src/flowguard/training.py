"""Split, preprocess, balance and fit one of the six model kinds."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .artifacts import Pipeline
from .ensemble import DEFAULT_MEMBERS, V2_MEMBERS, EnsembleModel, build_v1, build_v2, build_weighted
from .errors import ConfigError
from .metrics import classification_report
from .models import gbdt_fit, mlp_fit, rf_fit
from .preprocess import SplitSpec, fit_plan, smote_oversample, stratified_split, transform

log = logging.getLogger(__name__)

MODEL_KINDS = ("rf", "gbdt", "mlp", "ens_v1", "ens_weighted_fe", "ens_v2")

DEFAULT_CONFIG = {
    "seed": 0,
    "k_features": 20,
    "bins": 10,
    "smote_k": 5,
    "split": [0.70, 0.15, 0.15],
    "weight_step": 0.1,
    # per-member overrides, e.g. {"rf": {"t_trees": 20}, "gbdt": {"rounds": 30}}
    "members": {},
}


def resolve_config(config=None, seed=None):
    cfg = {**DEFAULT_CONFIG, **(config or {})}
    unknown = set(cfg) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if seed is not None:
        cfg["seed"] = int(seed)
    if not isinstance(cfg["members"], dict) or set(cfg["members"]) - {"rf", "gbdt", "mlp"}:
        raise ConfigError("config 'members' may only hold rf, gbdt and mlp overrides")
    if not isinstance(cfg["k_features"], int) or cfg["k_features"] < 1:
        raise ConfigError("k_features must be a positive integer")
    if len(cfg["split"]) != 3:
        raise ConfigError("split must list train, val and test fractions")
    return cfg


@dataclass
class TrainResult:
    pipeline: Pipeline
    validation: object
    test: object
    member_reports: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    split_sizes: dict = field(default_factory=dict)

    def report_dict(self):
        out = {
            "model_kind": self.pipeline.kind,
            "validation": self.validation.to_dict(),
            "test": self.test.to_dict() if self.test is not None else None,
            "macro_f1": self.validation.macro_f1,
            "split_sizes": self.split_sizes,
            "selected_features": list(self.pipeline.plan.selected_names),
        }
        model = self.pipeline.model
        if isinstance(model, EnsembleModel):
            out["ensemble"] = {
                "mode": model.mode,
                "members": model.names,
                "weights": list(model.weights),
                "weight_search_log": model.search_log,
                "member_macro_f1": self.member_reports,
            }
        return out


def _single(kind, X, y, seed, members):
    if kind == "rf":
        return rf_fit(X, y, seed=seed, **{**V2_MEMBERS["rf"], **members.get("rf", {})})
    if kind == "gbdt":
        return gbdt_fit(X, y, seed=seed, **{**V2_MEMBERS["gbdt"], **members.get("gbdt", {})})
    return mlp_fit(X, y, seed=seed, **{**V2_MEMBERS["mlp"], **members.get("mlp", {})})


def train(ds, kind, config=None):
    """Fit ``kind`` on the training split of ``ds``.

    The plan (selection and scaling) is fit on the training split only;
    SMOTE then balances the scaled training rows. Reports cover the
    validation and test splits.
    """
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {', '.join(MODEL_KINDS)}")
    cfg = resolve_config(config)
    seed = cfg["seed"]
    tr, va, te = stratified_split(ds, SplitSpec(*cfg["split"], seed=seed))
    plan = fit_plan(tr, k=cfg["k_features"], bins=cfg["bins"], engineer=kind == "ens_weighted_fe", seed=seed)
    Xtr, Xva, Xte = (transform(part.rows, plan, part.schema) for part in (tr, va, te))
    balanced = smote_oversample(
        type(tr)(plan.selected_names, Xtr, tr.labels), k_neighbors=cfg["smote_k"], seed=seed
    )
    X, y = balanced.rows, balanced.labels
    log.info("training %s on %d rows (%d after SMOTE), %d features", kind, tr.n, balanced.n, X.shape[1])
    members = cfg["members"]
    if kind in ("rf", "gbdt", "mlp"):
        model = _single(kind, X, y, seed, members)
    elif kind == "ens_v1":
        model = build_v1(X, y, seed=seed, overrides=members)
    elif kind == "ens_weighted_fe":
        model = build_weighted(X, y, Xva, va.labels, seed=seed, step=cfg["weight_step"], overrides=members)
    else:
        model = build_v2(X, y, Xva, va.labels, seed=seed, step=cfg["weight_step"], overrides=members)

    pipeline = Pipeline(plan, model, kind)
    predict = (lambda Z: model.predict(Z)) if kind == "rf" else (lambda Z: np.argmax(model.predict_proba(Z), axis=1))
    member_reports = {}
    if isinstance(model, EnsembleModel):
        for name, member in zip(model.names, model.members):
            member_reports[name] = {
                "validation": classification_report(va.labels, np.argmax(member.predict_proba(Xva), axis=1)).macro_f1,
                "test": classification_report(te.labels, np.argmax(member.predict_proba(Xte), axis=1)).macro_f1,
            }
    return TrainResult(
        pipeline=pipeline,
        validation=classification_report(va.labels, predict(Xva)),
        test=classification_report(te.labels, predict(Xte)),
        member_reports=member_reports,
        config=cfg,
        split_sizes={"train": tr.n, "train_balanced": balanced.n, "val": va.n, "test": te.n},
    )


__all__ = ["DEFAULT_CONFIG", "DEFAULT_MEMBERS", "MODEL_KINDS", "TrainResult", "resolve_config", "train"]
