"""Versioned JSON model artifacts and the preprocess+model pipeline.

A model file looks like::

    {"format_version": 1, "model_kind": "rf", "schema": [...],
     "hyperparameters": {...}, "parameters": {...}}

Ensembles store their members as sibling files and reference them by
relative path, together with weights, mode and the weight-search log.
"""

import json
import os

import numpy as np

from .ensemble import EnsembleModel
from .errors import ConfigError, FormatVersionError
from .models import BoostedTrees, DecisionTree, MlpModel, RandomForest
from .preprocess import PreprocessPlan, transform

FORMAT_VERSION = 1

_KINDS = {
    "tree": DecisionTree,
    "rf": RandomForest,
    "gbdt": BoostedTrees,
    "mlp": MlpModel,
}
_KIND_OF = {cls: kind for kind, cls in _KINDS.items()}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def model_to_dict(model, schema=()):
    kind = _KIND_OF.get(type(model))
    if kind is None:
        raise ConfigError(f"cannot serialize {type(model).__name__}")
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": kind,
        "schema": list(schema),
        "hyperparameters": getattr(model, "hyperparameters", {}),
        "parameters": model.to_dict(),
    }


def _check_header(d, path):
    if d.get("format_version") != FORMAT_VERSION:
        raise FormatVersionError(
            f"{path}: format_version {d.get('format_version')!r}, expected {FORMAT_VERSION}"
        )


def model_from_dict(d, path="<artifact>"):
    _check_header(d, path)
    kind = d.get("model_kind")
    if kind not in _KINDS:
        raise ConfigError(f"{path}: unknown model_kind {kind!r}")
    cls = _KINDS[kind]
    if cls is DecisionTree:
        return cls.from_dict(d["parameters"])
    return cls.from_dict(d["parameters"], d.get("hyperparameters"))


def save_model(model, path, schema=()):
    """Write ``model``; ensembles also write ``<stem>.<member>.json`` files."""
    if isinstance(model, EnsembleModel):
        stem = os.path.splitext(os.path.basename(path))[0]
        refs = []
        for name, member in zip(model.names, model.members):
            ref = f"{stem}.{name}.json"
            dump_json(model_to_dict(member, schema), os.path.join(os.path.dirname(path), ref))
            refs.append(ref)
        doc = {
            "format_version": FORMAT_VERSION,
            "model_kind": "ensemble",
            "schema": list(schema),
            "hyperparameters": {"mode": model.mode, "names": model.names},
            "parameters": {
                "members": refs,
                "weights": list(model.weights),
                "mode": model.mode,
                "search_log": model.search_log,
            },
        }
        dump_json(doc, path)
    else:
        dump_json(model_to_dict(model, schema), path)


def load_model(path):
    d = read_json(path)
    _check_header(d, path)
    if d.get("model_kind") != "ensemble":
        return model_from_dict(d, path)
    p = d["parameters"]
    base = os.path.dirname(path)
    members = [model_from_dict(read_json(os.path.join(base, ref)), ref) for ref in p["members"]]
    return EnsembleModel(
        members, p["weights"], mode=p["mode"], names=d["hyperparameters"].get("names"),
        search_log=p.get("search_log"),
    )


class Pipeline:
    """Fitted preprocessing plan followed by a probability model.

    ``predict_proba`` takes raw canonical feature rows.
    """

    def __init__(self, plan, model, kind=None):
        self.plan = plan
        self.model = model
        self.kind = kind

    def transform(self, rows, schema=None):
        return transform(rows, self.plan, schema)

    def predict_proba(self, rows):
        return self.model.predict_proba(self.transform(rows))

    def predict(self, rows):
        if isinstance(self.model, RandomForest):
            return self.model.predict(self.transform(rows))
        return np.argmax(self.predict_proba(rows), axis=1)

    def save(self, directory, name="model"):
        os.makedirs(directory, exist_ok=True)
        plan_file = f"{name}.plan.json"
        self.plan.save(os.path.join(directory, plan_file))
        model_path = os.path.join(directory, f"{name}.json")
        save_model(self.model, model_path, self.plan.selected_names)
        # the pipeline needs to find its plan from the model file alone
        doc = read_json(model_path)
        doc["plan"] = plan_file
        doc["pipeline_kind"] = self.kind
        dump_json(doc, model_path)
        return model_path

    @classmethod
    def load(cls, model_path):
        doc = read_json(model_path)
        if "plan" not in doc:
            raise ConfigError(f"{model_path}: artifact has no preprocess plan reference")
        plan = PreprocessPlan.load(os.path.join(os.path.dirname(model_path), doc["plan"]))
        return cls(plan, load_model(model_path), doc.get("pipeline_kind"))
