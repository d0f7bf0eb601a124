"""``flowguard`` command line: generate, train, eval, explain, replay.

Every command writes one ``manifest.json`` into its output directory. The
manifest is the only file carrying wall time, so all other outputs are
byte-identical across reruns with the same inputs and seed.
"""

import argparse
import hashlib
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .artifacts import Pipeline, dump_json, read_json
from .errors import ConfigError, FlowguardError, TrainingError
from .explain import (
    MAX_EXACT_FEATURES, class_output, sample_background, shap_exact, shap_sampled,
)
from .flows import GROUP_NAMES, load_dataset, save_dataset
from .metrics import classification_report
from .ensemble import EnsembleModel
from .models import BoostedTrees, MlpModel
from .sentinel import RuleConfig, load_rule_config, read_events, replay, summarize, write_rule_config
from .synth import GENERATOR_VERSION, ScenarioSpec, gen_events, gen_flows, write_events
from .training import MODEL_KINDS, resolve_config, train

log = logging.getLogger("flowguard")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class RunManifest:
    """Provenance record for one command run."""

    def __init__(self, command, config=None, seed=None, inputs=()):
        self.command = command
        self.config = config or {}
        self.seed = seed
        self.inputs = {p: sha256_file(p) for p in inputs if p}
        self.artifacts = []
        self._t0 = time.perf_counter()

    def add(self, path):
        self.artifacts.append(path)
        return path

    def write(self, out_dir):
        doc = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "input_sha256": self.inputs,
            "artifacts": {
                os.path.relpath(p, out_dir): sha256_file(p) for p in self.artifacts
            },
            "wall_time_s": round(time.perf_counter() - self._t0, 3),
            "version": __version__,
        }
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _emit(args, summary, lines):
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        for line in lines:
            print(line)


def _write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


# -- generate ------------------------------------------------------------------

def cmd_generate(args):
    spec_doc = read_json(args.spec)
    if args.seed is not None:
        spec_doc = {**spec_doc, "seed": args.seed} if isinstance(spec_doc, dict) else spec_doc
    spec = ScenarioSpec.from_dict(spec_doc)
    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest("generate", spec.to_dict(), spec.seed, [args.spec])
    manifest.config["generator_version"] = GENERATOR_VERSION
    summary = {"seed": spec.seed, "scenario": spec.scenario.value}
    if any(spec.n_per_class.values()):
        ds = gen_flows(spec)
        save_dataset(ds, manifest.add(os.path.join(args.out, "dataset.csv")))
        summary["dataset_rows"] = ds.n
    events = gen_events(spec)
    write_events(events, manifest.add(os.path.join(args.out, "events.jsonl")))
    summary["events"] = len(events)
    manifest.write(args.out)
    lines = [f"scenario {spec.scenario.value}, seed {spec.seed}"]
    if "dataset_rows" in summary:
        lines.append(f"wrote {summary['dataset_rows']} flow rows to {args.out}/dataset.csv")
    lines.append(f"wrote {len(events)} events to {args.out}/events.jsonl")
    _emit(args, summary, lines)
    return 0


# -- train ---------------------------------------------------------------------

def _train_config(args):
    config = read_json(args.config) if args.config else {}
    if not isinstance(config, dict):
        raise ConfigError("training config must be a JSON object")
    members = {k: dict(v) for k, v in config.get("members", {}).items()}
    for flag, member, key in (("t_trees", "rf", "t_trees"), ("rounds", "gbdt", "rounds"),
                              ("epochs", "mlp", "epochs")):
        value = getattr(args, flag)
        if value is not None:
            members.setdefault(member, {})[key] = value
    config = {**config, "members": members}
    if args.k_features is not None:
        config["k_features"] = args.k_features
    return resolve_config(config, args.seed)


def _loss_source(model):
    """(name, losses, initial) for the model's boosted trees or MLP, if any."""
    if isinstance(model, EnsembleModel):
        for name, member in zip(model.names, model.members):
            if isinstance(member, BoostedTrees):
                return name, member.train_loss, member.initial_loss
        return None
    if isinstance(model, BoostedTrees):
        return "gbdt", model.train_loss, model.initial_loss
    if isinstance(model, MlpModel):
        return "mlp", model.history.get("train_loss", []), None
    return None


def cmd_train(args):
    config = _train_config(args)
    ds = load_dataset(args.data)
    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest("train", {**config, "model_kind": args.model_kind}, config["seed"],
                           [args.data, args.config])
    try:
        result = train(ds, args.model_kind, config)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        raise TrainingError(f"training failed: {exc}") from None
    model_path = result.pipeline.save(args.out)
    manifest.add(model_path)
    manifest.add(os.path.join(args.out, "model.plan.json"))
    if isinstance(result.pipeline.model, EnsembleModel):
        for name in result.pipeline.model.names:
            manifest.add(os.path.join(args.out, f"model.{name}.json"))
    report = result.report_dict()
    dump_json(report, manifest.add(os.path.join(args.out, "report.json")))
    text = (f"validation ({result.split_sizes['val']} rows)\n{result.validation.to_text()}\n"
            f"test ({result.split_sizes['test']} rows)\n{result.test.to_text()}")
    _write_text(manifest.add(os.path.join(args.out, "report.txt")), text)
    if not args.no_figures:
        from .plotting import confusion_figure, loss_figure

        manifest.add(confusion_figure(
            result.validation.confusion, os.path.join(args.out, "confusion_validation.png"),
            title=f"{args.model_kind}: validation confusion"))
        source = _loss_source(result.pipeline.model)
        if source and len(source[1]):
            name, losses, initial = source
            manifest.add(loss_figure(losses, os.path.join(args.out, "loss_curve.png"), initial,
                                     title=f"{name} training loss"))
    manifest.write(args.out)
    summary = {
        "model_kind": args.model_kind,
        "macro_f1": result.validation.macro_f1,
        "accuracy": result.validation.accuracy,
        "test_macro_f1": result.test.macro_f1,
        "artifact": model_path,
    }
    lines = [
        f"trained {args.model_kind} on {result.split_sizes['train_balanced']} rows "
        f"({len(result.pipeline.plan.selected_names)} features)",
        f"validation accuracy {result.validation.accuracy:.4f}, macro-F1 {result.validation.macro_f1:.4f}",
        f"test macro-F1 {result.test.macro_f1:.4f}",
        f"artifact: {model_path}",
    ]
    if "ensemble" in report:
        w = ", ".join(f"{n}={x:.2f}" for n, x in zip(report["ensemble"]["members"], report["ensemble"]["weights"]))
        lines.insert(2, f"ensemble weights: {w}")
    _emit(args, summary, lines)
    return 0


# -- eval ----------------------------------------------------------------------

def _load_pipeline(path):
    if not os.path.isfile(path):
        raise ConfigError(f"model artifact not found: {path}")
    return Pipeline.load(path)


def cmd_eval(args):
    pipeline = _load_pipeline(args.model)
    ds = load_dataset(args.data)
    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest("eval", {"model_kind": pipeline.kind}, None, [args.model, args.data])
    report = classification_report(ds.labels, pipeline.predict(ds.rows))
    dump_json(report.to_dict(), manifest.add(os.path.join(args.out, "eval_report.json")))
    _write_text(manifest.add(os.path.join(args.out, "eval_report.txt")), report.to_text())
    if not args.no_figures:
        from .plotting import confusion_figure

        manifest.add(confusion_figure(report.confusion, os.path.join(args.out, "confusion.png"),
                                      title=f"{pipeline.kind or 'model'} on {os.path.basename(args.data)}"))
    manifest.write(args.out)
    summary = {"accuracy": report.accuracy, "macro_f1": report.macro_f1, "rows": ds.n}
    _emit(args, summary, [report.to_text().rstrip()])
    return 0


# -- explain -------------------------------------------------------------------

def cmd_explain(args):
    pipeline = _load_pipeline(args.model)
    ds = load_dataset(args.data)
    if not 0 <= args.row < ds.n:
        raise ConfigError(f"row index {args.row} outside dataset of {ds.n} rows")
    seed = 0 if args.seed is None else args.seed
    X = pipeline.transform(ds.rows, ds.schema)
    x = X[args.row]
    d = X.shape[1]
    method = args.method
    if method == "auto":
        method = "exact" if d <= MAX_EXACT_FEATURES else "sampled"
    cls = int(np.argmax(pipeline.model.predict_proba(x[None, :])[0])) if args.target is None \
        else _class_code(args.target)
    background = sample_background(X, size=args.background, seed=seed)
    f = class_output(pipeline.model, cls)
    names = pipeline.plan.selected_names
    config = {"row": args.row, "method": method, "class": GROUP_NAMES[cls],
              "background": int(background.shape[0]), "permutations": args.permutations}
    manifest = RunManifest("explain", config, seed, [args.model, args.data])
    if method == "exact":
        expl = shap_exact(f, x, background, class_explained=cls, feature_names=names)
    else:
        expl = shap_sampled(f, x, background, n_permutations=args.permutations, seed=seed,
                            class_explained=cls, feature_names=names)
    os.makedirs(args.out, exist_ok=True)
    doc = {**expl.to_dict(), "row_index": args.row, "tolerance": 1e-9}
    dump_json(doc, manifest.add(os.path.join(args.out, "explanation.json")))
    if not args.no_figures:
        from .plotting import attribution_figure

        manifest.add(attribution_figure(
            names, expl.phi, os.path.join(args.out, "attribution.png"),
            title=f"row {args.row}: P({GROUP_NAMES[cls]}) = {expl.fx:.3f}"))
    manifest.write(args.out)
    order = np.argsort(-np.abs(expl.phi), kind="stable")[:5]
    lines = [f"row {args.row}: class {GROUP_NAMES[cls]}, f(x)={expl.fx:.4f}, baseline={expl.baseline:.4f} ({method})"]
    lines += [f"  {names[i]:<20} {expl.phi[i]:+.4f}" for i in order]
    _emit(args, doc, lines)
    return 0


def _class_code(name):
    key = name.strip().upper()
    if key not in GROUP_NAMES:
        raise ConfigError(f"unknown class {name!r}; choose from {', '.join(GROUP_NAMES)}")
    return GROUP_NAMES.index(key)


# -- replay --------------------------------------------------------------------

def cmd_replay(args):
    config = load_rule_config(args.rules) if args.rules else RuleConfig()
    pipeline = _load_pipeline(args.model) if args.model else None
    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest("replay", config.to_dict(), None, [args.events, args.rules, args.model])
    sentinel = replay(read_events(args.events), config, pipeline, args.threshold)
    with open(manifest.add(os.path.join(args.out, "alerts.jsonl")), "w", encoding="utf-8") as fh:
        for alert in sentinel.alerts:
            fh.write(json.dumps(alert.to_dict(), sort_keys=True) + "\n")
    with open(manifest.add(os.path.join(args.out, "bans.jsonl")), "w", encoding="utf-8") as fh:
        for ban in sentinel.bans:
            fh.write(json.dumps(ban.to_dict(), sort_keys=True) + "\n")
    summary = summarize(sentinel)
    dump_json(summary, manifest.add(os.path.join(args.out, "summary.json")))
    write_rule_config(config, manifest.add(os.path.join(args.out, "rules.resolved.json")))
    manifest.write(args.out)
    lines = [f"{summary['events']} events, {summary['alerts']} alerts, {summary['bans']} bans, "
             f"{summary['suppressed_events']} suppressed"]
    lines += [f"  {rule}: {n}" for rule, n in summary["alerts_by_rule"].items()]
    _emit(args, summary, lines)
    return 0


# -- parser --------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for all randomness in the command")
    common.add_argument("--json", action="store_true", help="print a machine-readable summary")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="flowguard", description="Flow classification and intrusion rule replay.")
    parser.add_argument("--version", action="version", version=f"flowguard {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="synthesize a labelled flow dataset and event stream")
    p.add_argument("--spec", required=True, help="scenario spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common], help="fit a model and write its artifact and reports")
    p.add_argument("--data", required=True, help="flow dataset CSV")
    p.add_argument("--model-kind", required=True, choices=MODEL_KINDS, help="model family to fit")
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k-features", type=int, help="override the number of selected features")
    p.add_argument("--t-trees", type=int, help="override the random forest size")
    p.add_argument("--rounds", type=int, help="override the number of boosting rounds")
    p.add_argument("--epochs", type=int, help="override the MLP epoch limit")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="classification report for a saved model")
    p.add_argument("--model", required=True, help="model.json written by train")
    p.add_argument("--data", required=True, help="labelled flow dataset CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", parents=[common], help="Shapley attributions for one dataset row")
    p.add_argument("--model", required=True, help="model.json written by train")
    p.add_argument("--data", required=True, help="dataset holding the row; also the background source")
    p.add_argument("--row", type=int, required=True, help="zero-based row index in the dataset")
    p.add_argument("--method", choices=("exact", "sampled", "auto"), default="auto", help="exact enumeration, permutation sampling, or exact when d <= 12 (default)")
    p.add_argument("--permutations", type=int, default=200, help="permutations for the sampled method")
    p.add_argument("--background", type=int, default=100, help="background rows drawn from the dataset")
    p.add_argument("--target", help="class to explain (default: predicted class)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("replay", parents=[common], help="run an event stream through the rule engine")
    p.add_argument("--events", required=True, help="event JSON Lines file")
    p.add_argument("--rules", help="rule config JSON (defaults when omitted)")
    p.add_argument("--model", help="optional model.json for ML verdicts on flows")
    p.add_argument("--threshold", type=float, default=0.8, help="ML verdict probability needed to raise an alert (default 0.8)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except FlowguardError as exc:
        print(f"flowguard {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"flowguard {args.command}: file not found: {exc.filename}", file=sys.stderr)
        return ConfigError.exit_code
    except OSError as exc:
        print(f"flowguard {args.command}: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
