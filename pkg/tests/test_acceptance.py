"""Acceptance criteria, one test each.

Every test records its criterion name and the measured numbers; the
conftest hook prints a PASS/FAIL line per criterion after the run.
"""

import time
from collections import Counter

import numpy as np
import pytest

from flowguard.ensemble import search_weights, soft_vote, weighted_vote
from flowguard.explain import class_output, sample_background, shap_exact, shap_sampled
from flowguard.flows import AttackGroup, LabeledDataset
from flowguard.metrics import classification_report
from flowguard.models import fit_tree, gbdt_fit, rf_fit, rf_predict
from flowguard.preprocess import mutual_information, smote_oversample
from flowguard.sentinel import RuleConfig, Sentinel
from flowguard.synth import ScenarioSpec, gen_flows
from flowguard.training import train

from conftest import blobs
from oracles import ban_oracle, mi_bruteforce, portscan_oracle, report_bruteforce, synflood_oracle
from streams import auth_stream, flow_event, scan_stream, syn_stream, to_auth_events
from test_ensemble import one_member_correct
from test_metrics import Y_PRED, Y_TRUE
from test_mlp import finite_difference_check


@pytest.fixture
def criterion(record_property):
    """Register the criterion name; returns a function that logs a detail line."""

    def start(name):
        record_property("criterion", name)

        def detail(text):
            record_property("detail", text)
            print(f"[{name}] {text}")

        return detail

    return start


def test_voting_oracle_equivalence(criterion):
    log = criterion("voting oracle equivalence")
    rng = np.random.default_rng(2024)
    worst, mismatched, uniform_diff = 0.0, 0, 0
    cases = []
    for _ in range(1000):
        m = int(rng.integers(1, 5))
        raw = rng.gamma(1.0, size=(m, 7))
        cases.append((raw / raw.sum(axis=1, keepdims=True), rng.dirichlet(np.ones(m))))
    t0 = time.perf_counter()
    outputs = [weighted_vote(p, w) for p, w in cases]
    elapsed = time.perf_counter() - t0
    for (p, w), (cls, mix) in zip(cases, outputs):
        ref = [sum(float(w[k]) * float(p[k][c]) for k in range(len(w))) for c in range(7)]
        ref_cls = max(range(7), key=lambda c: (ref[c], -c))
        worst = max(worst, max(abs(a - b) for a, b in zip(mix, ref)))
        mismatched += int(cls != ref_cls)
        s_cls, s_mix = soft_vote(p)
        u_cls, u_mix = weighted_vote(p, np.full(len(w), 1.0 / len(w)))
        uniform_diff += int(s_mix.tobytes() != u_mix.tobytes() or s_cls != u_cls)
    log(f"max |diff| {worst:.2e}, class mismatches {mismatched}, uniform/soft differences {uniform_diff}, {elapsed:.3f}s")
    assert worst <= 1e-12 and mismatched == 0 and uniform_diff == 0
    assert elapsed < 1.0


def test_rf_majority_vote(criterion):
    log = criterion("RF majority vote")
    X, y = blobs(40, [[0, 0, 0], [1.5, 0, 0], [0, 1.5, 0], [0, 0, 1.5]], spread=0.9, seed=8)
    forest = rf_fit(X, y, t_trees=25, seed=5)
    queries = np.random.default_rng(6).uniform(-1, 2.5, size=(100, 3))
    disagree = 0
    for q in queries:
        tally = Counter(int(np.argmax(tree.predict_proba(q[None, :])[0])) for tree in forest.trees)
        top = max(tally.values())
        expected = min(c for c, v in tally.items() if v == top)
        disagree += int(rf_predict(forest, q)[0] != expected)
    log(f"{disagree} disagreements over 100 inputs, 25 trees")
    assert disagree == 0


def test_mi_oracle(criterion):
    log = criterion("MI oracle")
    rng = np.random.default_rng(11)
    y = rng.integers(0, 5, 200)
    X = rng.normal(size=(200, 6)) + np.outer(y, [0, 1.0, 0.2, 0, 2.0, 0.5])
    diffs = [abs(mutual_information(X[:, j], y, 10) - mi_bruteforce(X[:, j].tolist(), y.tolist(), 10)) for j in range(6)]
    log(f"max |diff| {max(diffs):.2e} over 6 features")
    assert max(diffs) <= 1e-9


def test_smote_properties(criterion):
    log = criterion("SMOTE properties")
    rng = np.random.default_rng(3)
    counts = [300, 40, 12, 5, 2, 90, 25]
    labels = np.repeat(np.arange(7), counts)
    ds = LabeledDataset(tuple("abcd"), rng.normal(size=(labels.size, 4)) + labels[:, None], labels)
    out, parents = smote_oversample(ds, k_neighbors=5, seed=17, return_parents=True)
    uniform = set(np.bincount(out.labels, minlength=7).tolist()) == {300}
    syn = out.rows[ds.n :]
    a, b = ds.rows[parents[:, 0]], ds.rows[parents[:, 1]]
    inside = np.all((syn >= np.minimum(a, b)) & (syn <= np.maximum(a, b)), axis=1)
    again = smote_oversample(ds, k_neighbors=5, seed=17)
    identical = again.rows.tobytes() == out.rows.tobytes() and np.array_equal(again.labels, out.labels)
    log(f"uniform counts {uniform}, {inside.mean():.1%} of {len(syn)} synthetic rows inside parent box, identical rerun {identical}")
    assert uniform and inside.all() and identical


def test_gbdt_training(criterion):
    log = criterion("GBDT training")
    counts = {g.name: 143 for g in AttackGroup}
    counts["OTHER"] = 142
    ds = gen_flows(ScenarioSpec(n_per_class=counts, seed=21, noise_level=0.4))
    assert ds.n == 1000
    model = gbdt_fit(ds.rows, ds.labels, rounds=100)
    losses = [model.initial_loss] + model.train_loss
    worst_rise = max(b - a for a, b in zip(losses, losses[1:]))
    X, y = blobs(100, [[0, 0], [3, 3]], spread=0.6, seed=2)
    two = gbdt_fit(X, y, rounds=100, min_samples_leaf=5)
    acc = float(np.mean(two.predict(X) == y))
    log(f"largest per-round loss increase {worst_rise:.2e} (loss {losses[0]:.3f} -> {losses[-1]:.4f}); 2-class accuracy {acc:.3f}")
    assert worst_rise <= 1e-9 and len(model.train_loss) == 100
    assert acc >= 0.95


def test_mlp_gradient_check(criterion):
    log = criterion("MLP gradient check")
    err = finite_difference_check([4, 5, 3], probes=20, h=1e-5, seed=123)
    log(f"max relative error {err:.2e} on a [4,5,3] net, 20 probes")
    assert err <= 1e-4


def test_shap(criterion):
    log = criterion("SHAP")
    rng = np.random.default_rng(9)
    X = rng.normal(size=(150, 10))
    y = (X[:, 0] + X[:, 3] > 0).astype(int) + 2 * (X[:, 7] > 0.5)
    tree = fit_tree(X, y, max_depth=6)
    bg = sample_background(X, size=30, seed=0)
    expl = shap_exact(class_output(tree, 1), X[0], bg, class_explained=1)
    gap = abs(expl.efficiency_gap)

    w = rng.normal(size=7)
    bg_lin = rng.normal(size=(40, 7))
    x = rng.normal(size=7)
    lin = shap_exact(lambda Z: Z @ w, x, bg_lin)
    lin_err = float(np.max(np.abs(lin.phi - w * (x - bg_lin.mean(axis=0)))))

    X8 = X[:, :8]
    tree8 = fit_tree(X8, y, max_depth=5)
    f8 = class_output(tree8, int(tree8.predict(X8[1:2])[0]))
    bg8 = sample_background(X8, size=25, seed=1)
    exact = shap_exact(f8, X8[1], bg8)
    sampled = shap_sampled(f8, X8[1], bg8, n_permutations=2000, seed=3)
    sample_err = float(np.max(np.abs(sampled.phi - exact.phi)))
    log(f"efficiency gap {gap:.1e} (d=10 tree); linear error {lin_err:.1e}; sampled vs exact {sample_err:.4f}")
    assert gap <= 1e-9 and lin_err <= 1e-9 and sample_err <= 0.05


def test_sentinel_exactness(criterion):
    log = criterion("sentinel exactness")
    rng = np.random.default_rng(77)
    ban_bad = fired = 0
    for _ in range(1000):
        cfg, stream = auth_stream(rng)
        s = Sentinel(cfg)
        for ev in to_auth_events(stream):
            s.ingest(ev)
        got = [(a.event_index, b.ip, b.expires_at) for a, b in zip(s.alerts, s.bans)]
        want = ban_oracle(stream, cfg.maxretry, cfg.findtime_s, cfg.bantime_s, cfg.ban_escalation_factor)
        ban_bad += int(got != want)
        fired += len(want)
    scan_bad = syn_bad = 0
    for _ in range(300):
        cfg, flows = scan_stream(rng)
        s = Sentinel(cfg)
        for i, (t, src, port) in enumerate(flows):
            s.ingest(flow_event(t, src, port, seq=i))
        scan_bad += int([a.event_index for a in s.alerts if a.rule == "PortScan"]
                        != portscan_oracle(flows, cfg.portscan_distinct_ports, cfg.portscan_window_s))
        cfg, flows = syn_stream(rng)
        s = Sentinel(cfg)
        for i, (t, syn) in enumerate(flows):
            s.ingest(flow_event(t, "7.7.7.7", 80, syn, seq=i))
        syn_bad += int([a.event_index for a in s.alerts if a.rule == "SynFlood"]
                       != synflood_oracle(flows, cfg.syn_rate_threshold_per_s, cfg.syn_window_s))
    log(f"ban mismatches {ban_bad}/1000 streams ({fired} bans), port-scan {scan_bad}/300, SYN flood {syn_bad}/300")
    assert ban_bad == 0 and scan_bad == 0 and syn_bad == 0 and fired > 0


def test_end_to_end_gate(criterion):
    log = criterion("end-to-end desk-scale gate")
    t0 = time.perf_counter()
    ds = gen_flows(ScenarioSpec(n_per_class={g.name: 2000 for g in AttackGroup}, seed=42, noise_level=0.2))
    result = train(ds, "ens_v2", {"seed": 42})
    elapsed = time.perf_counter() - t0
    members = {name: r["test"] for name, r in result.member_reports.items()}
    best = max(members.values())
    ens = result.test.macro_f1
    weights = {n: round(float(w), 2) for n, w in zip(result.pipeline.model.names, result.pipeline.model.weights)}
    log(f"ensemble test macro-F1 {ens:.4f}, members {', '.join(f'{k} {v:.4f}' for k, v in members.items())}, "
        f"weights {weights}, {elapsed:.0f}s")
    assert ens >= 0.85 and ens >= best - 0.02
    assert elapsed < 600


def test_weight_search_sanity(criterion):
    log = criterion("weight search sanity")
    found = []
    for good in range(3):
        probs, y = one_member_correct(good=good, seed=good)
        found.append(tuple(float(w) for w in search_weights(probs, y).weights))
    log(f"weights found {found}")
    assert found == [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]


def test_report_oracle(criterion):
    log = criterion("report oracle")
    rep = classification_report(Y_TRUE, Y_PRED)
    oracle = report_bruteforce(Y_TRUE, Y_PRED)
    worst = max(
        abs(rep.per_class[c][k] - oracle[c][i])
        for c in range(7)
        for i, k in enumerate(("precision", "recall", "f1"))
    )
    rows_ok = rep.confusion.sum(axis=1).tolist() == [rep.per_class[c]["support"] for c in range(7)]
    total = sum(rep.per_class[c]["support"] for c in range(7))
    log(f"max |diff| {worst:.1e}; row sums equal supports {rows_ok}; supports sum {total}")
    assert worst <= 1e-12 and rows_ok and total == len(Y_TRUE)
