import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowguard.errors import BadSpec
from flowguard.flows import AttackGroup
from flowguard.models import fit_tree
from flowguard.synth import (
    CENTROIDS, CLASS_CV, Scenario, ScenarioSpec, centroid_matrix, gen_events, gen_flows,
    parameter_table_markdown,
)

DOC = os.path.join(os.path.dirname(__file__), "..", "docs", "generator.md")


def all_classes(n, seed=0, noise=0.2):
    return ScenarioSpec(n_per_class={g.name: n for g in AttackGroup}, seed=seed, noise_level=noise)


def test_single_class_request():
    ds = gen_flows(ScenarioSpec(n_per_class={"DOS": 100}))
    assert ds.n == 100 and ds.class_counts == {AttackGroup.DOS: 100}


def test_noise_zero_reproduces_table():
    ds = gen_flows(all_classes(3, noise=0.0))
    cm = centroid_matrix()
    for row, label in zip(ds.rows, ds.labels):
        np.testing.assert_array_equal(row, cm[label])


def test_same_seed_same_bytes():
    a, b = gen_flows(all_classes(20, seed=4)), gen_flows(all_classes(20, seed=4))
    assert a.rows.tobytes() == b.rows.tobytes() and np.array_equal(a.labels, b.labels)
    assert gen_flows(all_classes(20, seed=5)) != a


def test_documented_table_matches_code():
    with open(DOC, encoding="utf-8") as fh:
        assert parameter_table_markdown() in fh.read()


@pytest.mark.parametrize("noise", [0.0, 0.1, 0.2, 0.3])
def test_depth3_tree_separates_classes(noise):
    for seed in range(3):
        train = gen_flows(all_classes(100, seed=seed, noise=noise))
        tree = fit_tree(train.rows, train.labels, max_depth=3)
        assert np.mean(tree.predict(train.rows) == train.labels) >= 0.9


def test_class_means_near_centroids():
    ds = gen_flows(all_classes(400, seed=7, noise=0.2))
    s = 0.2 * CLASS_CV
    rel_sd = np.sqrt(np.exp(s * s) - 1)  # lognormal sd relative to the mean
    for g in AttackGroup:
        c = np.asarray(CENTROIDS[g])
        rows = ds.rows[ds.labels == g]
        for j in range(c.size):
            if j in (5, 6) or c[j] == 0:
                continue  # min/max are clamped around the mean
            # volume features carry a second factor, so allow twice the spread
            sd = 2 * rel_sd * c[j] / np.sqrt(rows.shape[0])
            assert abs(rows[:, j].mean() - c[j]) <= 3 * sd, (g.name, j)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 1))
def test_rows_are_valid_flows(seed, noise):
    ds = gen_flows(all_classes(5, seed=seed, noise=noise))
    assert np.all(ds.rows >= 0)
    assert np.all(ds.rows[:, 5] <= ds.rows[:, 7]) and np.all(ds.rows[:, 7] <= ds.rows[:, 6])


@pytest.mark.parametrize("scenario", list(Scenario))
def test_event_timestamps_strictly_increase(scenario):
    events = gen_events(ScenarioSpec(scenario=scenario, seed=3))
    times = [e.timestamp for e in events]
    assert all(b > a for a, b in zip(times, times[1:]))


def test_spec_validation():
    with pytest.raises(BadSpec):
        ScenarioSpec(scenario="Tsunami")
    with pytest.raises(BadSpec):
        ScenarioSpec(n_per_class={"DOS": -1})
    with pytest.raises(BadSpec):
        ScenarioSpec(n_per_class={"WORM": 1})
    with pytest.raises(BadSpec):
        ScenarioSpec(noise_level=1.5)
    with pytest.raises(BadSpec):
        ScenarioSpec.from_dict({"scenario": "Benign", "colour": "red"})
    with pytest.raises(BadSpec):
        gen_flows(ScenarioSpec(n_per_class={"DOS": 0}))
    spec = all_classes(2, seed=3)
    assert ScenarioSpec.from_dict(spec.to_dict()) == spec
