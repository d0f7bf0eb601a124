import numpy as np
import pytest

from flowguard.flows import CANONICAL_FEATURES, LabeledDataset
from flowguard.synth import ScenarioSpec, gen_flows


def blobs(n_per_class, centers, spread=0.3, seed=0):
    """Gaussian blobs, one per center; labels are the center indices."""
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    X = np.vstack([c + spread * rng.standard_normal((n_per_class, centers.shape[1])) for c in centers])
    y = np.repeat(np.arange(len(centers)), n_per_class)
    return X, y


@pytest.fixture
def small_flows():
    """Seven-class synthetic flow dataset, 40 rows per class."""
    spec = ScenarioSpec(n_per_class={g: 40 for g in range(7)}, seed=5, noise_level=0.2)
    return gen_flows(spec)


@pytest.fixture
def canonical_dataset():
    rng = np.random.default_rng(1)
    rows = rng.uniform(0, 100, size=(20, len(CANONICAL_FEATURES)))
    rows[:, 5] = 0.0  # pkt_len_min
    rows[:, 6] = 200.0  # pkt_len_max
    labels = np.array([0] * 10 + [1] * 6 + [4] * 4)
    return LabeledDataset(CANONICAL_FEATURES, rows, labels)


# -- acceptance summary ---------------------------------------------------------
# Tests in test_acceptance.py tag themselves with record_property("criterion",
# ...) and ("detail", ...). One PASS/FAIL line per criterion is printed at the
# end of the run, whatever the capture mode.

_acceptance = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _acceptance.append((report.outcome, props["criterion"], props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for outcome, name, detail in _acceptance:
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}" + (f"  ({detail})" if detail else ""))
