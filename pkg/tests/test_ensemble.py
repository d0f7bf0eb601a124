import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowguard.ensemble import (
    EnsembleModel, build_v1, build_v2, search_weights, simplex_grid, soft_vote, weighted_vote,
)
from flowguard.errors import BadDistribution, BadStep, BadWeights, ConfigError
from flowguard.metrics import macro_f1

from conftest import blobs


def dirichlet_rows(rng, m, c, n=None):
    shape = (m, c) if n is None else (m, n, c)
    raw = rng.gamma(1.0, size=shape)
    return raw / raw.sum(axis=-1, keepdims=True)


def test_soft_vote_example():
    cls, avg = soft_vote([[0.2, 0.8], [0.6, 0.4]])
    np.testing.assert_allclose(avg, [0.4, 0.6])
    assert cls == 1


def test_weighted_vote_example_and_degenerate_weights():
    cls, mix = weighted_vote([[0.9, 0.1], [0.1, 0.9]], [0.6, 0.4])
    np.testing.assert_allclose(mix, [0.58, 0.42], atol=1e-15)
    assert cls == 0
    p = np.array([[0.3, 0.7], [0.9, 0.1]])
    _, mix = weighted_vote(p, [1.0, 0.0])
    np.testing.assert_array_equal(mix, p[0])


def test_single_member_and_ties():
    cls, _ = soft_vote([[0.1, 0.6, 0.3]])
    assert cls == 1
    cls, _ = soft_vote([[0.5, 0.5], [0.5, 0.5]])
    assert cls == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_mix_is_a_distribution_and_uniform_matches_soft(m, c, seed):
    rng = np.random.default_rng(seed)
    probs = dirichlet_rows(rng, m, c, n=5)
    w = rng.dirichlet(np.ones(m))
    _, mix = weighted_vote(probs, w)
    assert np.all(mix >= 0)
    np.testing.assert_allclose(mix.sum(axis=-1), 1.0, atol=1e-12)
    s_cls, s_mix = soft_vote(probs)
    u_cls, u_mix = weighted_vote(probs, np.full(m, 1.0 / m))
    assert s_mix.tobytes() == u_mix.tobytes() and np.array_equal(s_cls, u_cls)


def test_input_validation():
    with pytest.raises(BadDistribution):
        soft_vote([[0.5, 0.6]])
    with pytest.raises(BadWeights):
        weighted_vote([[0.5, 0.5], [0.5, 0.5]], [0.7, 0.7])
    with pytest.raises(BadWeights):
        weighted_vote([[0.5, 0.5], [0.5, 0.5]], [1.0])


def test_simplex_grid_sizes_and_order():
    assert list(simplex_grid(2, 0.5)) == [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]
    grid = list(simplex_grid(3, 0.1))
    assert len(grid) == 66 and grid == sorted(grid)
    assert all(abs(sum(w) - 1) < 1e-12 for w in grid)
    with pytest.raises(BadStep):
        list(simplex_grid(3, 0.3))


def one_member_correct(n=40, m=3, good=1, seed=0):
    """Validation set on which only member ``good`` predicts correctly.

    The correct member wins by a 0.05 margin over a decoy class, while the
    others put all mass on that decoy. Any weight below 1 on the correct
    member (at step 0.1) therefore flips every prediction to the decoy, so
    the one-hot corner is the unique optimum.
    """
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 7, n)
    decoy = (y + 1) % 7
    rows = np.arange(n)
    probs = np.zeros((m, n, 7))
    for k in range(m):
        if k == good:
            probs[k] = 0.05 / 5
            probs[k, rows, y] = 0.50
            probs[k, rows, decoy] = 0.45
        else:
            probs[k, rows, decoy] = 1.0
    return probs, y


def test_search_puts_all_weight_on_the_only_correct_member():
    for good in range(3):
        probs, y = one_member_correct(good=good)
        assert np.array_equal(np.argmax(probs[good], axis=1), y)
        found = search_weights(probs, y)
        expect = [0.0, 0.0, 0.0]
        expect[good] = 1.0
        np.testing.assert_allclose(found.weights, expect)


def test_identical_members_tie_break_and_corners():
    rng = np.random.default_rng(1)
    p = dirichlet_rows(rng, 1, 7, n=30)[0]
    y = rng.integers(0, 7, 30)
    found = search_weights(np.stack([p, p, p]), y)
    assert tuple(found.weights) == (0.0, 0.0, 1.0)
    assert len(found.log) == 66


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_search_never_worse_than_a_corner(m, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 7, 25)
    y[:2] = [0, 1]
    probs = dirichlet_rows(rng, m, 7, n=25)
    found = search_weights(probs, y, step=0.25 if m == 4 else 0.1)
    for k in range(m):
        assert found.score >= macro_f1(y, np.argmax(probs[k], axis=1)) - 1e-12


def test_search_errors():
    probs, y = one_member_correct(m=3)
    with pytest.raises(ConfigError):
        search_weights(probs[:1], y)
    with pytest.raises(ConfigError):
        search_weights(probs, np.zeros_like(y))


SMALL = {"rf": {"t_trees": 5}, "gbdt": {"rounds": 5, "min_samples_leaf": 3}, "mlp": {"hidden": (8,), "epochs": 20, "batch_size": 16}}


def test_v1_is_soft_and_v2_weights_sum_to_one():
    X, y = blobs(30, [[0, 0], [2, 2], [0, 2]], spread=0.6)
    Xv, yv = blobs(15, [[0, 0], [2, 2], [0, 2]], spread=0.6, seed=9)
    v1 = build_v1(X, y, overrides=SMALL)
    assert v1.mode == "soft"
    np.testing.assert_allclose(v1.weights, 1 / 3)
    v2 = build_v2(X, y, Xv, yv, seed=4, overrides=SMALL)
    assert abs(sum(v2.weights) - 1) < 1e-12
    best_member = max(macro_f1(yv, np.argmax(p, axis=1)) for p in v2.member_probs(Xv))
    assert macro_f1(yv, v2.predict(Xv)) >= best_member - 1e-9
    again = build_v2(X, y, Xv, yv, seed=4, overrides=SMALL)
    np.testing.assert_array_equal(again.predict_proba(Xv), v2.predict_proba(Xv))


def test_ensemble_model_validation():
    with pytest.raises(ConfigError):
        EnsembleModel([], None)
    with pytest.raises(ConfigError):
        EnsembleModel([object()], [1.0], mode="median")
