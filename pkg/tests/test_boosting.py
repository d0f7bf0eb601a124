import numpy as np
import pytest

from flowguard.errors import BadHyperparameter
from flowguard.models import BoostedTrees, gbdt_fit, gbdt_predict
from flowguard.models.boosting import log_loss, softmax

from conftest import blobs


def nearest_centroid_accuracy(X, y, Xt, yt):
    cents = np.array([X[y == c].mean(axis=0) for c in np.unique(y)])
    pred = np.argmin(((Xt[:, None, :] - cents[None]) ** 2).sum(axis=2), axis=1)
    return float(np.mean(np.unique(y)[pred] == yt))


def test_zero_rounds_rejected():
    with pytest.raises(BadHyperparameter):
        gbdt_fit(np.zeros((4, 2)), [0, 1, 0, 1], rounds=0)


def test_uniform_base_scores_give_uniform_probs():
    model = BoostedTrees([], np.zeros(7), 0.1, 2)
    np.testing.assert_allclose(gbdt_predict(model, np.zeros(2)), np.full(7, 1 / 7))


def test_separable_two_class_reaches_high_accuracy():
    X, y = blobs(100, [[0, 0], [3, 3]], spread=0.6, seed=2)
    Xt, yt = blobs(100, [[0, 0], [3, 3]], spread=0.6, seed=3)
    assert nearest_centroid_accuracy(X, y, Xt, yt) >= 0.95  # the data really is separable
    model = gbdt_fit(X, y, rounds=50, learning_rate=0.1, min_samples_leaf=5)
    assert np.mean(model.predict(X) == y) >= 0.95


def test_round_adds_eta_times_leaf_values():
    X, y = blobs(30, [[0, 0], [2, 2], [0, 2]], spread=0.5)
    model = gbdt_fit(X, y, rounds=3, learning_rate=0.2, min_samples_leaf=5)
    before = model.predict_margin(X, n_rounds=2)
    after = model.predict_margin(X, n_rounds=3)
    leaf = np.column_stack([t.predict_value(X)[:, 0] for t in model.rounds[2]])
    np.testing.assert_allclose(after - before, 0.2 * leaf, atol=1e-12)


def test_loss_record_matches_recomputation_and_decreases():
    X, y = blobs(40, [[0, 0], [1, 1], [0, 1], [1, 0]], spread=0.4, seed=7)
    model = gbdt_fit(X, y, rounds=20, min_samples_leaf=5)
    for r in (1, 10, 20):
        assert model.train_loss[r - 1] == pytest.approx(log_loss(y, model.predict_margin(X, r)), abs=1e-9)
    losses = [model.initial_loss] + model.train_loss
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))
    assert len(model.regularization) == 20 and all(o >= 0 for o in model.regularization)


def test_probabilities_and_serialization():
    X, y = blobs(25, [[0, 0], [2, 2]], spread=0.5)
    model = gbdt_fit(X, y, rounds=5, min_samples_leaf=3)
    P = model.predict_proba(X)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)
    again = BoostedTrees.from_dict(model.to_dict(), model.hyperparameters)
    np.testing.assert_array_equal(again.predict_proba(X), P)
    assert softmax(np.array([[1000.0, 0.0]]))[0, 0] == 1.0


def test_leaf_wise_respects_leaf_and_depth_limits():
    X, y = blobs(60, [[0, 0], [1, 1], [0, 1], [1, 0], [2, 2]], spread=0.6)
    model = gbdt_fit(X, y, rounds=2, max_leaves=4, max_depth=3, min_samples_leaf=2)
    for trees in model.rounds:
        for t in trees:
            assert t.n_leaves <= 4 and t.depth <= 3
