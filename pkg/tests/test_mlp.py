import numpy as np
import pytest

from flowguard.errors import BadHyperparameter, NonFiniteLoss
from flowguard.models import MlpModel, he_init, loss_and_grads, mlp_fit, mlp_predict

from conftest import blobs


def finite_difference_check(sizes, probes=20, h=1e-5, seed=0):
    """Max relative error between backprop and central differences."""
    rng = np.random.default_rng(seed)
    model = MlpModel(*he_init(sizes, rng))
    X = rng.normal(size=(6, sizes[0]))
    y = rng.integers(0, sizes[-1], 6)
    _, gw, gb = loss_and_grads(model, X, y)
    params = model.weights + model.biases
    grads = gw + gb
    worst = 0.0
    for _ in range(probes):
        i = int(rng.integers(len(params)))
        pos = tuple(int(rng.integers(s)) for s in params[i].shape)
        old = params[i][pos]
        params[i][pos] = old + h
        up = loss_and_grads(model, X, y)[0]
        params[i][pos] = old - h
        down = loss_and_grads(model, X, y)[0]
        params[i][pos] = old
        numeric = (up - down) / (2 * h)
        analytic = grads[i][pos]
        denom = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst


def test_gradients_match_finite_differences():
    assert finite_difference_check([4, 5, 3]) <= 1e-4
    assert finite_difference_check([3, 6, 4, 7], seed=3) <= 1e-4


def test_constant_label_converges():
    X = np.random.default_rng(0).normal(size=(60, 4))
    model = mlp_fit(X, np.full(60, 3), hidden=(8,), epochs=200, batch_size=16, learning_rate=1e-2, patience=200)
    assert mlp_predict(model, X)[:, 3].min() >= 0.99


def test_learns_blobs_and_is_deterministic():
    X, y = blobs(40, [[0, 0], [3, 0], [0, 3]], spread=0.5)
    a = mlp_fit(X, y, hidden=(16, 8), epochs=60, batch_size=16, learning_rate=5e-3, seed=1)
    b = mlp_fit(X, y, hidden=(16, 8), epochs=60, batch_size=16, learning_rate=5e-3, seed=1)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)
    assert np.mean(a.predict(X) == y) >= 0.95
    np.testing.assert_allclose(a.predict_proba(X).sum(axis=1), 1.0, atol=1e-9)
    assert a.history["epochs_run"] == len(a.history["val_loss"])


def test_zero_output_layer_is_uniform():
    model = MlpModel(*he_init([3, 4, 7], np.random.default_rng(0)))
    model.weights[-1][:] = 0.0
    model.biases[-1][:] = 0.0
    np.testing.assert_allclose(mlp_predict(model, np.ones(3)), np.full(7, 1 / 7))


def test_relu_ignores_negative_preactivations():
    W1 = np.array([[1.0, -1.0]])
    model = MlpModel([W1, np.eye(2, 7)], [np.zeros(2), np.zeros(7)])
    acts = model.forward(np.array([[2.0]]))
    np.testing.assert_array_equal(acts[1], [[2.0, 0.0]])


def test_errors():
    X = np.ones((4, 2))
    with pytest.raises(BadHyperparameter):
        mlp_fit(X, [0, 1, 0, 1], batch_size=10)
    with pytest.raises(NonFiniteLoss), np.errstate(all="ignore"):
        mlp_fit(X * 1e200, [0, 1, 0, 1], hidden=(4,), batch_size=2, learning_rate=1e300)


def test_serialization_round_trip():
    X, y = blobs(10, [[0, 0], [2, 2]])
    model = mlp_fit(X, y, hidden=(5,), epochs=3, batch_size=4)
    again = MlpModel.from_dict(model.to_dict(), model.hyperparameters)
    np.testing.assert_array_equal(again.predict_proba(X), model.predict_proba(X))
