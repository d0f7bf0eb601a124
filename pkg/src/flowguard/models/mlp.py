"""Fully connected ReLU network with a softmax head, trained with Adam."""

import numpy as np

from ..errors import BadHyperparameter, DimensionMismatch, EmptyData, NonFiniteLoss
from ..flows import N_CLASSES
from .boosting import softmax


class MlpModel:
    def __init__(self, weights, biases, seed=0, hyperparameters=None, history=None):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.seed = seed
        self.hyperparameters = dict(hyperparameters or {})
        self.history = dict(history or {})
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise DimensionMismatch("layer dimensions do not chain")

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def forward(self, X):
        """Activations of every layer; the last entry is the logits."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.layer_sizes[0]:
            raise DimensionMismatch(f"expected {self.layer_sizes[0]} features, got {X.shape[1]}")
        acts = [X]
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ W + b
            acts.append(z if i == len(self.weights) - 1 else np.maximum(z, 0.0))
        return acts

    def predict_proba(self, X):
        return softmax(self.forward(X)[-1])

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self):
        return {
            "layer_sizes": self.layer_sizes,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "seed": self.seed,
            "history": self.history,
        }

    @classmethod
    def from_dict(cls, d, hyperparameters=None):
        return cls(d["weights"], d["biases"], d.get("seed", 0), hyperparameters, d.get("history"))


def he_init(layer_sizes, rng):
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def loss_and_grads(model, X, y):
    """Mean softmax cross-entropy and its gradients by backpropagation."""
    acts = model.forward(X)
    n = acts[0].shape[0]
    P = softmax(acts[-1])
    loss = -float(np.mean(np.log(np.maximum(P[np.arange(n), y], 1e-300))))
    delta = P
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gw, gb = [None] * len(model.weights), [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return loss, gw, gb


def mlp_fit(
    X,
    y,
    hidden=(256, 128, 64),
    epochs=50,
    batch_size=128,
    learning_rate=1e-3,
    seed=0,
    patience=5,
    X_val=None,
    y_val=None,
    val_fraction=0.1,
    beta1=0.9,
    beta2=0.999,
    eps=1e-8,
):
    """Mini-batch Adam on cross-entropy with early stopping.

    Stops once validation loss has not improved for ``patience`` epochs and
    restores the best weights. Without an explicit validation set a seeded
    ``val_fraction`` of the rows is held out (none when fewer than 20 rows,
    in which case training loss is monitored).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyData("MLP needs at least one row")
    if not 1 <= batch_size <= X.shape[0]:
        raise BadHyperparameter(f"batch_size must be in [1, n={X.shape[0]}], got {batch_size}")
    if epochs < 1 or learning_rate <= 0:
        raise BadHyperparameter("epochs >= 1 and learning_rate > 0 required")
    rng = np.random.default_rng(seed)
    sizes = [X.shape[1], *hidden, N_CLASSES]
    model = MlpModel(
        *he_init(sizes, rng), seed=seed,
        hyperparameters={
            "hidden": list(hidden), "epochs": epochs, "batch_size": batch_size,
            "learning_rate": learning_rate, "patience": patience, "seed": seed,
        },
    )
    if X_val is None and X.shape[0] >= 20 and val_fraction > 0:
        perm = rng.permutation(X.shape[0])
        n_val = max(1, int(round(val_fraction * X.shape[0])))
        X_val, y_val = X[perm[:n_val]], y[perm[:n_val]]
        X, y = X[perm[n_val:]], y[perm[n_val:]]
        batch_size = min(batch_size, X.shape[0])
    elif X_val is None:
        X_val, y_val = X, y
    params = model.weights + model.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0
    best = (np.inf, None)
    stale = 0
    train_hist, val_hist = [], []
    # divergence surfaces as NonFiniteLoss below, so overflow warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(epochs):
            perm = rng.permutation(X.shape[0])
            total = 0.0
            for start in range(0, X.shape[0], batch_size):
                idx = perm[start : start + batch_size]
                loss, gw, gb = loss_and_grads(model, X[idx], y[idx])
                if not np.isfinite(loss):
                    raise NonFiniteLoss(f"loss became {loss} at epoch {epoch}, step {step}")
                total += loss * idx.size
                step += 1
                for i, (p, g) in enumerate(zip(params, gw + gb)):
                    m[i] = beta1 * m[i] + (1 - beta1) * g
                    v[i] = beta2 * v[i] + (1 - beta2) * g * g
                    mhat = m[i] / (1 - beta1**step)
                    vhat = v[i] / (1 - beta2**step)
                    p -= learning_rate * mhat / (np.sqrt(vhat) + eps)
            train_hist.append(total / X.shape[0])
            val_loss = loss_and_grads(model, X_val, y_val)[0]
            if not np.isfinite(val_loss):
                raise NonFiniteLoss(f"validation loss became {val_loss} at epoch {epoch}")
            val_hist.append(val_loss)
            if val_loss < best[0] - 1e-12:
                best = (val_loss, [p.copy() for p in params])
                stale = 0
            else:
                stale += 1
                if stale >= patience:
                    break
    n_layers = len(model.weights)
    model.weights = best[1][:n_layers]
    model.biases = best[1][n_layers:]
    model.history = {"train_loss": train_hist, "val_loss": val_hist, "epochs_run": len(val_hist)}
    return model


def mlp_predict(model, x):
    probs = model.predict_proba(x)
    return probs[0] if np.ndim(x) == 1 else probs
