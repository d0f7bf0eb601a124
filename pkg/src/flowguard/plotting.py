"""Report figures written to PNG files next to the JSON/text outputs.

Figures are built on ``matplotlib.figure.Figure`` with the Agg canvas, so
no pyplot global state is touched and nothing needs a display.
"""

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .flows import GROUP_NAMES

# drop the Software tag so the PNG bytes do not depend on the matplotlib version
_PNG_METADATA = {"Software": None}


def _save(fig, path):
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=100, metadata=_PNG_METADATA)
    return path


def confusion_figure(confusion, path, labels=GROUP_NAMES, title="Confusion matrix"):
    """Heatmap of row-normalised counts, annotated with raw counts."""
    cm = np.asarray(confusion, dtype=np.int64)
    support = cm.sum(axis=1, keepdims=True)
    frac = np.divide(cm, support, out=np.zeros(cm.shape), where=support > 0)
    fig = Figure(figsize=(6.5, 5.5))
    ax = fig.add_subplot(1, 1, 1)
    im = ax.imshow(frac, cmap="Blues", vmin=0.0, vmax=1.0)
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04, label="fraction of true class")
    ticks = np.arange(len(labels))
    ax.set_xticks(ticks)
    ax.set_yticks(ticks)
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_yticklabels(labels, fontsize=8)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            if cm[i, j]:
                color = "white" if frac[i, j] > 0.5 else "black"
                ax.text(j, i, str(cm[i, j]), ha="center", va="center", fontsize=7, color=color)
    fig.tight_layout()
    return _save(fig, path)


def attribution_figure(names, phi, path, title="Feature attributions", top=15):
    """Horizontal bars for the ``top`` largest |phi|, positive and negative coloured apart."""
    phi = np.asarray(phi, dtype=np.float64)
    order = np.argsort(-np.abs(phi), kind="stable")[:top][::-1]
    fig = Figure(figsize=(6.0, 0.3 * len(order) + 1.5))
    ax = fig.add_subplot(1, 1, 1)
    colors = ["#c0392b" if phi[i] > 0 else "#2e86c1" for i in order]
    ax.barh(np.arange(len(order)), phi[order], color=colors)
    ax.set_yticks(np.arange(len(order)))
    ax.set_yticklabels([names[i] for i in order], fontsize=8)
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("contribution to class probability")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def loss_figure(losses, path, initial=None, title="Training loss"):
    """Per-round (or per-epoch) loss curve; ``initial`` is plotted at x=0."""
    y = np.asarray(losses, dtype=np.float64)
    x = np.arange(1, y.size + 1)
    if initial is not None:
        x = np.concatenate([[0], x])
        y = np.concatenate([[initial], y])
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.add_subplot(1, 1, 1)
    ax.plot(x, y, marker="." if y.size <= 60 else None, linewidth=1.2)
    ax.set_xlabel("round")
    ax.set_ylabel("log-loss")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)
