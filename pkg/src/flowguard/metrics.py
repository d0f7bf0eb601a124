"""Per-class precision/recall/F1, averages and confusion matrices."""

from dataclasses import dataclass

import numpy as np

from .errors import BadCode, LengthMismatch
from .flows import GROUP_NAMES, N_CLASSES


def _check(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"{y_true.shape[0]} true labels vs {y_pred.shape[0]} predictions")
    for arr in (y_true, y_pred):
        if arr.size and (arr.min() < 0 or arr.max() >= N_CLASSES):
            raise BadCode("class codes must lie in 0..6")
    return y_true, y_pred


def confusion_matrix(y_true, y_pred):
    """7x7 counts, rows = true class, columns = predicted class."""
    y_true, y_pred = _check(y_true, y_pred)
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _ratio(num, den):
    return num / den if den > 0 else 0.0


@dataclass(frozen=True)
class ClassificationReport:
    per_class: dict
    accuracy: float
    macro_avg: dict
    weighted_avg: dict
    confusion: np.ndarray
    zero_division: tuple = ()

    @property
    def macro_f1(self):
        return self.macro_avg["f1"]

    def to_dict(self):
        return {
            "per_class": {GROUP_NAMES[c]: v for c, v in self.per_class.items()},
            "accuracy": self.accuracy,
            "macro_avg": self.macro_avg,
            "weighted_avg": self.weighted_avg,
            "confusion": self.confusion.tolist(),
            "zero_division": [GROUP_NAMES[c] for c in self.zero_division],
            "n": int(self.confusion.sum()),
        }

    def to_text(self, digits=2):
        """Aligned table: one row per class, then accuracy and averages."""
        w = max(len(n) for n in GROUP_NAMES + ("Weighted Avg",)) + 2
        fmt = f"{{:.{digits}f}}"
        head = f"{'Class':<{w}}{'Precision':>10}{'Recall':>10}{'F1-score':>10}{'Support':>10}"
        lines = [head, "-" * len(head)]
        for c in range(N_CLASSES):
            s = self.per_class[c]
            lines.append(
                f"{GROUP_NAMES[c]:<{w}}{fmt.format(s['precision']):>10}"
                f"{fmt.format(s['recall']):>10}{fmt.format(s['f1']):>10}{s['support']:>10d}"
            )
        n = int(self.confusion.sum())
        lines.append("-" * len(head))
        lines.append(f"{'Accuracy':<{w}}{'':>10}{'':>10}{fmt.format(self.accuracy):>10}{n:>10d}")
        for name, avg in (("Macro Avg", self.macro_avg), ("Weighted Avg", self.weighted_avg)):
            lines.append(
                f"{name:<{w}}{fmt.format(avg['precision']):>10}{fmt.format(avg['recall']):>10}"
                f"{fmt.format(avg['f1']):>10}{n:>10d}"
            )
        return "\n".join(lines) + "\n"


def classification_report(y_true, y_pred):
    """Scores for all 7 classes; a zero denominator scores 0 and the class is
    listed in ``zero_division``. Macro averages over all 7 classes."""
    cm = confusion_matrix(y_true, y_pred)
    n = int(cm.sum())
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    per_class, flagged = {}, []
    for c in range(N_CLASSES):
        p = _ratio(tp[c], predicted[c])
        r = _ratio(tp[c], support[c])
        f = _ratio(2 * p * r, p + r)
        if predicted[c] == 0 or support[c] == 0:
            flagged.append(c)
        per_class[c] = {"precision": p, "recall": r, "f1": f, "support": int(support[c])}
    keys = ("precision", "recall", "f1")
    macro = {k: float(np.mean([per_class[c][k] for c in range(N_CLASSES)])) for k in keys}
    weighted = {
        k: _ratio(sum(per_class[c][k] * support[c] for c in range(N_CLASSES)), n) for k in keys
    }
    return ClassificationReport(
        per_class=per_class,
        accuracy=_ratio(float(tp.sum()), n),
        macro_avg=macro,
        weighted_avg={k: float(v) for k, v in weighted.items()},
        confusion=cm,
        zero_division=tuple(flagged),
    )


def macro_f1(y_true, y_pred):
    return classification_report(y_true, y_pred).macro_f1
