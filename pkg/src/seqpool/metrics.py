"""Classification and ranking metrics.

Average precision is the mean of the precision at each positive's rank,
with examples sorted by descending score and ties broken by example
index; there is no interpolation. A class with no positives has no AP and
is left out of the mAP rather than counted as zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class MetricReport:
    classes: tuple[str, ...]
    n: int
    accuracy: float
    ap: dict  # class -> AP, classes without positives omitted
    map: float
    precision: float
    recall: float
    f1: float
    confusion: tuple[tuple[int, ...], ...]  # rows = true class, columns = predicted

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = list(self.classes)
        d["confusion"] = [list(r) for r in self.confusion]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def average_precision(scores: np.ndarray, positive: np.ndarray) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    if not positive.any():
        raise ValueError("average precision is undefined without positives")
    order = np.argsort(-scores, kind="stable")
    hits = positive[order]
    ranks = np.flatnonzero(hits) + 1
    precisions = np.arange(1, ranks.size + 1) / ranks
    # correctly rounded sum: the value does not depend on summation order
    return math.fsum(precisions) / precisions.size


def _label_indices(labels, classes: Sequence[str]) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    out = []
    for lab in labels:
        if isinstance(lab, (int, np.integer)):
            out.append(int(lab))
        else:
            if lab not in index:
                raise ValueError(f"label {lab!r} not among classes {list(classes)}")
            out.append(index[lab])
    return np.asarray(out, dtype=np.int64)


def compute_metrics(scores, labels, classes: Sequence[str] | None = None) -> MetricReport:
    """Metrics from an (examples x classes) score matrix and true labels.

    ``labels`` are class indices or class names (then ``classes`` gives the
    column order). Predictions are the per-row argmax, ties going to the
    first class. Precision and recall are macro-averaged over the classes
    that occur in ``labels``; f1 is their harmonic mean.
    """
    S = np.asarray(scores, dtype=np.float64)
    if S.ndim != 2:
        raise ValueError(f"scores must be examples x classes, got shape {S.shape}")
    n, K = S.shape
    if classes is None:
        classes = tuple(str(k) for k in range(K))
    classes = tuple(classes)
    if len(classes) != K:
        raise ValueError(f"{K} score columns but {len(classes)} classes")
    y = _label_indices(labels, classes)
    if y.shape != (n,):
        raise ValueError(f"{n} score rows but {y.shape[0]} labels")

    pred = np.argmax(S, axis=1) if n else np.zeros(0, dtype=np.int64)
    confusion = np.zeros((K, K), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)

    ap = {}
    for k, c in enumerate(classes):
        pos = y == k
        if pos.any():
            ap[c] = average_precision(S[:, k], pos)

    tp = np.diag(confusion).astype(np.float64)
    predicted = confusion.sum(axis=0)
    actual = confusion.sum(axis=1)
    prec = np.divide(tp, predicted, out=np.zeros(K), where=predicted > 0)
    rec = np.divide(tp, actual, out=np.zeros(K), where=actual > 0)
    present = actual > 0
    precision = float(prec[present].mean()) if present.any() else 0.0
    recall = float(rec[present].mean()) if present.any() else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricReport(
        classes=classes,
        n=int(n),
        accuracy=float(tp.sum() / n) if n else 0.0,
        ap=ap,
        map=float(np.mean(list(ap.values()))) if ap else float("nan"),
        precision=precision,
        recall=recall,
        f1=float(f1),
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
    )


def metric_value(report: MetricReport, name: str) -> float:
    if name == "acc":
        return report.accuracy
    if name == "map":
        return report.map
    if name == "f1":
        return report.f1
    raise ValueError(f"unknown metric {name!r}; choose from acc, map, f1")
