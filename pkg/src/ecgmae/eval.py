"""Inter-patient evaluation: accuracy, confusion matrix and per-class metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .convnext1d import ClassifierHead, Encoder
from .errors import EmptyDataset, InvalidConfig, UnlabeledSegment
from .preprocess.segments import CLASSES, UNLABELED, SegmentDataset
from .train.loops import predict

N_CLASSES = len(CLASSES)
NA = "n/a"


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray  # rows = truth, cols = prediction
    precision: np.ndarray  # NaN where undefined
    recall: np.ndarray
    f1: np.ndarray
    n_samples: int
    n_correct: int

    @property
    def macro_precision(self) -> float:
        return _nanmean(self.precision)

    @property
    def macro_recall(self) -> float:
        return _nanmean(self.recall)

    @property
    def macro_f1(self) -> float:
        return _nanmean(self.f1)

    def summary(self) -> str:
        lines = [f"accuracy {format_percent(self.accuracy)} ({self.n_correct}/{self.n_samples})",
                 f"{'class':<6}{'support':>9}{'precision':>11}{'recall':>9}{'f1':>9}"]
        support = self.confusion.sum(axis=1)
        for i, name in enumerate(CLASSES):
            lines.append(f"{name:<6}{support[i]:>9d}{_fmt(self.precision[i]):>11}"
                         f"{_fmt(self.recall[i]):>9}{_fmt(self.f1[i]):>9}")
        lines.append(f"{'macro':<6}{'':>9}{_fmt(self.macro_precision):>11}"
                     f"{_fmt(self.macro_recall):>9}{_fmt(self.macro_f1):>9}")
        return "\n".join(lines)


def _nanmean(a: np.ndarray) -> float:
    a = a[~np.isnan(a)]
    return float(a.mean()) if a.size else math.nan


def _fmt(v: float) -> str:
    return NA if math.isnan(v) else f"{v:.4f}"


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.full(num.shape, np.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def format_percent(x: float) -> str:
    return NA if math.isnan(x) else f"{100.0 * x:.2f}%"


def metrics_from_predictions(truth, pred, n_classes: int = N_CLASSES) -> Metrics:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise InvalidConfig("truth and prediction lengths differ")
    if truth.size == 0:
        raise EmptyDataset("nothing to evaluate")
    if truth.min() < 0 or truth.max() >= n_classes:
        raise UnlabeledSegment("truth labels outside the class schema")
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (truth, pred), 1)
    tp = np.diag(conf).astype(np.float64)
    precision = _ratio(tp, conf.sum(axis=0).astype(np.float64))
    recall = _ratio(tp, conf.sum(axis=1).astype(np.float64))
    f1 = np.full(n_classes, np.nan)
    for i in range(n_classes):
        p, r = precision[i], recall[i]
        if not (math.isnan(p) or math.isnan(r)):
            f1[i] = 2 * p * r / (p + r) if p + r > 0 else 0.0
    # Second path: a plain streaming counter, independent of the confusion matrix.
    n_correct = 0
    for t, p in zip(truth.tolist(), pred.tolist()):
        n_correct += t == p
    return Metrics(accuracy=float(np.trace(conf)) / conf.sum(), confusion=conf, precision=precision,
                   recall=recall, f1=f1, n_samples=int(truth.size), n_correct=n_correct)


def evaluate(encoder: Encoder, head: ClassifierHead, data: SegmentDataset, batch_size: int = 256) -> Metrics:
    """Un-augmented, un-masked forward pass and argmax over the head logits."""
    if len(data) == 0:
        raise EmptyDataset("no segments to evaluate")
    if np.any(data.labels == UNLABELED):
        raise UnlabeledSegment("evaluation needs every segment labeled")
    pred = predict(encoder, head, data.samples, batch_size)
    return metrics_from_predictions(data.labels, pred, head.n_classes)


def compare_report(entries) -> tuple[str, str]:
    """Accuracy table for (name, Metrics or accuracy) pairs; returns (csv, text).

    Names of the form ``strategy/architecture`` are split into two columns.
    Rows are sorted by name so the output does not depend on input order.
    """
    rows = []
    for name, m in entries:
        acc = m.accuracy if isinstance(m, Metrics) else float(m)
        strategy, _, arch = str(name).partition("/")
        rows.append((str(name), strategy, arch, acc))
    if not rows:
        raise EmptyDataset("compare_report needs at least one entry")
    rows.sort(key=lambda r: r[0])

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "strategy", "architecture", "accuracy"])
    for name, strategy, arch, acc in rows:
        w.writerow([name, strategy, arch, "" if math.isnan(acc) else f"{acc:.4f}"])

    header = ("strategy", "architecture", "accuracy")
    cells = [(s, a, format_percent(acc)) for _, s, a, acc in rows]
    widths = [max(len(header[i]), *(len(c[i]) for c in cells)) for i in range(3)]
    lines = [f"{header[0]:<{widths[0]}}  {header[1]:<{widths[1]}}  {header[2]:>{widths[2]}}"]
    lines.append("  ".join("-" * wd for wd in widths))
    lines += [f"{s:<{widths[0]}}  {a:<{widths[1]}}  {p:>{widths[2]}}" for s, a, p in cells]
    return buf.getvalue(), "\n".join(lines) + "\n"


def confusion_csv(metrics: Metrics) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["truth\\pred", *CLASSES])
    for name, row in zip(CLASSES, metrics.confusion):
        w.writerow([name, *row.tolist()])
    return buf.getvalue()


def metrics_csv(metrics: Metrics) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "support", "precision", "recall", "f1"])
    support = metrics.confusion.sum(axis=1)
    for i, name in enumerate(CLASSES):
        w.writerow([name, int(support[i]), _fmt(metrics.precision[i]), _fmt(metrics.recall[i]),
                    _fmt(metrics.f1[i])])
    w.writerow(["accuracy", metrics.n_samples, "", f"{metrics.accuracy:.4f}", ""])
    return buf.getvalue()
