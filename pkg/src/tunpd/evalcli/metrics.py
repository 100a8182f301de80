"""Confusion counts, derived scores and CSV reports."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInput, ShapeError

NAN = float("nan")
REPORT_COLUMNS = ("dataset", "method", "f1", "acc", "pre", "rec", "tp", "tn", "fp", "fn")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        for k in ("tp", "tn", "fp", "fn"):
            v = getattr(self, k)
            if int(v) != v or v < 0:
                raise InvalidInput(f"{k} must be a non-negative integer, got {v}")
            object.__setattr__(self, k, int(v))

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def as_tuple(self):
        return self.tp, self.tn, self.fp, self.fn


def confusion(preds, labels, mask=None) -> ConfusionCounts:
    """Counts over positions where ``mask`` is set; positive means significant."""
    p = np.asarray(preds, dtype=bool).ravel()
    y = np.asarray(labels, dtype=bool).ravel()
    m = np.ones(len(p), dtype=bool) if mask is None else np.asarray(mask, dtype=bool).ravel()
    if not (len(p) == len(y) == len(m)):
        raise ShapeError(f"confusion: preds {len(p)}, labels {len(y)}, mask {len(m)} differ in length")
    p, y = p[m], y[m]
    return ConfusionCounts(
        tp=int((p & y).sum()), tn=int((~p & ~y).sum()),
        fp=int((p & ~y).sum()), fn=int((~p & y).sum()),
    )


@dataclass
class MetricReport:
    f1: float
    accuracy: float
    precision: float
    recall: float
    counts: ConfusionCounts
    breakdown: dict = field(default_factory=dict)

    def rounded(self, places: int = 4):
        return tuple(round(v, places) if not math.isnan(v) else v
                     for v in (self.f1, self.accuracy, self.precision, self.recall))


def metrics(counts: ConfusionCounts) -> MetricReport:
    """Scores with NaN wherever a denominator vanishes.

    F1 is NaN when precision or recall is NaN, or when both are zero.
    """
    tp, tn, fp, fn = counts.as_tuple()
    pre = tp / (tp + fp) if tp + fp else NAN
    rec = tp / (tp + fn) if tp + fn else NAN
    acc = (tp + tn) / counts.total if counts.total else NAN
    if math.isnan(pre) or math.isnan(rec) or pre + rec == 0:
        f1 = NAN
    else:
        f1 = 2 * pre * rec / (pre + rec)
    return MetricReport(f1, acc, pre, rec, counts)


def pooled(per_sample) -> ConfusionCounts:
    total = ConfusionCounts()
    for c in per_sample:
        total = total + c
    return total


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def report_rows(dataset: str, method: str, report: MetricReport) -> list:
    c = report.counts
    return [dataset, method, report.f1, report.accuracy, report.precision, report.recall,
            c.tp, c.tn, c.fp, c.fn]


def write_report(rows, path=None) -> str:
    """CSV in the fixed column order; NaN is written as ``nan``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_report(text: str) -> list[dict]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        row = dict(r)
        for k in ("f1", "acc", "pre", "rec"):
            row[k] = float(row[k])
        for k in ("tp", "tn", "fp", "fn"):
            row[k] = int(row[k])
        out.append(row)
    return out
