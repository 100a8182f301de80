"""Pooled evaluation of a checkpoint or a baseline over a corpus split."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..baselines import run_baseline
from ..errors import InvalidInput
from ..features import top_persistence_order
from ..synth import derive_seed
from .metrics import ConfusionCounts, MetricReport, confusion, metrics, pooled

PER_SAMPLE_COLUMNS = ("id", "kind", "confounder", "n_valid", "tp", "tn", "fp", "fn")


@dataclass
class BaselineSpec:
    method: str = "2means"
    k: object = 1  # an int, or "beta1" to use the true loop count
    level: float = 0.5
    B: int = 100
    seed: int = 0

    @property
    def name(self) -> str:
        m = {"two_means": "2means", "confidence_set": "cs"}.get(self.method, self.method)
        if m == "topk":
            return f"topk(k={self.k})"
        if m == "cs":
            return f"cs({self.level:g})"
        return m


def truncated(sample, n_pd: int):
    """Diagram rows the model sees: the ``n_pd`` most persistent, in that order."""
    idx = top_persistence_order(sample.diagram)[:n_pd]
    return sample.diagram[idx], np.asarray(sample.labels, dtype=bool)[idx]


def baseline_predict(sample, spec: BaselineSpec, n_pd: int):
    d, y = truncated(sample, n_pd)
    k = sample.beta1 if spec.k == "beta1" else int(spec.k)
    res = run_baseline(spec.method, d, sample.cloud, k=k, level=spec.level, B=spec.B,
                       seed=derive_seed(spec.seed, f"{sample.id}/baseline"))
    return res.labels, y


@dataclass
class Evaluation:
    method: str
    report: MetricReport
    per_sample: list  # (id, kind, confounder, ConfusionCounts)

    def per_sample_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PER_SAMPLE_COLUMNS)
        for sid, kind, conf, c in self.per_sample:
            w.writerow([sid, kind, int(conf), c.total, c.tp, c.tn, c.fp, c.fn])
        return buf.getvalue()

    def rows(self, dataset: str = "all") -> list:
        """Report rows: the pooled total, then each shape kind and the confounder subset."""
        from .metrics import report_rows

        out = [report_rows(dataset, self.method, self.report)]
        for key in sorted(self.report.breakdown):
            out.append(report_rows(f"{dataset}/{key}", self.method, self.report.breakdown[key]))
        return out


def _assemble(method: str, samples, preds_and_labels) -> Evaluation:
    per = []
    groups: dict[str, list] = {}
    for s, (p, y) in zip(samples, preds_and_labels):
        c = confusion(p, y)
        kind = s.meta.get("shape_kind", "?")
        conf = bool(s.meta.get("confounder", False))
        per.append((s.id, kind, conf, c))
        groups.setdefault(kind, []).append(c)
        if conf:
            groups.setdefault("confounder", []).append(c)
    report = metrics(pooled(c for *_, c in per))
    report.breakdown = {k: metrics(pooled(v)) for k, v in groups.items()}
    return Evaluation(method, report, per)


def evaluate_baseline(spec: BaselineSpec, samples, n_pd: int = 32) -> Evaluation:
    if not samples:
        raise InvalidInput("evaluation split is empty")
    return _assemble(spec.name, samples, [baseline_predict(s, spec, n_pd) for s in samples])


def evaluate_model(model, samples, bundles=None, method: str = "tun") -> Evaluation:
    """Score a trained model; ``model`` may be a checkpoint path."""
    from ..tun import featurize, load_model, predict_batch

    if not samples:
        raise InvalidInput("evaluation split is empty")
    if not hasattr(model, "forward"):
        model, _ = load_model(model)
    if bundles is None:
        bundles = featurize(samples, model.cfg)
    preds = predict_batch(model, bundles)
    pairs = []
    for b, p in zip(bundles, preds):
        k = int(b.mask.sum())
        pairs.append((p[:k], b.labels[:k]))
    return _assemble(method, samples, pairs)


def micro_average(per_sample) -> MetricReport:
    return metrics(pooled(per_sample))


__all__ = [
    "BaselineSpec", "Evaluation", "evaluate_baseline", "evaluate_model", "truncated",
    "baseline_predict", "micro_average", "ConfusionCounts",
]
