"""Metrics, reports, plots and the command line."""
from .evaluate import BaselineSpec, Evaluation, evaluate_baseline, evaluate_model, truncated
from .metrics import (
    REPORT_COLUMNS, ConfusionCounts, MetricReport, confusion, metrics, pooled, read_report,
    report_rows, write_report,
)
from .render import render_pd, render_svg

__all__ = [
    "ConfusionCounts", "MetricReport", "confusion", "metrics", "pooled", "write_report",
    "read_report", "report_rows", "REPORT_COLUMNS", "render_pd", "render_svg", "BaselineSpec",
    "Evaluation", "evaluate_baseline", "evaluate_model", "truncated",
]
