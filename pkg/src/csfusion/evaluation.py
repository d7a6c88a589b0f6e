"""Confusion matrix, per-class IoU and mIoU."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import ClassTable

UNDEFINED = "-"
POLICIES = ("penalize", "exclude")


@dataclass(frozen=True, eq=False)
class EvalReport:
    confusion: np.ndarray  # m x (m+1); last column counts ignore predictions
    per_class_iou: np.ndarray  # NaN where the class has no GT support
    miou: float
    coverage: float
    policy: str

    @property
    def scored_points(self) -> int:
        return int(self.confusion.sum())


def evaluate(pred, gt, ct: ClassTable, ignore_policy: str = "penalize") -> EvalReport:
    """Score per-point predictions against ground truth.

    GT points carrying the ignore id are never scored. Under ``penalize`` an
    ignore prediction on a valid GT point is a false negative for its GT class;
    under ``exclude`` such points are dropped. Classes without GT support have
    an undefined IoU and do not enter the mean.
    """
    if ignore_policy not in POLICIES:
        raise ValueError(f"unknown ignore policy {ignore_policy!r}")
    pred = np.asarray(pred, dtype=np.int64).ravel()
    gt = np.asarray(gt, dtype=np.int64).ravel()
    if pred.shape != gt.shape:
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(gt)} labels")
    m, ign = ct.m, ct.ignore_id
    if ((pred < 0) | (pred > ign)).any() or ((gt < 0) | (gt > ign)).any():
        raise ValueError("label out of range")
    valid = gt != ign
    pred, gt = pred[valid], gt[valid]
    coverage = float(np.mean(pred != ign)) if len(pred) else float("nan")
    if ignore_policy == "exclude":
        keep = pred != ign
        pred, gt = pred[keep], gt[keep]
    conf = np.bincount(gt * (m + 1) + pred, minlength=m * (m + 1)).reshape(m, m + 1)
    tp = np.diag(conf[:, :m]).astype(np.float64)
    support = conf.sum(axis=1)
    fp = conf[:, :m].sum(axis=0) - tp
    fn = support - tp
    denom = tp + fp + fn
    iou = np.full(m, np.nan)
    has = support > 0
    iou[has] = tp[has] / denom[has]
    miou = float(np.mean(iou[has])) if has.any() else float("nan")
    return EvalReport(conf, iou, miou, coverage, ignore_policy)


def _cell(x: float) -> str:
    return UNDEFINED if math.isnan(x) else f"{100.0 * x:.1f}"


def format_report(report: EvalReport, ct: ClassTable) -> str:
    """Two-line table: class names plus ``avg``, then IoU percentages."""
    head = list(ct.names) + ["avg"]
    vals = [_cell(x) for x in report.per_class_iou] + [_cell(report.miou)]
    widths = [max(len(h), len(v)) for h, v in zip(head, vals)]
    return (
        " | ".join(h.rjust(w) for h, w in zip(head, widths)) + "\n"
        + " | ".join(v.rjust(w) for v, w in zip(vals, widths)) + "\n"
    )


def parse_report(text: str) -> dict:
    """Inverse of :func:`format_report`: name -> percentage (None if undefined)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != 2:
        raise ValueError("expected a header line and a value line")
    head = [c.strip() for c in lines[0].split(" | ")]
    vals = [c.strip() for c in lines[1].split(" | ")]
    if len(head) != len(vals):
        raise ValueError("header and values differ in length")
    return {h: (None if v == UNDEFINED else float(v)) for h, v in zip(head, vals)}


def format_machine(report: EvalReport, ct: ClassTable) -> str:
    """One ``class=iou`` line per class, then ``miou=`` and ``coverage=``."""
    out = [f"{n}={'nan' if math.isnan(x) else repr(float(x))}" for n, x in zip(ct.names, report.per_class_iou)]
    out.append(f"miou={report.miou!r}")
    out.append(f"coverage={report.coverage!r}")
    return "\n".join(out) + "\n"
