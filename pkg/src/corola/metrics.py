"""Pixel-level detection metrics.

Undefined ratios (0/0) are reported as ``None`` and frames with an undefined
F-measure are skipped when averaging.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)


def confusion(pred, gt, region=None) -> ConfusionCounts:
    pred = np.asarray(pred).ravel().astype(bool)
    gt = np.asarray(gt).ravel().astype(bool)
    if pred.shape != gt.shape:
        raise DimensionError("prediction and ground truth differ in size")
    if region is not None:
        region = np.asarray(region).ravel().astype(bool)
        pred, gt = pred[region], gt[region]
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return ConfusionCounts(tp, fp, pred.size - tp - fp - fn, fn)


def precision_recall(c: ConfusionCounts):
    both_empty = c.tp + c.fp == 0 and c.tp + c.fn == 0
    if c.tp + c.fp:
        precision = c.tp / (c.tp + c.fp)
    else:
        precision = 1.0 if both_empty else None
    if c.tp + c.fn:
        recall = c.tp / (c.tp + c.fn)
    else:
        recall = 1.0 if both_empty else None
    return precision, recall


def f_measure(precision, recall):
    if precision is None or recall is None:
        return None
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass
class FrameScore:
    counts: ConfusionCounts
    precision: float | None
    recall: float | None
    f: float | None


def score(pred, gt, region=None) -> FrameScore:
    c = confusion(pred, gt, region)
    p, r = precision_recall(c)
    return FrameScore(c, p, r, f_measure(p, r))


def mean_defined(values) -> float:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else float("nan")
