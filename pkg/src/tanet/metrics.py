"""Short-term and long-term tracking metrics.

Short-term: precision rate over centre-error thresholds, success rate over
IoU thresholds, its AUC and the average overlap. Long-term: detection-style
precision/recall/F1 where a reported box counts as correct at IoU >= 0.5.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional, Sequence as Seq

import numpy as np

from .geometry import BoundingBox, center_distance, iou

log = logging.getLogger(__name__)

PR_THRESHOLDS = np.arange(0, 51, dtype=np.float64)  # pixels
SR_THRESHOLDS = np.round(np.arange(0, 21) * 0.05, 10)  # IoU
PR_REPORT_PX = 20
LT_IOU = 0.5

Box = Optional[BoundingBox]


class MetricError(ValueError):
    """A metric is undefined for the given input (e.g. no evaluable frame)."""


def _evaluable(preds: Seq[Box], gts: Seq[Box]) -> list[tuple[Box, BoundingBox]]:
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions for {len(gts)} ground-truth frames")
    pairs = [(p, g) for p, g in zip(preds, gts) if g is not None]
    if not pairs:
        raise MetricError("no frame with a ground-truth box to evaluate")
    return pairs


def overlaps(preds: Seq[Box], gts: Seq[Box]) -> np.ndarray:
    """IoU per evaluable frame; a missing prediction counts as 0."""
    return np.array([0.0 if p is None else iou(p, g) for p, g in _evaluable(preds, gts)])


def center_errors(preds: Seq[Box], gts: Seq[Box]) -> np.ndarray:
    """Centre distance per evaluable frame; a missing prediction counts as infinitely far."""
    return np.array([np.inf if p is None else center_distance(p, g) for p, g in _evaluable(preds, gts)])


def precision_rate(preds: Seq[Box], gts: Seq[Box], d: float = PR_REPORT_PX) -> float:
    """Fraction of evaluable frames with centre error <= ``d`` pixels."""
    return float(np.mean(center_errors(preds, gts) <= d))


def precision_curve(preds: Seq[Box], gts: Seq[Box], thresholds=PR_THRESHOLDS) -> np.ndarray:
    err = center_errors(preds, gts)
    return np.array([np.mean(err <= d) for d in thresholds])


@dataclass(frozen=True)
class SuccessSummary:
    curve: np.ndarray
    auc: float
    sr_050: float
    sr_075: float
    ao: float


def success_rate_curve(preds: Seq[Box], gts: Seq[Box], thresholds=SR_THRESHOLDS) -> SuccessSummary:
    """Success over IoU thresholds (strict ``IoU > t``); AUC is the mean of the curve."""
    ov = overlaps(preds, gts)
    curve = np.array([np.mean(ov > t) for t in thresholds])
    return SuccessSummary(curve, _mean(curve), float(np.mean(ov > 0.5)),
                          float(np.mean(ov > 0.75)), _mean(ov))


def _mean(values) -> float:
    # correctly rounded, so results do not depend on summation order
    values = list(values)
    return math.fsum(values) / len(values)


def _ratio(num: float, den: float, what: str) -> float:
    if den == 0:
        warnings.warn(f"{what} is 0/0, reported as 0", RuntimeWarning, stacklevel=3)
        return 0.0
    return num / den


def f1_score(precision: float, recall: float) -> float:
    s = precision + recall
    return 0.0 if s == 0 else 2.0 * precision * recall / s


def longterm_counts(preds: Seq[Box], gts: Seq[Box], iou_threshold: float = LT_IOU) -> tuple[int, int, int]:
    """``(TP, FP, FN)``; ``None`` in ``preds`` means no box was reported for that frame."""
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions for {len(gts)} ground-truth frames")
    tp = fp = fn = 0
    for p, g in zip(preds, gts):
        if p is None:
            fn += g is not None
        elif g is not None and iou(p, g) >= iou_threshold:
            tp += 1
        else:
            fp += 1
    return tp, fp, fn


def longterm_prf(preds: Seq[Box], gts: Seq[Box], iou_threshold: float = LT_IOU) -> tuple[float, float, float]:
    tp, fp, fn = longterm_counts(preds, gts, iou_threshold)
    p = _ratio(tp, tp + fp, "long-term precision")
    r = _ratio(tp, tp + fn, "long-term recall")
    return p, r, f1_score(p, r)


# ---------------------------------------------------------------- report

@dataclass(frozen=True)
class MetricReport:
    pr_curve: tuple[float, ...]
    sr_curve: tuple[float, ...]
    auc: float
    pr_at_20: float
    ao: float
    sr_050: float
    sr_075: float
    lt_precision: float
    lt_recall: float
    lt_f1: float
    num_sequences: int = 1
    num_frames: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pr_curve", tuple(float(v) for v in self.pr_curve))
        object.__setattr__(self, "sr_curve", tuple(float(v) for v in self.sr_curve))
        if len(self.pr_curve) != len(PR_THRESHOLDS) or len(self.sr_curve) != len(SR_THRESHOLDS):
            raise ValueError("curves must have 51 precision and 21 success points")
        for f in fields(self):
            v = getattr(self, f.name)
            vals = v if isinstance(v, tuple) else (v,)
            if f.name.startswith("num_"):
                continue
            if any(not 0.0 <= x <= 1.0 for x in vals):
                raise ValueError(f"{f.name} outside [0, 1]: {v}")

    def scalars(self) -> dict:
        return {k: v for k, v in asdict(self).items() if not k.endswith("_curve")}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pr_curve"], d["sr_curve"] = list(self.pr_curve), list(self.sr_curve)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(**d)


def evaluate(preds: Seq[Box], gts: Seq[Box]) -> MetricReport:
    """Report for one sequence; every non-``None`` prediction counts as reported."""
    sr = success_rate_curve(preds, gts)
    pr = precision_curve(preds, gts)
    p, r, f = longterm_prf(preds, gts)
    return MetricReport(tuple(pr), tuple(sr.curve), sr.auc, float(pr[PR_REPORT_PX]), sr.ao,
                        sr.sr_050, sr.sr_075, p, r, f, 1, len(preds))


def aggregate(reports: Iterable[MetricReport]) -> MetricReport:
    """Average per-sequence reports in the given order; F1 is recomputed from the averaged precision and recall."""
    reports = list(reports)
    if not reports:
        raise MetricError("no sequence reports to aggregate")
    if len(reports) == 1:
        return reports[0]
    mean = lambda name: float(np.mean([getattr(r, name) for r in reports]))
    curve = lambda name: tuple(np.mean([getattr(r, name) for r in reports], axis=0))
    p, r = mean("lt_precision"), mean("lt_recall")
    return MetricReport(curve("pr_curve"), curve("sr_curve"), mean("auc"), mean("pr_at_20"), mean("ao"),
                        mean("sr_050"), mean("sr_075"), p, r, f1_score(p, r),
                        sum(x.num_sequences for x in reports), sum(x.num_frames for x in reports))


# ---------------------------------------------------------------- re-acquisition

def absence_windows(gts: Seq[Box]) -> list[tuple[int, int]]:
    """Maximal runs ``[start, end)`` of frames without a ground-truth box."""
    runs, start = [], None
    for i, g in enumerate(gts):
        if g is None and start is None:
            start = i
        elif g is not None and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(gts)))
    return runs


def reacquired(preds: Seq[Box], gts: Seq[Box], within: int = 5, iou_threshold: float = 0.5,
               min_length: int = 1) -> Optional[bool]:
    """Whether every absence of at least ``min_length`` frames is followed by a hit.

    A hit is a frame among the first ``within`` frames after the absence with
    IoU >= ``iou_threshold``. Returns ``None`` if the sequence has no such absence.
    """
    windows = [(s, e) for s, e in absence_windows(gts) if e - s >= min_length and e < len(gts)]
    if not windows:
        return None
    for _, end in windows:
        hit = False
        for i in range(end, min(end + within, len(gts))):
            p, g = preds[i], gts[i]
            if p is not None and g is not None and iou(p, g) >= iou_threshold:
                hit = True
                break
        if not hit:
            return False
    return True


def reacquisition_rate(outcomes: Iterable[Optional[bool]]) -> float:
    vals = [o for o in outcomes if o is not None]
    if not vals:
        raise MetricError("no sequence contains an absence to recover from")
    return float(np.mean(vals))
