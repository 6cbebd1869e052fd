"""Segmentation overlap, area error and classification metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import (
    DimsMismatch,
    EmptyInput,
    NonPositiveGroundTruth,
    SingleClassInput,
)
from .volume import MaskSlice, MaskVolume


def _labels(mask) -> np.ndarray:
    if isinstance(mask, (MaskVolume, MaskSlice)):
        return mask.labels
    return np.asarray(mask)


def dice(a, b) -> float:
    """Dice coefficient 2|A n B| / (|A| + |B|); two empty masks score 1.0."""
    la, lb = _labels(a), _labels(b)
    if la.shape != lb.shape:
        raise DimsMismatch(f"shapes {la.shape} and {lb.shape} differ")
    la = la.astype(bool)
    lb = lb.astype(bool)
    total = int(la.sum()) + int(lb.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((la & lb).sum()) / total


def area_errors(gt_area_cm2: float, pred_area_cm2: float) -> tuple[float, float]:
    """Signed and absolute percent error of a predicted area.

    Signed error is (pred - gt) / gt * 100, so under-segmentation is
    negative. The reference area must be positive.
    """
    if not gt_area_cm2 > 0:
        raise NonPositiveGroundTruth(f"reference area must be positive, got {gt_area_cm2}")
    signed = (pred_area_cm2 - gt_area_cm2) / gt_area_cm2 * 100.0
    return signed, abs(signed)


@dataclass(frozen=True)
class ClassificationMetrics:
    """Binary confusion counts and derived rates; sarcopenic is positive.

    Rates that would divide by zero are None rather than 0 so that an
    undefined precision cannot be mistaken for a measured one.
    """

    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None


def confusion_metrics(pairs: list[tuple[bool, bool]]) -> ClassificationMetrics:
    """Metrics from (predicted, actual) label pairs."""
    if not pairs:
        raise EmptyInput("need at least one (predicted, actual) pair")
    tp = sum(1 for p, a in pairs if p and a)
    fp = sum(1 for p, a in pairs if p and not a)
    fn = sum(1 for p, a in pairs if not p and a)
    tn = sum(1 for p, a in pairs if not p and not a)
    accuracy = (tp + tn) / len(pairs)
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ClassificationMetrics(tp, fp, fn, tn, accuracy, precision, recall, f1)


def roc_auc(scores: list[float], labels: list[bool]) -> float:
    """Area under the ROC curve by pairwise comparison, ties counted 1/2.

    Equivalent to the Mann-Whitney U statistic normalised by the number
    of positive-negative pairs.
    """
    scores_arr = np.asarray(scores, dtype=np.float64)
    labels_arr = np.asarray(labels, dtype=bool)
    if scores_arr.shape != labels_arr.shape or scores_arr.ndim != 1:
        raise DimsMismatch("scores and labels must be equal-length 1-D sequences")
    n_pos = int(labels_arr.sum())
    n_neg = labels_arr.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("ROC needs both positive and negative labels")
    ranks = rankdata(scores_arr, method="average")
    pos_rank_sum = float(ranks[labels_arr].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class SummaryStats:
    """Population statistics (std divides by N, not N-1)."""

    mean: float
    std: float
    median: float
    min: float
    max: float
    n: int

    @classmethod
    def from_values(cls, values) -> "SummaryStats":
        arr = np.asarray(values, dtype=np.float64)
        if arr.size == 0:
            raise EmptyInput("need at least one value")
        return cls(
            mean=float(arr.mean()),
            std=float(arr.std()),
            median=float(np.median(arr)),
            min=float(arr.min()),
            max=float(arr.max()),
            n=int(arr.size),
        )


@dataclass(frozen=True)
class EvalRecord:
    """Per-scan evaluation outcome linking overlap, areas and labels."""

    scan_id: str
    gt_area_cm2: float
    pred_area_cm2: float
    dice: float
    signed_pct_error: float
    abs_pct_error: float
    sex: str | None = None
    gt_sarcopenic: bool | None = None
    pred_sarcopenic: bool | None = None

    @classmethod
    def build(
        cls,
        scan_id: str,
        gt_area_cm2: float,
        pred_area_cm2: float,
        dice_score: float,
        sex: str | None = None,
        gt_sarcopenic: bool | None = None,
        pred_sarcopenic: bool | None = None,
    ) -> "EvalRecord":
        signed, absolute = area_errors(gt_area_cm2, pred_area_cm2)
        return cls(
            scan_id=scan_id,
            gt_area_cm2=gt_area_cm2,
            pred_area_cm2=pred_area_cm2,
            dice=dice_score,
            signed_pct_error=signed,
            abs_pct_error=absolute,
            sex=sex,
            gt_sarcopenic=gt_sarcopenic,
            pred_sarcopenic=pred_sarcopenic,
        )


def summarize(records: list[EvalRecord]) -> dict[str, SummaryStats]:
    """SummaryStats for dice and both error columns over a batch."""
    if not records:
        raise EmptyInput("need at least one record")
    return {
        "dice": SummaryStats.from_values([r.dice for r in records]),
        "signed_pct_error": SummaryStats.from_values([r.signed_pct_error for r in records]),
        "abs_pct_error": SummaryStats.from_values([r.abs_pct_error for r in records]),
    }
