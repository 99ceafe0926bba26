"""Threshold metrics, ROC analysis and paired AUC comparison.

Scores are probabilities of the positive class; a case is predicted
positive when its score is at or above the threshold. The ROC curve is
swept over thresholds from +inf down to -inf, one step per distinct
score, so ties produce diagonal segments. AUC is computed from midranks
(ties count half), which equals the trapezoidal area under that curve.

The partial AUC integrates the curve over a false-positive-rate band,
by default [0, 0.2] (specificity 0.8 to 1.0), interpolating at the band
edges and reporting the unnormalized area (at most the band width).

Two models scoring the same cases are compared with a paired test on the
difference of their AUCs: the variance is estimated from per-case
structural components and the difference is referred to a normal.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from collections.abc import Iterable, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .errors import ValidationError

ROC_HEADER = ["threshold", "one_minus_specificity", "sensitivity"]
SCORES_HEADER = ["drug_name", "code", "label", "score"]


def _split_scores(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise ValidationError("scores and labels must be 1-d and the same length")
    if not np.isin(labels, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1")
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValidationError("need at least one positive and one negative example")
    return pos, neg


def confusion(
    scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> tuple[int, int, int, int]:
    """(tp, tn, fp, fn) with positives predicted at score >= threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValidationError("scores and labels must have the same length")
    pred = scores >= threshold
    actual = labels == 1
    tp = int(np.sum(pred & actual))
    tn = int(np.sum(~pred & ~actual))
    fp = int(np.sum(pred & ~actual))
    fn = int(np.sum(~pred & actual))
    return tp, tn, fp, fn


@dataclass(frozen=True)
class RocCurve:
    """Operating points (one_minus_specificity, sensitivity) per threshold."""

    thresholds: tuple[float, ...]
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.thresholds) != len(self.points):
            raise ValidationError("thresholds and points must align")


def roc_curve(scores: Sequence[float], labels: Sequence[int]) -> RocCurve:
    """Sweep thresholds from +inf through each distinct score to -inf."""
    pos, neg = _split_scores(scores, labels)
    thresholds = [np.inf, *sorted(set(np.concatenate([pos, neg]).tolist()), reverse=True),
                  -np.inf]
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    m, n = len(pos), len(neg)
    points = []
    for t in thresholds:
        tp = m - int(np.searchsorted(pos_sorted, t, side="left"))
        fp = n - int(np.searchsorted(neg_sorted, t, side="left"))
        points.append((fp / n, tp / m))
    return RocCurve(thresholds=tuple(thresholds), points=tuple(points))


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a positive outscores a negative, ties counting half."""
    pos, neg = _split_scores(scores, labels)
    m, n = len(pos), len(neg)
    ranks = rankdata(np.concatenate([pos, neg]))
    return float((ranks[:m].sum() - m * (m + 1) / 2) / (m * n))


def partial_auc(
    scores: Sequence[float],
    labels: Sequence[int],
    fpr_low: float = 0.0,
    fpr_high: float = 0.2,
) -> float:
    """Unnormalized area under the ROC curve over an FPR band.

    The default band [0, 0.2] corresponds to specificity between 0.8 and
    1.0; a perfect classifier attains the band width. Band edges falling
    inside a curve segment are linearly interpolated.
    """
    if not 0.0 <= fpr_low < fpr_high <= 1.0:
        raise ValidationError("need 0 <= fpr_low < fpr_high <= 1")
    curve = roc_curve(scores, labels)
    area = 0.0
    for (x0, y0), (x1, y1) in zip(curve.points, curve.points[1:]):
        if x1 <= fpr_low or x0 >= fpr_high:
            continue
        xa, xb = max(x0, fpr_low), min(x1, fpr_high)
        if x1 > x0:
            slope = (y1 - y0) / (x1 - x0)
            ya = y0 + slope * (xa - x0)
            yb = y0 + slope * (xb - x0)
        else:
            ya, yb = y0, y1
        area += (xb - xa) * (ya + yb) / 2.0
    return float(area)


@dataclass(frozen=True)
class DelongResult:
    """Paired comparison of two models on the same cases."""

    auc_a: float
    auc_b: float
    z: float
    p_value: float


def delong_compare(
    scores_a: Sequence[float], scores_b: Sequence[float], labels: Sequence[int]
) -> DelongResult:
    """Two-sided paired test of AUC(a) = AUC(b) on shared cases.

    Identical scores give p = 1.0. A zero variance estimate with
    differing AUCs leaves no valid reference distribution and raises.
    Needs at least two positives and two negatives.
    """
    scores_a = np.asarray(scores_a, dtype=float)
    scores_b = np.asarray(scores_b, dtype=float)
    if scores_a.shape != scores_b.shape:
        raise ValidationError("paired score vectors must have the same length")
    labels = np.asarray(labels)
    pos_a, neg_a = _split_scores(scores_a, labels)
    pos_b, neg_b = _split_scores(scores_b, labels)
    m, n = len(pos_a), len(neg_a)
    if m < 2 or n < 2:
        raise ValidationError("paired AUC comparison needs two of each class")

    def components(pos, neg):
        psi = (pos[:, None] > neg[None, :]).astype(float)
        psi += 0.5 * (pos[:, None] == neg[None, :])
        return psi.mean(axis=1), psi.mean(axis=0), float(psi.mean())

    v10_a, v01_a, auc_a = components(pos_a, neg_a)
    v10_b, v01_b, auc_b = components(pos_b, neg_b)
    s10 = np.cov(np.stack([v10_a, v10_b]), ddof=1)
    s01 = np.cov(np.stack([v01_a, v01_b]), ddof=1)
    cov = s10 / m + s01 / n
    variance = float(cov[0, 0] + cov[1, 1] - 2.0 * cov[0, 1])
    if variance <= 0.0:
        if auc_a == auc_b:
            return DelongResult(auc_a=auc_a, auc_b=auc_b, z=0.0, p_value=1.0)
        raise ValidationError(
            "zero variance estimate with differing AUCs; the paired test is undefined"
        )
    z = (auc_a - auc_b) / np.sqrt(variance)
    return DelongResult(auc_a=auc_a, auc_b=auc_b, z=float(z),
                        p_value=float(2.0 * norm.sf(abs(z))))


@dataclass(frozen=True)
class EvaluationReport:
    """Threshold and ranking metrics for one scored validation set."""

    n_pos: int
    n_neg: int
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    sensitivity: float
    specificity: float
    auc: float
    partial_auc: float
    roc: RocCurve


def evaluate_scores(
    scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> EvaluationReport:
    """Full evaluation at one threshold plus threshold-free summaries."""
    pos, neg = _split_scores(scores, labels)
    tp, tn, fp, fn = confusion(scores, labels, threshold)
    return EvaluationReport(
        n_pos=len(pos),
        n_neg=len(neg),
        threshold=threshold,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        sensitivity=tp / (tp + fn),
        specificity=tn / (tn + fp),
        auc=auc(scores, labels),
        partial_auc=partial_auc(scores, labels),
        roc=roc_curve(scores, labels),
    )


def save_roc(curve: RocCurve, path: str | Path) -> None:
    """Write roc.csv; floats use repr so reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(ROC_HEADER)
        for t, (x, y) in zip(curve.thresholds, curve.points):
            writer.writerow([repr(float(t)), repr(float(x)), repr(float(y))])


def save_scores(
    rows: Iterable[tuple[str, str, int, float]], path: str | Path
) -> None:
    """Write scores.csv rows of (drug_name, code, label, score), sorted."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SCORES_HEADER)
        for drug, code, label, score in sorted(rows):
            writer.writerow([drug, code, str(label), repr(float(score))])
