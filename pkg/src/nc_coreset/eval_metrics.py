"""Detection metrics: ROC curve with AUC, EER-ROC, and two-class mAP.

EER here is the ROC-AUC based variant (EER-ROC = 1 - AUC of the grouped
threshold ROC polyline), not the DET-curve EER used by the ASVspoof
challenge tooling. The two behave identically at the anchors (perfect
separation -> 0, inverted scores -> 1) but differ in the third decimal on
mixed rankings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nc_coreset.embedding_io import Label, ScoreTable
from nc_coreset.errors import SingleClassOnly


@dataclass(frozen=True)
class RocCurve:
    """Polyline from (0,0) to (1,1); one vertex per distinct score, ties grouped."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def _split_scores(scores: ScoreTable, positive: Label) -> tuple[np.ndarray, np.ndarray]:
    pos = np.array([r.score for r in scores.rows if r.label is positive], dtype=np.float64)
    neg = np.array([r.score for r in scores.rows if r.label is not positive], dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise SingleClassOnly("need at least one sample of each class")
    return pos, neg


def roc_curve(scores: ScoreTable, positive: Label = Label.FAKE) -> RocCurve:
    """Sweep thresholds over distinct score values descending, ties grouped."""
    pos, neg = _split_scores(scores, positive)
    distinct = np.unique(np.concatenate([pos, neg]))[::-1]
    fpr = [0.0]
    tpr = [0.0]
    thresholds = [np.inf]
    tp = fp = 0
    for t in distinct:
        tp += int(np.count_nonzero(pos == t))
        fp += int(np.count_nonzero(neg == t))
        tpr.append(tp / pos.size)
        fpr.append(fp / neg.size)
        thresholds.append(float(t))
    fpr_arr = np.array(fpr)
    tpr_arr = np.array(tpr)
    auc = float(np.sum(np.diff(fpr_arr) * (tpr_arr[1:] + tpr_arr[:-1]) / 2.0))
    return RocCurve(fpr=fpr_arr, tpr=tpr_arr, thresholds=np.array(thresholds), auc=auc)


def eer_roc(scores: ScoreTable) -> float:
    """Equal error rate derived from the ROC curve: EER-ROC = 1 - AUC."""
    return 1.0 - roc_curve(scores).auc


def _average_precision(ranked_positive: np.ndarray) -> float:
    """AP over a ranking given a boolean positive mask in rank order."""
    n_pos = int(np.count_nonzero(ranked_positive))
    hits = 0
    ap = 0.0
    for rank, is_pos in enumerate(ranked_positive, start=1):
        if is_pos:
            hits += 1
            ap += hits / rank
    return ap / n_pos


def mean_average_precision(scores: ScoreTable) -> float:
    """Macro average of per-class AP.

    The fake class ranks by score descending, the real class by (1 - score)
    descending; equal scores rank by sample_id ascending.
    """
    _split_scores(scores, Label.FAKE)  # raises SingleClassOnly when one-sided
    rows = scores.rows

    fake_order = sorted(rows, key=lambda r: (-r.score, r.sample_id))
    ap_fake = _average_precision(np.array([r.label is Label.FAKE for r in fake_order]))

    real_order = sorted(rows, key=lambda r: (-(1.0 - r.score), r.sample_id))
    ap_real = _average_precision(np.array([r.label is Label.REAL for r in real_order]))

    return (ap_real + ap_fake) / 2.0
