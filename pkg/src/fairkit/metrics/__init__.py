"""Group-fairness and predictive-performance metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import (
    DegenerateLabels,
    InsufficientFolds,
    LengthMismatch,
    NoPositivesInGroup,
    UndefinedRate,
)
from .studentized import studentized_range_cdf, studentized_range_quantile

DEFAULT_BAND = 0.1


@dataclass(frozen=True)
class ConfusionCounts:
    tp: float = 0.0
    fp: float = 0.0
    tn: float = 0.0
    fn: float = 0.0

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)

    @property
    def tpr(self) -> float:
        if self.tp + self.fn <= 0:
            raise UndefinedRate("TPR needs at least one positive")
        return self.tp / (self.tp + self.fn)

    @property
    def fpr(self) -> float:
        if self.tn + self.fp <= 0:
            raise UndefinedRate("FPR needs at least one negative")
        return self.fp / (self.tn + self.fp)

    @property
    def tnr(self) -> float:
        return 1.0 - self.fpr

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def _weights(w, n):
    if w is None:
        return np.ones(n)
    w = np.asarray(w, dtype=np.float64)
    if len(w) != n:
        raise LengthMismatch("weights length differs from predictions")
    return w


def confusion_from_predictions(pred, y, w=None) -> ConfusionCounts:
    pred = np.asarray(pred).astype(bool)
    y = np.asarray(y).astype(bool)
    if len(pred) != len(y):
        raise LengthMismatch(f"{len(pred)} predictions for {len(y)} labels")
    w = _weights(w, len(y))
    return ConfusionCounts(float(w[pred & y].sum()), float(w[pred & ~y].sum()),
                           float(w[~pred & ~y].sum()), float(w[~pred & y].sum()))


def confusion_at_threshold(p, y, theta: float = 0.5, w=None) -> ConfusionCounts:
    """Weighted confusion counts; a sample is predicted positive iff ``p >= theta``."""
    p = np.asarray(p, dtype=np.float64)
    if len(p) != len(y):
        raise LengthMismatch(f"{len(p)} scores for {len(y)} labels")
    return confusion_from_predictions(p >= theta, y, w)


def group_labels(groups):
    return sorted(set(np.asarray(groups, dtype=object).tolist()), key=str)


def group_confusion(pred, y, groups, w=None) -> dict:
    groups = np.asarray(groups, dtype=object)
    w = _weights(w, len(y))
    pred, y = np.asarray(pred), np.asarray(y)
    return {g: confusion_from_predictions(pred[groups == g], y[groups == g], w[groups == g])
            for g in group_labels(groups)}


def group_tpr(p, y, groups, theta=0.5, w=None) -> dict:
    """TPR per group under the ``p >= theta`` rule, ``theta`` scalar or per group."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    groups = np.asarray(groups, dtype=object)
    if not (len(p) == len(y) == len(groups)):
        raise LengthMismatch("p, y and groups must have equal length")
    out = {}
    for g in group_labels(groups):
        mask = groups == g
        th = theta[g] if isinstance(theta, Mapping) else theta
        counts = confusion_at_threshold(p[mask], y[mask], th, None if w is None else np.asarray(w)[mask])
        if counts.tp + counts.fn <= 0:
            raise NoPositivesInGroup(g)
        out[g] = counts.tpr
    return out


def eod(tpr_unprivileged: float, tpr_privileged: float) -> float:
    return tpr_unprivileged - tpr_privileged


def gamma(tpr_a: float, tpr_b: float) -> float:
    """Discrimination level: absolute TPR difference."""
    return abs(tpr_a - tpr_b)


def balanced_accuracy(counts: ConfusionCounts) -> float:
    return 0.5 * (counts.tpr + counts.tnr)


def auc_roc(p, y, w=None) -> float:
    """Weighted Mann-Whitney AUC; tied positive/negative pairs earn half credit."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y).astype(bool)
    if len(p) != len(y):
        raise LengthMismatch("p and y must have equal length")
    w = _weights(w, len(y))
    wp = np.where(y, w, 0.0)
    wn = np.where(y, 0.0, w)
    if wp.sum() <= 0 or wn.sum() <= 0:
        raise DegenerateLabels("AUC needs positive and negative samples")
    uniq, inv = np.unique(p, return_inverse=True)
    pos_b = np.bincount(inv, weights=wp, minlength=len(uniq))
    neg_b = np.bincount(inv, weights=wn, minlength=len(uniq))
    neg_below = np.concatenate(([0.0], np.cumsum(neg_b)[:-1]))
    return float(pos_b @ (neg_below + 0.5 * neg_b) / (pos_b.sum() * neg_b.sum()))


# -- Tukey range test --------------------------------------------------------

@dataclass(frozen=True)
class TukeyResult:
    groups: tuple
    means: dict
    half_width: dict
    q: float
    df: int
    ms_within: float
    pairs: tuple  # (group_a, group_b, mean difference a - b, significant)

    def significant(self, a, b) -> bool:
        for g1, g2, _d, sig in self.pairs:
            if {g1, g2} == {a, b}:
                return sig
        raise KeyError((a, b))


def tukey_tpr_test(per_fold_tprs: Mapping, alpha: float = 0.05) -> TukeyResult:
    """Tukey HSD over groups (treatments) with folds as replicates.

    The displayed per-group half-width is ``q / 2 * sqrt(MS_within / k)`` so
    two displayed intervals fail to overlap exactly when the pair differs
    significantly (the pairwise criterion is ``|diff| > q * sqrt(MS_within / k)``).
    """
    groups = tuple(per_fold_tprs)
    if len(groups) < 2:
        raise InsufficientFolds("need at least two groups")
    data = [np.asarray(per_fold_tprs[g], dtype=np.float64) for g in groups]
    k = len(data[0])
    if k < 2 or any(len(d) != k for d in data):
        raise InsufficientFolds("every group needs the same number k >= 2 of fold values")
    if any(not np.all(np.isfinite(d)) for d in data):
        raise InsufficientFolds("fold values must be finite")
    m = len(groups)
    df = m * (k - 1)
    means = {g: float(d.mean()) for g, d in zip(groups, data)}
    ms = float(sum(((d - d.mean()) ** 2).sum() for d in data) / df)
    q = studentized_range_quantile(1.0 - alpha, m, float(df))
    se = math.sqrt(ms / k)
    crit = q * se
    pairs = []
    for i in range(m):
        for j in range(i + 1, m):
            diff = means[groups[i]] - means[groups[j]]
            pairs.append((groups[i], groups[j], diff, abs(diff) > crit))
    hw = 0.5 * crit
    return TukeyResult(groups, means, {g: hw for g in groups}, q, df, ms, tuple(pairs))


# -- summaries ---------------------------------------------------------------

@dataclass(frozen=True)
class FairnessSummary:
    eod: float
    gamma: float
    privileged: object
    unprivileged: object
    fair_flag: bool

    def to_dict(self):
        return {"eod": self.eod, "gamma": self.gamma, "privileged": self.privileged,
                "unprivileged": self.unprivileged, "fair": self.fair_flag}


def fairness_summary(tprs: Mapping, privileged, unprivileged, band: float = DEFAULT_BAND) -> FairnessSummary:
    """EOD between the named groups; gamma is the largest TPR gap across all groups."""
    e = eod(tprs[unprivileged], tprs[privileged])
    vals = list(tprs.values())
    return FairnessSummary(e, max(vals) - min(vals), privileged, unprivileged, bool(-band <= e <= band))


@dataclass
class GroupStats:
    counts: ConfusionCounts
    tpr: float
    fpr: float
    fold_tprs: list
    mean_tpr: float
    half_width: float | None

    def to_dict(self):
        return {"counts": self.counts.to_dict(), "tpr": self.tpr, "fpr": self.fpr,
                "fold_tprs": list(self.fold_tprs), "mean_tpr": self.mean_tpr,
                "half_width": self.half_width}


@dataclass
class GroupReport:
    attribute: str
    groups: dict            # group label -> GroupStats
    bacc: float
    auc: float
    sensitivity: float
    specificity: float
    significant_pairs: list

    def to_dict(self):
        return {"attribute": self.attribute,
                "groups": {str(g): s.to_dict() for g, s in self.groups.items()},
                "overall": {"bacc": self.bacc, "auc": self.auc, "sensitivity": self.sensitivity,
                            "specificity": self.specificity},
                "significant_pairs": [list(p) for p in self.significant_pairs]}


def _safe(fn, default=math.nan):
    try:
        return fn()
    except UndefinedRate:
        return default


def group_report(attribute, fold_preds, fold_probs, fold_y, fold_groups, alpha=0.05) -> GroupReport:
    """Pool per-fold test predictions into a report; per-fold TPRs feed the Tukey test."""
    labels = group_labels(np.concatenate(fold_groups))
    pooled = {g: ConfusionCounts() for g in labels}
    fold_tprs = {g: [] for g in labels}
    for pred, y, grp in zip(fold_preds, fold_y, fold_groups):
        per = group_confusion(pred, y, grp)
        for g in labels:
            c = per.get(g, ConfusionCounts())
            pooled[g] = pooled[g] + c
            fold_tprs[g].append(_safe(lambda: c.tpr))
    stats = {}
    tukey = None
    try:
        tukey = tukey_tpr_test(fold_tprs, alpha)
    except InsufficientFolds:
        pass
    for g in labels:
        c = pooled[g]
        stats[g] = GroupStats(c, _safe(lambda: c.tpr), _safe(lambda: c.fpr), fold_tprs[g],
                              float(np.mean(fold_tprs[g])),
                              tukey.half_width[g] if tukey else None)
    overall = sum(pooled.values(), ConfusionCounts())
    y_all = np.concatenate(fold_y)
    p_all = np.concatenate(fold_probs)
    try:
        auc = auc_roc(p_all, y_all)
    except DegenerateLabels:
        auc = math.nan
    pairs = [p for p in tukey.pairs] if tukey else []
    return GroupReport(attribute, stats, _safe(lambda: balanced_accuracy(overall)), auc,
                       _safe(lambda: overall.tpr), _safe(lambda: overall.tnr), pairs)


__all__ = [
    "ConfusionCounts", "FairnessSummary", "GroupReport", "GroupStats", "TukeyResult",
    "auc_roc", "balanced_accuracy", "confusion_at_threshold", "confusion_from_predictions",
    "eod", "fairness_summary", "gamma", "group_confusion", "group_report", "group_tpr",
    "studentized_range_cdf", "studentized_range_quantile", "tukey_tpr_test",
]
