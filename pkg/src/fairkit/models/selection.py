"""Nested cross-validated hyper-parameter selection."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ..cohort import Cohort, FeatureEncoder, FoldPlan
from ..metrics import auc_roc, balanced_accuracy, confusion_at_threshold
from . import GBT, LOGISTIC, predict_proba, train
from .gbt import GbtConfig
from .logistic import LogisticConfig


def default_grid(kind: str) -> list:
    if kind == LOGISTIC:
        return [LogisticConfig(l2_strength=v) for v in (1e-3, 1e-1, 1e1)]
    if kind == GBT:
        return [GbtConfig(rounds=r, max_depth=d, learning_rate=lr)
                for r, d, lr in product((50, 200), (2, 4), (0.1, 0.3))]
    raise ValueError(f"unknown model kind {kind!r}")


def fit_on_rows(cohort: Cohort, rows, kind, cfg, weights=None):
    """Fit encoder and model on ``rows`` of ``cohort``. Returns ``(encoder, model)``."""
    rows = np.asarray(rows)
    encoder = FeatureEncoder.fit(cohort, rows)
    X = encoder.transform(cohort.take(rows))
    w = cohort.weights[rows] if weights is None else np.asarray(weights)[rows]
    return encoder, train(kind, X, cohort.outcome[rows], w, cfg)


def score(metric, p, y) -> float:
    if metric == "bacc":
        return balanced_accuracy(confusion_at_threshold(p, y, 0.5))
    if metric == "auc":
        return auc_roc(p, y)
    raise ValueError(f"unknown metric {metric!r}")


@dataclass(frozen=True, eq=False)
class SelectionResult:
    best_index: int
    config: object
    scores: np.ndarray      # mean inner validation score per grid entry
    oof: np.ndarray         # held-out inner predictions of the best config, per training row


def select_config(cohort: Cohort, inner: FoldPlan, kind, grid, metric="bacc",
                  weights=None) -> SelectionResult:
    """Pick the grid entry with the best mean inner-fold score; earliest wins ties.

    ``cohort`` is the outer-training portion and ``inner`` a plan over its rows.
    """
    if not grid:
        raise ValueError("empty hyper-parameter grid")
    y = cohort.outcome
    scores = np.zeros(len(grid))
    oofs = []
    for gi, cfg in enumerate(grid):
        oof = np.empty(cohort.n)
        fold_scores = []
        for _f, tr, va in inner.folds():
            enc, model = fit_on_rows(cohort, tr, kind, cfg, weights)
            p = predict_proba(model, enc.transform(cohort.take(va)))
            oof[va] = p
            fold_scores.append(score(metric, p, y[va]))
        scores[gi] = np.mean(fold_scores)
        oofs.append(oof)
    best = int(np.argmax(scores))
    return SelectionResult(best, grid[best], scores, oofs[best])


def grid_search(cohort: Cohort, kind, grid, folds, metric="bacc", weights=None) -> list:
    """Best config per outer fold of a nested plan (see ``cohort.nested_folds``)."""
    out = []
    for nf in folds:
        train_part = cohort.take(nf.train_rows)
        w = None if weights is None else np.asarray(weights)[nf.train_rows]
        out.append(select_config(train_part, nf.inner, kind, grid, metric, w).config)
    return out
