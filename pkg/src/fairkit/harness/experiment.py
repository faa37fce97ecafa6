"""Cross-validated base -> audit -> mitigate -> re-audit experiments."""

from __future__ import annotations

import datetime as _dt
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .. import __version__
from ..cohort import Cohort, child_seed, inner_plan, stratified_kfold
from ..errors import FairkitError, InsufficientFolds, UnknownGroup
from ..metrics import (
    ConfusionCounts,
    auc_roc,
    balanced_accuracy,
    confusion_at_threshold,
    fairness_summary,
    group_confusion,
    group_report,
)
from ..mitigation import (
    CPP,
    DIR,
    PSTA,
    RW,
    SUP,
    MitigationSpec,
    apply_thresholds,
    cpp_fit,
    dir_fit,
    psta_fit,
    reweighing_weights,
    suppress,
    unknown_group_rows,
)
from ..models import predict_proba
from ..models.selection import fit_on_rows, select_config
from .config import ExperimentConfig

BASE = "base"
BACC_TOLERANCE = 0.02
BEST_METHOD_RULE = (
    "debiased = method with the smallest |EOD| among those losing at most "
    f"{BACC_TOLERANCE} BAcc against base; if none qualifies, the smallest |EOD| overall"
)
FIXED_CLOCK = "1970-01-01T00:00:00Z"


# -- per-fold fitting ----------------------------------------------------------

@dataclass
class FittedCell:
    """What was learned from the training rows of one outer fold for one cell."""

    method: str
    encoder: object = None
    model: object = None
    selected: object = None
    transform: object = None      # DIR repair or SUP attribute
    weights: np.ndarray | None = None
    policy: object = None
    repaired_train: dict | None = None

    def artifacts(self) -> dict:
        """JSON-ready view of every fitted quantity (used for leakage checks and reports)."""
        out = {"method": self.method}
        if self.model is not None:
            out["model"] = self.model.to_dict()
            out["selected_config"] = vars(self.selected).copy()
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        if self.repaired_train is not None:
            out["repaired_train"] = {c: v.tolist() for c, v in self.repaired_train.items()}
        if self.policy is not None:
            out["policy"] = self.policy.to_dict()
        return out


def _select_and_fit(cohort: Cohort, inner, config: ExperimentConfig, weights=None):
    sel = select_config(cohort, inner, config.model, config.model_grid(), config.metric, weights)
    enc, model = fit_on_rows(cohort, np.arange(cohort.n), config.model, sel.config, weights)
    return sel, enc, model


def fit_fold(cohort: Cohort, train_rows, fold: int, config: ExperimentConfig,
             specs: list) -> dict:
    """Fit the base model and every mitigation using only ``train_rows``.

    Returns ``{(attribute or None, method): FittedCell}``; the base cell is
    keyed ``(None, "base")``.
    """
    train = cohort.take(train_rows)
    inner = inner_plan(train.outcome, config.k_inner, config.seed, fold)
    fitted = {}
    sel, enc, model = _select_and_fit(train, inner, config)
    fitted[(None, BASE)] = FittedCell(BASE, enc, model, sel.config)
    if config.postprocess_fit == "oof":
        post_scores = sel.oof
    else:
        post_scores = predict_proba(model, enc.transform(train))

    for spec in specs:
        key = (spec.protected, spec.method)
        try:
            fitted[key] = _fit_mitigation(spec, train, inner, config, post_scores, fold)
        except FairkitError as exc:
            fitted[key] = exc
    return fitted


def _fit_mitigation(spec: MitigationSpec, train: Cohort, inner, config, post_scores, fold):
    attr = spec.protected
    groups = train.groups(attr)
    if spec.method == SUP:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            reduced = suppress(train, attr)
        sel, enc, model = _select_and_fit(reduced, inner, config)
        return FittedCell(SUP, enc, model, sel.config, transform=attr)
    if spec.method == RW:
        w = reweighing_weights(groups, train.outcome)
        sel, enc, model = _select_and_fit(train, inner, config, weights=w)
        return FittedCell(RW, enc, model, sel.config, weights=w)
    if spec.method == DIR:
        repair = dir_fit(train, attr, spec.params.get("repair_level", 1.0))
        repaired = repair.transform(train, ranked=True)
        sel, enc, model = _select_and_fit(repaired, inner, config)
        return FittedCell(DIR, enc, model, sel.config, transform=repair,
                          repaired_train={c: repaired.columns[c] for c in repair.sorted_values})
    if spec.method == CPP:
        seed = spec.params.get("seed", child_seed(config.seed, fold, 1))
        return FittedCell(CPP, policy=cpp_fit(post_scores, train.outcome, groups, seed=seed))
    if spec.method == PSTA:
        policy = psta_fit(post_scores, train.outcome, groups,
                          grid_step=spec.params.get("grid_step", 0.01),
                          default_threshold=spec.params.get("default_threshold", 0.5),
                          unprivileged=spec.params.get("unprivileged", "auto"))
        return FittedCell(PSTA, policy=policy)
    raise AssertionError(spec.method)


def predict_fold(fitted: dict, cohort: Cohort, test_rows) -> dict:
    """Apply fitted cells to the test rows.

    Returns ``{key: (probabilities, predictions, unknown_group_rows)}`` or the
    exception recorded at fit time.
    """
    test = cohort.take(test_rows)
    base = fitted[(None, BASE)]
    p_base = predict_proba(base.model, base.encoder.transform(test))
    out = {(None, BASE): (p_base, (p_base >= 0.5).astype(np.int8), 0)}
    for key, cell in fitted.items():
        if key == (None, BASE):
            continue
        if isinstance(cell, Exception):
            out[key] = cell
            continue
        attr = key[0]
        try:
            out[key] = _predict_cell(cell, attr, test, p_base)
        except FairkitError as exc:
            out[key] = exc
    return out


def _predict_cell(cell: FittedCell, attr, test: Cohort, p_base):
    groups = test.groups(attr)
    if cell.method in (SUP, RW, DIR):
        view = test
        if cell.method == SUP:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                view = suppress(test, attr)
        elif cell.method == DIR:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UnknownGroup)
                view = cell.transform.transform(test)
        p = predict_proba(cell.model, cell.encoder.transform(view))
        return p, (p >= 0.5).astype(np.int8), 0
    unknown = unknown_group_rows(groups, cell.policy)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnknownGroup)
        if cell.method == CPP:
            p = cell.policy.apply(p_base, groups)
            return p, (p >= 0.5).astype(np.int8), unknown
        return p_base, apply_thresholds(p_base, groups, cell.policy), unknown


# -- aggregation -----------------------------------------------------------------

def mean_ci(values, level=0.95):
    """Mean and t-interval across folds: mean +/- t_{(1+level)/2, k-1} sd / sqrt(k)."""
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=np.float64)
    if v.size == 0:
        return {"mean": math.nan, "ci": [math.nan, math.nan]}
    m = float(v.mean())
    if v.size < 2:
        return {"mean": m, "ci": [m, m]}
    half = float(stats.t.ppf(0.5 + level / 2, v.size - 1) * v.std(ddof=1) / math.sqrt(v.size))
    return {"mean": m, "ci": [m - half, m + half]}


def _fold_metrics(p, pred, y, groups):
    counts = confusion_at_threshold(pred, y, 0.5)
    try:
        bacc = balanced_accuracy(counts)
    except FairkitError:
        bacc = math.nan
    try:
        auc = auc_roc(p, y)
    except FairkitError:
        auc = math.nan
    per_group = {str(g): c.to_dict() for g, c in group_confusion(pred, y, groups).items()}
    return {"bacc": bacc, "auc": auc, "counts": counts.to_dict(), "group_counts": per_group}


def _cell_report(attr, fold_outputs, fold_y, fold_groups, alpha):
    probs = [o[0] for o in fold_outputs]
    preds = [o[1] for o in fold_outputs]
    rep = group_report(attr, preds, probs, fold_y, fold_groups, alpha)
    folds = [_fold_metrics(p, pr, y, g) for p, pr, y, g in zip(probs, preds, fold_y, fold_groups)]
    return rep, folds


def _pick_reference_groups(base_rep, preferred=None):
    tprs = {g: s.tpr for g, s in base_rep.groups.items() if math.isfinite(s.tpr)}
    if len(tprs) < 2:
        raise InsufficientFolds(f"attribute {base_rep.attribute!r} needs two groups with positives")
    labels = list(tprs)
    if preferred is not None and preferred in tprs:
        priv = preferred
    else:
        priv = max(labels, key=lambda g: tprs[g])
    unpriv = min((g for g in labels if g != priv), key=lambda g: tprs[g])
    return priv, unpriv


def best_method(cells: dict, band=None):
    base = cells.get(BASE)
    if base is None or base.get("status") != "ok":
        return None
    ok = {m: c for m, c in cells.items() if m != BASE and c.get("status") == "ok"}
    if not ok:
        return None
    base_bacc = base["bacc"]["pooled"]
    qualified = [m for m, c in ok.items() if base_bacc - c["bacc"]["pooled"] <= BACC_TOLERANCE]
    pool = qualified or list(ok)
    return min(sorted(pool), key=lambda m: abs(ok[m]["fairness"]["eod"]))


@dataclass
class ExperimentReport:
    data: dict = field(default_factory=dict)

    @property
    def attributes(self) -> dict:
        return self.data["attributes"]

    def cell(self, attribute, method) -> dict:
        return self.data["attributes"][attribute]["cells"][method]

    def failed_cells(self) -> list:
        return [(a, m) for a, d in self.attributes.items()
                for m, c in d["cells"].items() if c.get("status") != "ok"]

    def to_dict(self) -> dict:
        return self.data


def run_experiment(config: ExperimentConfig, fixed_clock: bool = False,
                   cohort: Cohort | None = None) -> ExperimentReport:
    started = time.perf_counter()
    cohort = cohort if cohort is not None else config.load_cohort()
    for attr in config.protected:
        cohort.groups(attr)
    specs = config.mitigation_specs()
    plan = stratified_kfold(cohort, config.k_outer, config.seed)

    outputs = []      # per fold: {key: (p, pred, unknown) | Exception}
    fold_meta = []
    test_index = []
    for f, train_rows, test_rows in plan.folds():
        fitted = fit_fold(cohort, train_rows, f, config, specs)
        outputs.append(predict_fold(fitted, cohort, test_rows))
        test_index.append(test_rows)
        fold_meta.append({
            "fold": f, "n_train": int(len(train_rows)), "n_test": int(len(test_rows)),
            "cells": {f"{k[0] or '*'}/{k[1]}": (
                {"error": f"{type(c).__name__}: {c}"} if isinstance(c, Exception)
                else {kk: vv for kk, vv in c.artifacts().items()
                      if kk in ("selected_config", "policy")})
                for k, c in sorted(fitted.items(), key=lambda kv: (kv[0][0] or "", kv[0][1]))},
        })

    fold_y = [cohort.outcome[t] for t in test_index]
    attributes = {}
    for attr in sorted(config.protected):
        fold_groups = [cohort.groups(attr)[t] for t in test_index]
        cells = {}
        base_rep, base_folds = _cell_report(attr, [o[(None, BASE)] for o in outputs],
                                            fold_y, fold_groups, config.alpha)
        try:
            priv, unpriv = _pick_reference_groups(base_rep, config.privileged.get(attr))
        except FairkitError as exc:
            cells[BASE] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
            attributes[attr] = {"privileged": None, "unprivileged": None, "cells": cells,
                                "best_method": None}
            continue
        methods = [(BASE, [o[(None, BASE)] for o in outputs], base_rep, base_folds)]
        for spec in specs:
            if spec.protected != attr:
                continue
            outs = [o[(attr, spec.method)] for o in outputs]
            err = next((o for o in outs if isinstance(o, Exception)), None)
            if err is not None:
                cells[spec.method] = {"status": "failed", "error": f"{type(err).__name__}: {err}"}
                continue
            rep, folds = _cell_report(attr, outs, fold_y, fold_groups, config.alpha)
            methods.append((spec.method, outs, rep, folds))
        for method, outs, rep, folds in methods:
            tprs = {g: s.tpr for g, s in rep.groups.items()}
            fair = fairness_summary(tprs, priv, unpriv, config.band)
            cells[method] = {
                "status": "ok",
                "group_report": rep.to_dict(),
                "fairness": fair.to_dict(),
                "bacc": {"pooled": rep.bacc, **mean_ci([fm["bacc"] for fm in folds])},
                "auc": {"pooled": rep.auc, **mean_ci([fm["auc"] for fm in folds])},
                "folds": folds,
                "unknown_group_rows": int(sum(o[2] for o in outs)),
            }
        attributes[attr] = {"privileged": str(priv), "unprivileged": str(unpriv),
                            "cells": dict(sorted(cells.items())),
                            "best_method": best_method(cells)}

    elapsed = time.perf_counter() - started
    data = {
        "toolkit": {"name": "fairkit", "version": __version__},
        "created": FIXED_CLOCK if fixed_clock else
        _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "wall_clock_seconds": 0.0 if fixed_clock else elapsed,
        "config": config.to_dict(),
        "n": cohort.n,
        "best_method_rule": BEST_METHOD_RULE,
        "folds": fold_meta,
        "attributes": attributes,
    }
    return ExperimentReport(data)


def pooled_counts(cell: dict) -> ConfusionCounts:
    total = ConfusionCounts()
    for fm in cell["folds"]:
        total = total + ConfusionCounts(**fm["counts"])
    return total
