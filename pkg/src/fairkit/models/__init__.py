"""Weighted binary probabilistic classifiers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..cohort import EncodedMatrix
from ..errors import FeatureMismatch
from .gbt import GbtConfig, Tree, fit_gbt
from .logistic import LogisticConfig, fit_logistic, logistic_objective

MODEL_FORMAT_VERSION = 1

LOGISTIC = "logistic"
GBT = "gbt"


@dataclass(frozen=True, eq=False)
class TrainedModel:
    kind: str
    feature_names: tuple
    intercept: float = 0.0
    coef: np.ndarray | None = None
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    feature_std: np.ndarray | None = None
    base_margin: float = 0.0
    trees: tuple = ()
    converged: bool = True
    losses: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        d = {"format_version": MODEL_FORMAT_VERSION, "kind": self.kind,
             "feature_names": list(self.feature_names)}
        if self.kind == LOGISTIC:
            d["parameters"] = {"intercept": float(self.intercept), "coef": self.coef.tolist()}
            d["standardization"] = {"mean": self.mean.tolist(), "scale": self.scale.tolist(),
                                    "feature_std": self.feature_std.tolist()}
            d["converged"] = self.converged
        else:
            d["parameters"] = {"base_margin": float(self.base_margin),
                               "trees": [t.to_dict() for t in self.trees]}
            d["standardization"] = None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "TrainedModel":
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format_version')!r}")
        names = tuple(d["feature_names"])
        par = d["parameters"]
        if d["kind"] == LOGISTIC:
            st = d["standardization"]
            return cls(LOGISTIC, names, float(par["intercept"]), np.asarray(par["coef"], float),
                       np.asarray(st["mean"], float), np.asarray(st["scale"], float),
                       np.asarray(st["feature_std"], float), converged=bool(d.get("converged", True)))
        if d["kind"] == GBT:
            return cls(GBT, names, base_margin=float(par["base_margin"]),
                       trees=tuple(Tree.from_dict(t) for t in par["trees"]))
        raise ValueError(f"unknown model kind {d['kind']!r}")

    @classmethod
    def from_json(cls, text) -> "TrainedModel":
        return cls.from_dict(json.loads(text))


def _matrix(X, names=None):
    if isinstance(X, EncodedMatrix):
        return X.values, X.names
    return np.asarray(X, dtype=np.float64), names


def train_logistic(X, y, w=None, cfg: LogisticConfig = LogisticConfig()) -> TrainedModel:
    values, names = _matrix(X)
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(values.shape[1]))
    b0, beta, mean, scale, std, converged, losses = fit_logistic(values, y, w, cfg)
    return TrainedModel(LOGISTIC, names, float(b0), beta, mean, scale, std,
                        converged=converged, losses=tuple(losses))


def train_gbt(X, y, w=None, cfg: GbtConfig = GbtConfig()) -> TrainedModel:
    values, names = _matrix(X)
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(values.shape[1]))
    base, trees, losses = fit_gbt(values, y, w, cfg)
    return TrainedModel(GBT, names, base_margin=base, trees=tuple(trees), losses=tuple(losses))


def train(kind, X, y, w, cfg) -> TrainedModel:
    if kind == LOGISTIC:
        return train_logistic(X, y, w, cfg)
    if kind == GBT:
        return train_gbt(X, y, w, cfg)
    raise ValueError(f"unknown model kind {kind!r}")


def decision_margin(model: TrainedModel, X) -> np.ndarray:
    values, names = _matrix(X)
    if values.ndim != 2 or values.shape[1] != len(model.feature_names):
        raise FeatureMismatch(
            f"expected {len(model.feature_names)} features, got {values.shape[-1]}")
    if names is not None and tuple(names) != model.feature_names:
        raise FeatureMismatch("feature names differ from the trained model")
    if model.kind == LOGISTIC:
        return model.intercept + ((values - model.mean) / model.scale) @ model.coef
    margin = np.full(values.shape[0], model.base_margin)
    for tree in model.trees:
        margin = margin + tree.apply(values)
    return margin


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    return expit(decision_margin(model, X))


def feature_importance(model: TrainedModel) -> list:
    """Features ranked by importance, ties kept in feature order.

    Logistic: |raw coefficient| times the training standard deviation.
    Boosted trees: total split gain.
    """
    if model.kind == LOGISTIC:
        scores = np.abs(model.coef / model.scale) * model.feature_std
    else:
        scores = np.zeros(len(model.feature_names))
        for tree in model.trees:
            internal = tree.feature >= 0
            np.add.at(scores, tree.feature[internal], tree.gain[internal])
    order = sorted(range(len(scores)), key=lambda j: -scores[j])
    return [(model.feature_names[j], float(scores[j])) for j in order]


from .selection import SelectionResult, default_grid, fit_on_rows, grid_search, select_config  # noqa: E402

__all__ = [
    "GBT", "LOGISTIC", "GbtConfig", "LogisticConfig", "SelectionResult", "TrainedModel",
    "decision_margin", "default_grid", "feature_importance", "fit_on_rows", "grid_search",
    "logistic_objective", "predict_proba", "select_config", "train", "train_gbt", "train_logistic",
]
