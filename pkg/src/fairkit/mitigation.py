"""Pre-processing (SUP, RW, DIR) and post-processing (CPP, PSTA) bias mitigation."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cohort import NUMERIC, PROTECTED, Cohort, FEATURE
from .errors import (
    BadLambda,
    ConfigError,
    EmptyCell,
    EmptyGrid,
    LengthMismatch,
    MissingColumn,
    NoPositivesInGroup,
    UnknownGroup,
)
from .metrics import group_labels

SUP, RW, DIR, CPP, PSTA = "SUP", "RW", "DIR", "CPP", "PSTA"
METHODS = (SUP, RW, DIR, CPP, PSTA)
PRE_PROCESSING = (SUP, RW, DIR)
POST_PROCESSING = (CPP, PSTA)


@dataclass(frozen=True)
class MitigationSpec:
    method: str
    protected: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown mitigation method {self.method!r}")
        allowed = {DIR: {"repair_level"},
                   PSTA: {"grid_step", "default_threshold", "unprivileged"},
                   CPP: {"seed"}}.get(self.method, set())
        extra = set(self.params) - allowed
        if extra:
            raise ConfigError(f"{self.method}: unknown parameters {sorted(extra)}")
        if self.method == DIR:
            lam = self.params.get("repair_level", 1.0)
            if not 0 <= lam <= 1:
                raise BadLambda(f"repair_level must be in [0, 1], got {lam}")
        if self.method == PSTA:
            _grid(self.params.get("grid_step", 0.01))


# -- SUP ---------------------------------------------------------------------

def suppress(cohort: Cohort, protected: str) -> Cohort:
    """Drop ``protected`` from the learner's view; its labels stay available for grouping."""
    spec = cohort.spec(protected)
    if spec.role != PROTECTED:
        warnings.warn(f"suppressing non-protected column {protected!r}", UserWarning, stacklevel=2)
    return cohort.drop_column(protected, retain_groups=True)


# -- RW ----------------------------------------------------------------------

def reweighing_weights(groups, y) -> np.ndarray:
    """w(x, c) = n_x n_c / (n n_xc), i.e. P(x) P(c) / P(x, c) with empirical frequencies."""
    groups = np.asarray(groups, dtype=object)
    y = np.asarray(y)
    if len(groups) != len(y):
        raise LengthMismatch("groups and y must have equal length")
    n = len(y)
    w = np.empty(n)
    n_c = {c: int(np.sum(y == c)) for c in (0, 1)}
    for g in group_labels(groups):
        in_g = groups == g
        n_x = int(in_g.sum())
        for c in (0, 1):
            cell = in_g & (y == c)
            n_xc = int(cell.sum())
            if n_xc == 0:
                raise EmptyCell(g, c)
            w[cell] = (n_x * n_c[c]) / (n * n_xc)
    return w


def reweigh(cohort: Cohort, protected: str) -> np.ndarray:
    return reweighing_weights(cohort.groups(protected), cohort.outcome)


# -- DIR ---------------------------------------------------------------------

def _interp_sorted(sorted_vals, pos):
    return np.interp(pos, np.arange(len(sorted_vals), dtype=np.float64), sorted_vals)


@dataclass(frozen=True, eq=False)
class DirRepair:
    """Per-group quantile functions of the numeric features, fitted on training rows.

    A value with in-group rank r (1-based, n_x values) sits at quantile
    u = (r - 0.5) / n_x; the target is the median over groups of each group's
    quantile function at u, linearly interpolated between order statistics.
    """

    protected: str
    repair_level: float
    sorted_values: dict  # column -> {group: sorted finite training values}

    def _target(self, column, u_num, u_den):
        """Median-over-groups quantile at u = u_num / u_den (vectorised)."""
        qs = []
        for vals in self.sorted_values[column].values():
            pos = u_num * len(vals) / u_den - 0.5
            qs.append(_interp_sorted(vals, pos))
        return np.median(np.vstack(qs), axis=0)

    def _repair_column(self, column, values, groups, ranked):
        out = values.astype(np.float64).copy()
        lam = self.repair_level
        fitted = self.sorted_values[column]
        for g in group_labels(groups):
            idx = np.flatnonzero((groups == g) & ~np.isnan(values))
            if idx.size == 0:
                continue
            if g not in fitted:
                warnings.warn(f"DIR: group {g!r} unseen at fit time; values left unrepaired",
                              UnknownGroup, stacklevel=3)
                continue
            v = values[idx]
            if ranked:
                n_x = len(idx)
                order = np.argsort(v, kind="stable")
                rank = np.empty(n_x)
                rank[order] = np.arange(1, n_x + 1)
                num, den = rank - 0.5, float(n_x)
            else:
                ref = fitted[g]
                num, den = _interp_sorted_inverse(ref, v) + 0.5, float(len(ref))
            out[idx] = (1 - lam) * v + lam * self._target(column, num, den)
        return out

    def transform(self, cohort: Cohort, ranked: bool = False) -> Cohort:
        """Repair numeric features and drop the protected column.

        ``ranked=True`` uses in-cohort ranks (the rows the repair was fitted on);
        otherwise each value is placed with its group's fitted distribution.
        """
        groups = cohort.groups(self.protected)
        repaired = {c: self._repair_column(c, cohort.columns[c], groups, ranked)
                    for c in self.sorted_values}
        out = cohort.with_columns(repaired)
        if out.has_column(self.protected):
            out = out.drop_column(self.protected, retain_groups=True)
        return out

    def to_dict(self):
        return {"protected": self.protected, "repair_level": self.repair_level,
                "sorted_values": {c: {str(g): v.tolist() for g, v in d.items()}
                                  for c, d in self.sorted_values.items()}}


def _interp_sorted_inverse(sorted_vals, v):
    """Fractional 0-based position of ``v`` among ``sorted_vals`` (clamped)."""
    return np.interp(v, sorted_vals, np.arange(len(sorted_vals), dtype=np.float64))


def dir_fit(cohort: Cohort, protected: str, repair_level: float = 1.0) -> DirRepair:
    if not 0 <= repair_level <= 1:
        raise BadLambda(f"repair_level must be in [0, 1], got {repair_level}")
    groups = cohort.groups(protected)
    cols = [s.name for s in cohort.schema
            if s.kind == NUMERIC and s.role == FEATURE and s.name != protected]
    sorted_values = {}
    for c in cols:
        vals = cohort.columns[c]
        per = {}
        for g in group_labels(groups):
            v = vals[(groups == g) & ~np.isnan(vals)]
            if v.size:
                per[g] = np.sort(v, kind="stable")
        sorted_values[c] = per
    return DirRepair(protected, float(repair_level), sorted_values)


def dir_repair(cohort: Cohort, protected: str, repair_level: float = 1.0) -> Cohort:
    if not cohort.has_column(protected) and protected not in cohort.retained_groups:
        raise MissingColumn(protected)
    return dir_fit(cohort, protected, repair_level).transform(cohort, ranked=True)


# -- CPP ---------------------------------------------------------------------

def generalized_fnr(p, y) -> float:
    pos = np.asarray(y) == 1
    if not pos.any():
        raise NoPositivesInGroup(None)
    return float(np.mean(1.0 - np.asarray(p, dtype=np.float64)[pos]))


@dataclass(frozen=True)
class CppPolicy:
    """Randomised mixing toward the group base rate that equalises generalized FNRs."""

    mix_rates: dict
    base_rates: dict
    gfnr: dict
    seed: int = 0

    def expected_gfnr(self) -> dict:
        return {g: self.gfnr[g] * (1 - a) + (1 - self.base_rates[g]) * a
                for g, a in self.mix_rates.items()}

    def apply(self, p, groups, seed=None) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        groups = np.asarray(groups, dtype=object)
        rng = np.random.default_rng(self.seed if seed is None else seed)
        u = rng.random(len(p))
        alpha = np.zeros(len(p))
        mu = p.copy()
        for g in group_labels(groups):
            mask = groups == g
            if g not in self.mix_rates:
                warnings.warn(f"CPP: group {g!r} unseen at fit time; left unmixed",
                              UnknownGroup, stacklevel=2)
                continue
            alpha[mask] = self.mix_rates[g]
            mu[mask] = self.base_rates[g]
        return np.where(u < alpha, mu, p)

    def to_dict(self):
        return {"mix_rates": {str(g): v for g, v in self.mix_rates.items()},
                "base_rates": {str(g): v for g, v in self.base_rates.items()},
                "gfnr": {str(g): v for g, v in self.gfnr.items()},
                "expected_gfnr": {str(g): v for g, v in self.expected_gfnr().items()},
                "seed": self.seed}


def cpp_mix_rate(g_low: float, g_high: float, mu_low: float) -> float:
    """Mixing rate alpha solving g_low (1 - alpha) + (1 - mu_low) alpha = g_high."""
    denom = (1.0 - mu_low) - g_low
    if g_high <= g_low or denom <= 0:
        return 0.0
    return min(1.0, (g_high - g_low) / denom)


def cpp_fit(p, y, groups, seed: int = 0) -> CppPolicy:
    """Raise every group's generalized FNR to the largest one by base-rate mixing."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    groups = np.asarray(groups, dtype=object)
    if not (len(p) == len(y) == len(groups)):
        raise LengthMismatch("p, y and groups must have equal length")
    gf, mu = {}, {}
    for g in group_labels(groups):
        mask = groups == g
        if not np.any(y[mask] == 1):
            raise NoPositivesInGroup(g)
        gf[g] = generalized_fnr(p[mask], y[mask])
        mu[g] = float(np.mean(y[mask]))
    top = max(gf.values())
    alpha = {g: cpp_mix_rate(gf[g], top, mu[g]) for g in gf}
    return CppPolicy(alpha, mu, gf, int(seed))


# -- PSTA --------------------------------------------------------------------

def _grid(step: float) -> np.ndarray:
    if not 0 < step <= 0.5:
        raise EmptyGrid(f"grid_step must be in (0, 0.5], got {step}")
    n = round(1.0 / step)
    if abs(n * step - 1.0) > 1e-9:
        raise EmptyGrid(f"grid_step {step} does not divide [0, 1]")
    return np.arange(n + 1) / n


def _sensitivity(p, y, theta) -> float:
    pos = np.asarray(p)[np.asarray(y) == 1]
    return float(np.count_nonzero(pos >= theta) / len(pos))


@dataclass(frozen=True)
class ThresholdPolicy:
    thresholds: dict
    default_threshold: float = 0.5
    unprivileged: tuple = ()
    target_sensitivity: float = math.nan

    def threshold_for(self, g) -> float:
        return self.thresholds.get(g, self.default_threshold)

    def to_dict(self):
        return {"thresholds": {str(g): v for g, v in self.thresholds.items()},
                "default_threshold": self.default_threshold,
                "unprivileged": [str(g) for g in self.unprivileged],
                "target_sensitivity": self.target_sensitivity}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def sweep_threshold(p_pos, target: float, grid) -> float:
    """Largest grid threshold whose group sensitivity is closest to ``target``."""
    p_sorted = np.sort(np.asarray(p_pos, dtype=np.float64))
    above = len(p_sorted) - np.searchsorted(p_sorted, grid, side="left")
    diff = np.abs(above / len(p_sorted) - target)
    best = diff.min()
    return float(grid[np.flatnonzero(diff <= best + 1e-12)[-1]])


def psta_fit(p, y, groups, grid_step: float = 0.01, default_threshold: float = 0.5,
             unprivileged="auto") -> ThresholdPolicy:
    """Per-group thresholds aligning unprivileged sensitivities with the overall one.

    The overall target is the training sensitivity with every group at
    ``default_threshold``. With ``unprivileged="auto"`` the groups whose TPR at
    that threshold is strictly below the target are adjusted.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    groups = np.asarray(groups, dtype=object)
    if not (len(p) == len(y) == len(groups)):
        raise LengthMismatch("p, y and groups must have equal length")
    grid = _grid(grid_step)
    labels = group_labels(groups)
    for g in labels:
        if not np.any(y[groups == g] == 1):
            raise NoPositivesInGroup(g)
    target = _sensitivity(p, y, default_threshold)
    if isinstance(unprivileged, str) and unprivileged == "auto":
        unpriv = [g for g in labels
                  if _sensitivity(p[groups == g], y[groups == g], default_threshold) < target]
    else:
        unpriv = [g for g in labels if g in set(unprivileged)]
    thresholds = {g: float(default_threshold) for g in labels}
    for g in unpriv:
        mask = (groups == g) & (y == 1)
        thresholds[g] = sweep_threshold(p[mask], target, grid)
    return ThresholdPolicy(thresholds, float(default_threshold), tuple(unpriv), target)


def apply_thresholds(p, groups, policy: ThresholdPolicy) -> np.ndarray:
    """1 where ``p`` reaches its group's threshold; unseen groups use the default."""
    p = np.asarray(p, dtype=np.float64)
    groups = np.asarray(groups, dtype=object)
    if len(p) != len(groups):
        raise LengthMismatch("p and groups must have equal length")
    theta = np.full(len(p), policy.default_threshold)
    for g in group_labels(groups):
        mask = groups == g
        if g not in policy.thresholds:
            warnings.warn(f"group {g!r} has no fitted threshold; using default", UnknownGroup,
                          stacklevel=2)
            continue
        theta[mask] = policy.thresholds[g]
    return (p >= theta).astype(np.int8)


def unknown_group_rows(groups, policy) -> int:
    known = policy.thresholds if isinstance(policy, ThresholdPolicy) else policy.mix_rates
    return int(sum(1 for g in np.asarray(groups, dtype=object) if g not in known))
