"""Synthetic cohorts with controlled subgroup prevalence gaps and a group proxy.

Generation order, all from one ``numpy.random.Generator`` (PCG64) seeded
with ``seed``:

1. group labels, by inverse-CDF on the cumulative proportions;
2. one uniform per row; outcome is 1 when it falls below sigmoid(a_g),
   where each group's intercept a_g is found by bisection so that the
   expected prevalence hits its target;
3. ``n_numeric`` standard normal blocks, scaled by ``noise_scale`` and
   shifted by ``effect`` for positive rows;
4. a proxy ``rho * z + sqrt(1 - rho^2) * e`` where z is the standardised
   indicator of the first group and e is standard normal noise, so the
   population correlation with that indicator is ``rho``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import yaml
from scipy.special import expit

from .cohort import CATEGORICAL, NUMERIC, OUTCOME, PROTECTED, Cohort, ColumnSpec
from .errors import SpecInvalid


@dataclass(frozen=True)
class GroupSpec:
    label: str
    proportion: float
    prevalence: float


@dataclass(frozen=True)
class CohortSpec:
    n: int
    groups: tuple
    n_numeric: int = 6
    proxy_strength: float = 0.5
    noise_scale: float = 1.0
    seed: int = 0
    effect: float = 1.0
    protected_name: str = "group"
    outcome_name: str = "outcome"

    def __post_init__(self):
        groups = tuple(g if isinstance(g, GroupSpec) else GroupSpec(*g) if not isinstance(g, dict)
                       else GroupSpec(**g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if self.n < 100:
            raise SpecInvalid("n must be >= 100")
        if len(groups) < 2:
            raise SpecInvalid("need at least two groups")
        if len({g.label for g in groups}) != len(groups):
            raise SpecInvalid("group labels must be unique")
        if abs(sum(g.proportion for g in groups) - 1.0) > 1e-9:
            raise SpecInvalid("group proportions must sum to 1")
        for g in groups:
            if not 0 < g.proportion <= 1:
                raise SpecInvalid(f"proportion of {g.label!r} must be in (0, 1]")
            if not 0 < g.prevalence < 1:
                raise SpecInvalid(f"prevalence of {g.label!r} must be in (0, 1)")
        if not 0 <= self.proxy_strength <= 1:
            raise SpecInvalid("proxy_strength must be in [0, 1]")
        if not self.noise_scale > 0:
            raise SpecInvalid("noise_scale must be > 0")
        if self.n_numeric < 0:
            raise SpecInvalid("n_numeric must be >= 0")

    @classmethod
    def from_dict(cls, d) -> "CohortSpec":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SpecInvalid(f"unknown cohort spec keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise SpecInvalid(str(exc)) from None

    def to_dict(self):
        d = asdict(self)
        d["groups"] = [asdict(g) for g in self.groups]
        return d


def load_cohort_spec(path) -> CohortSpec:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if isinstance(doc, dict) and "cohort" in doc:
        doc = doc["cohort"]
    if not isinstance(doc, dict):
        raise SpecInvalid(f"{path}: expected a mapping")
    return CohortSpec.from_dict(doc)


def expected_prevalence(intercept: float) -> float:
    return float(expit(intercept))


def solve_intercept(prevalence: float, tol: float = 1e-4) -> float:
    """Bisection for the intercept whose expected prevalence is ``prevalence``."""
    lo, hi = -50.0, 50.0
    while True:
        mid = 0.5 * (lo + hi)
        value = expected_prevalence(mid)
        if abs(value - prevalence) <= tol or hi - lo < 1e-12:
            return mid
        if value < prevalence:
            lo = mid
        else:
            hi = mid


def numeric_names(spec: CohortSpec) -> list:
    return [f"x{j + 1}" for j in range(spec.n_numeric)]


def cohort_schema(spec: CohortSpec) -> tuple:
    cols = [ColumnSpec(name, NUMERIC) for name in numeric_names(spec)]
    cols.append(ColumnSpec("proxy", NUMERIC))
    cols.append(ColumnSpec(spec.protected_name, CATEGORICAL, PROTECTED,
                           tuple(g.label for g in spec.groups)))
    cols.append(ColumnSpec(spec.outcome_name, NUMERIC, OUTCOME))
    return tuple(cols)


def generate_cohort(spec: CohortSpec) -> Cohort:
    rng = np.random.default_rng(int(spec.seed) & ((1 << 64) - 1))
    n = spec.n
    labels = np.array([g.label for g in spec.groups], dtype=object)
    cum = np.cumsum([g.proportion for g in spec.groups])
    cum[-1] = 1.0
    gidx = np.searchsorted(cum, rng.random(n), side="right")
    intercepts = np.array([solve_intercept(g.prevalence) for g in spec.groups])
    y = (rng.random(n) < expit(intercepts[gidx])).astype(np.int8)

    columns = {}
    for name in numeric_names(spec):
        columns[name] = spec.noise_scale * rng.standard_normal(n) + spec.effect * y
    p1 = spec.groups[0].proportion
    indicator = (gidx == 0).astype(np.float64)
    z = (indicator - p1) / math.sqrt(p1 * (1 - p1)) if 0 < p1 < 1 else np.zeros(n)
    rho = spec.proxy_strength
    columns["proxy"] = rho * z + math.sqrt(1 - rho * rho) * rng.standard_normal(n)
    columns[spec.protected_name] = labels[gidx]
    return Cohort(cohort_schema(spec), columns, y)
