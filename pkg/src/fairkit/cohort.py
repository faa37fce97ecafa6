"""Tabular cohorts: schema, CSV ingest, feature encoding and CV splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .errors import (
    BadValue,
    CannotDropOutcome,
    DataError,
    DuplicateColumn,
    EmptyFile,
    FeatureMismatch,
    InfeasibleSplit,
    MissingColumn,
    SchemaError,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
ORDINAL = "ordinal"
KINDS = (NUMERIC, CATEGORICAL, ORDINAL)

FEATURE = "feature"
PROTECTED = "protected"
OUTCOME = "outcome"
IDENTIFIER = "identifier"
ROLES = (FEATURE, PROTECTED, OUTCOME, IDENTIFIER)

MISSING_LEVEL = "Missing"

_UINT64 = (1 << 64) - 1


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    role: str = FEATURE
    levels: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise SchemaError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.kind == NUMERIC and self.levels:
            raise SchemaError(f"numeric column {self.name!r} declares levels")
        if self.kind in (CATEGORICAL, ORDINAL) and self.role != OUTCOME and not self.levels:
            raise SchemaError(f"column {self.name!r} needs levels")
        if len(set(self.levels)) != len(self.levels):
            raise SchemaError(f"column {self.name!r} has repeated levels")
        if self.role == PROTECTED and (self.kind != CATEGORICAL or len(self.levels) < 2):
            raise SchemaError(f"protected column {self.name!r} must be categorical with >= 2 levels")

    def to_dict(self):
        d = {"name": self.name, "kind": self.kind, "role": self.role}
        if self.levels:
            d["levels"] = list(self.levels)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"name", "kind", "role", "levels"}
        if unknown:
            raise SchemaError(f"unknown schema keys: {sorted(unknown)}")
        try:
            return cls(str(d["name"]), d["kind"], d.get("role", FEATURE), tuple(d.get("levels", ())))
        except KeyError as exc:
            raise SchemaError(f"schema entry missing key {exc}") from None


def validate_schema(schema: Sequence[ColumnSpec]) -> tuple:
    schema = tuple(schema)
    seen = set()
    for spec in schema:
        if spec.name in seen:
            raise DuplicateColumn(spec.name)
        seen.add(spec.name)
    outcomes = [s for s in schema if s.role == OUTCOME]
    if len(outcomes) != 1:
        raise SchemaError(f"schema needs exactly one outcome column, found {len(outcomes)}")
    return schema


def load_schema(path) -> tuple:
    """Read a YAML/JSON schema file: a ``columns`` list of name/kind/role/levels."""
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    entries = doc.get("columns") if isinstance(doc, dict) else doc
    if not isinstance(entries, list):
        raise SchemaError(f"{path}: expected a list of columns")
    return validate_schema(ColumnSpec.from_dict(e) for e in entries)


def save_schema(schema: Sequence[ColumnSpec], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({"columns": [s.to_dict() for s in schema]}, fh, sort_keys=False)


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class Cohort:
    """An immutable tabular dataset with a binary outcome and protected attributes.

    Numeric columns are float arrays with NaN for missing cells. Categorical
    and ordinal columns are object arrays of level strings; a missing ordinal
    cell is ``None``.
    """

    def __init__(self, schema, columns: Mapping[str, np.ndarray], outcome, weights=None,
                 retained_groups: Mapping[str, np.ndarray] | None = None):
        self.schema = validate_schema(schema)
        self._specs = {s.name: s for s in self.schema}
        y = np.asarray(outcome)
        n = len(y)
        if n < 1:
            raise EmptyFile("cohort has no rows")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("outcome values must be 0 or 1")
        self.outcome = _readonly(y.astype(np.int8))

        cols = {}
        for spec in self.schema:
            if spec.role == OUTCOME:
                continue
            if spec.name not in columns:
                raise MissingColumn(spec.name)
            col = np.asarray(columns[spec.name])
            if len(col) != n:
                raise DataError(f"column {spec.name!r} has length {len(col)}, expected {n}")
            if spec.kind == NUMERIC and spec.role != IDENTIFIER:
                col = col.astype(np.float64)
            else:
                col = col.astype(object)
                if spec.kind in (CATEGORICAL, ORDINAL) and spec.role != IDENTIFIER:
                    allowed = set(spec.levels)
                    if spec.kind == ORDINAL:
                        allowed.add(None)
                    for i, v in enumerate(col):
                        if v not in allowed:
                            raise BadValue(spec.name, i + 1, v, "not a declared level")
            cols[spec.name] = _readonly(col)
        self.columns = cols

        if weights is None:
            w = np.ones(n)
        else:
            w = np.asarray(weights, dtype=np.float64)
            if w.shape != (n,):
                raise DataError("weights must have one entry per row")
            if not np.all(np.isfinite(w)) or np.any(w < 0) or w.sum() <= 0:
                raise DataError("weights must be finite, non-negative and not all zero")
        self.weights = _readonly(w)

        self.retained_groups = {k: _readonly(np.asarray(v, dtype=object))
                                for k, v in (retained_groups or {}).items()}
        self.group_index = {}
        for spec in self.schema:
            if spec.role == PROTECTED:
                labels = self.columns[spec.name]
                for level in spec.levels:
                    self.group_index[(spec.name, level)] = _readonly(np.flatnonzero(labels == level))

    # -- accessors ---------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.outcome)

    @property
    def outcome_name(self) -> str:
        return next(s.name for s in self.schema if s.role == OUTCOME)

    @property
    def protected(self) -> list:
        return [s.name for s in self.schema if s.role == PROTECTED]

    def spec(self, name) -> ColumnSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise MissingColumn(name) from None

    def has_column(self, name) -> bool:
        return name in self._specs

    def groups(self, name) -> np.ndarray:
        """Group labels for a protected attribute, including ones suppressed from features."""
        if name in self.retained_groups:
            return self.retained_groups[name]
        if name in self.columns:
            return self.columns[name]
        raise MissingColumn(name)

    # -- derivation --------------------------------------------------------
    def _derive(self, schema=None, columns=None, outcome=None, weights=None, retained=None, rows=None):
        schema = self.schema if schema is None else schema
        columns = dict(self.columns) if columns is None else columns
        outcome = self.outcome if outcome is None else outcome
        weights = self.weights if weights is None else weights
        retained = dict(self.retained_groups) if retained is None else retained
        if rows is not None:
            columns = {k: v[rows] for k, v in columns.items()}
            retained = {k: v[rows] for k, v in retained.items()}
            outcome = outcome[rows]
            weights = weights[rows]
        return Cohort(schema, columns, outcome, weights, retained)

    def take(self, rows) -> "Cohort":
        return self._derive(rows=np.asarray(rows, dtype=np.intp))

    def with_weights(self, weights) -> "Cohort":
        return self._derive(weights=np.asarray(weights, dtype=np.float64))

    def with_outcome(self, outcome) -> "Cohort":
        return self._derive(outcome=np.asarray(outcome))

    def with_columns(self, replacements: Mapping[str, np.ndarray]) -> "Cohort":
        cols = dict(self.columns)
        for name, values in replacements.items():
            if name not in cols:
                raise MissingColumn(name)
            cols[name] = values
        return self._derive(columns=cols)

    def drop_column(self, name, retain_groups=False) -> "Cohort":
        spec = self.spec(name)
        if spec.role == OUTCOME:
            raise CannotDropOutcome(f"cannot drop outcome column {name!r}")
        schema = tuple(s for s in self.schema if s.name != name)
        cols = {k: v for k, v in self.columns.items() if k != name}
        retained = dict(self.retained_groups)
        if retain_groups:
            retained[name] = self.columns[name]
        return self._derive(schema=schema, columns=cols, retained=retained)


def drop_column(cohort: Cohort, name: str) -> Cohort:
    return cohort.drop_column(name)


# -- CSV ---------------------------------------------------------------------

def _parse_cell(spec: ColumnSpec, token: str, row: int):
    if spec.role == OUTCOME:
        if token.strip() in ("0", "1", "0.0", "1.0"):
            return int(float(token))
        raise BadValue(spec.name, row, token, "outcome must be 0 or 1")
    if spec.role == IDENTIFIER:
        return token
    if spec.kind == NUMERIC:
        if token.strip() == "":
            return math.nan
        try:
            return float(token)
        except ValueError:
            raise BadValue(spec.name, row, token, "not numeric") from None
    if token == "":
        return None if spec.kind == ORDINAL else MISSING_LEVEL
    if token not in spec.levels:
        raise BadValue(spec.name, row, token, "not a declared level")
    return token


def load_csv(path, schema: Sequence[ColumnSpec]) -> Cohort:
    """Load a CSV file against ``schema``.

    An empty categorical cell becomes the ``Missing`` level (appended to the
    column's levels when not declared); an empty numeric cell becomes NaN.
    Row numbers in errors count data rows from 1.
    """
    schema = validate_schema(schema)
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise EmptyFile(f"{path}: no header row")
        seen = set()
        for name in header:
            if name in seen:
                raise DuplicateColumn(name)
            seen.add(name)
        for spec in schema:
            if spec.name not in seen:
                raise MissingColumn(spec.name)
        extra = seen - {s.name for s in schema}
        if extra:
            raise SchemaError(f"columns not in schema: {sorted(extra)}")
        pos = {name: i for i, name in enumerate(header)}
        values = {s.name: [] for s in schema}
        n = 0
        for row_no, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != len(header):
                raise BadValue("<row>", row_no, record, f"expected {len(header)} fields")
            for spec in schema:
                values[spec.name].append(_parse_cell(spec, record[pos[spec.name]], row_no))
            n += 1
    if n == 0:
        raise EmptyFile(f"{path}: no data rows")

    final_schema = []
    for spec in schema:
        if spec.kind == CATEGORICAL and spec.role not in (OUTCOME, IDENTIFIER) \
                and MISSING_LEVEL not in spec.levels and MISSING_LEVEL in values[spec.name]:
            spec = ColumnSpec(spec.name, spec.kind, spec.role, spec.levels + (MISSING_LEVEL,))
        final_schema.append(spec)
    outcome_name = next(s.name for s in schema if s.role == OUTCOME)
    columns = {}
    for spec in final_schema:
        if spec.role == OUTCOME:
            continue
        if spec.kind == NUMERIC and spec.role != IDENTIFIER:
            columns[spec.name] = np.array(values[spec.name], dtype=np.float64)
        else:
            arr = np.empty(n, dtype=object)
            arr[:] = values[spec.name]
            columns[spec.name] = arr
    return Cohort(final_schema, columns, np.array(values[outcome_name]))


def _format_cell(spec, value):
    if spec.kind == NUMERIC and spec.role != IDENTIFIER:
        return "" if math.isnan(value) else repr(float(value))
    return "" if value is None else str(value)


def write_csv(cohort: Cohort, path) -> None:
    names = [s.name for s in cohort.schema]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(cohort.n):
            row = []
            for spec in cohort.schema:
                if spec.role == OUTCOME:
                    row.append(str(int(cohort.outcome[i])))
                else:
                    row.append(_format_cell(spec, cohort.columns[spec.name][i]))
            writer.writerow(row)


# -- encoding ----------------------------------------------------------------

@dataclass(frozen=True)
class EncodedMatrix:
    values: np.ndarray
    names: tuple

    @property
    def shape(self):
        return self.values.shape


def _feature_specs(cohort: Cohort):
    return [s for s in cohort.schema if s.role in (FEATURE, PROTECTED)]


class FeatureEncoder:
    """Column layout plus imputation medians, fitted on training rows only."""

    def __init__(self, specs, medians):
        self.specs = tuple(specs)
        self.medians = dict(medians)
        names = []
        for s in self.specs:
            if s.kind == CATEGORICAL:
                names.extend(f"{s.name}={lvl}" for lvl in s.levels)
            else:
                names.append(s.name)
        self.names = tuple(names)

    @staticmethod
    def _raw(spec, col):
        if spec.kind == NUMERIC:
            return col
        rank = {lvl: float(i) for i, lvl in enumerate(spec.levels)}
        return np.array([math.nan if v is None else rank[v] for v in col], dtype=np.float64)

    @classmethod
    def fit(cls, cohort: Cohort, rows=None) -> "FeatureEncoder":
        specs = _feature_specs(cohort)
        medians = {}
        for s in specs:
            if s.kind == CATEGORICAL:
                continue
            raw = cls._raw(s, cohort.columns[s.name])
            if rows is not None:
                raw = raw[rows]
            finite = raw[~np.isnan(raw)]
            medians[s.name] = float(np.median(finite)) if finite.size else 0.0
        return cls(specs, medians)

    def transform(self, cohort: Cohort) -> EncodedMatrix:
        if [s.name for s in _feature_specs(cohort)] != [s.name for s in self.specs]:
            raise FeatureMismatch("cohort feature columns differ from the fitted encoder")
        blocks = []
        for s in self.specs:
            col = cohort.columns[s.name]
            if s.kind == CATEGORICAL:
                lv = cohort.spec(s.name).levels
                if lv != s.levels:
                    raise FeatureMismatch(f"levels of {s.name!r} differ from the fitted encoder")
                blocks.append(np.stack([(col == lvl) for lvl in s.levels], axis=1).astype(np.float64))
            else:
                raw = self._raw(s, col).copy()
                raw[np.isnan(raw)] = self.medians[s.name]
                blocks.append(raw[:, None])
        values = np.hstack(blocks) if blocks else np.zeros((cohort.n, 0))
        return EncodedMatrix(np.ascontiguousarray(values), self.names)


def encode_features(cohort: Cohort, rows=None) -> EncodedMatrix:
    return FeatureEncoder.fit(cohort, rows).transform(cohort)


# -- cross-validation --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def folds(self):
        for f in range(self.k):
            yield f, self.train_rows(f), self.test_rows(f)


def child_seed(seed: int, *key: int) -> int:
    """Derive an independent 64-bit seed from ``seed`` and an integer path."""
    ss = np.random.SeedSequence(int(seed) & _UINT64, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def stratified_assignments(y, k: int, seed: int) -> np.ndarray:
    y = np.asarray(y)
    n = len(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if not (2 <= k <= n) or len(pos) < k or len(neg) < k:
        raise InfeasibleSplit(
            f"k={k} infeasible for n={n} with {len(pos)} positives and {len(neg)} negatives")
    rng = np.random.default_rng(int(seed) & _UINT64)
    pos = rng.permutation(pos)
    neg = rng.permutation(neg)
    out = np.empty(n, dtype=np.int64)
    out[pos] = np.arange(len(pos)) % k
    # continue dealing where the positives stopped so fold sizes stay balanced
    out[neg] = (np.arange(len(neg)) + len(pos)) % k
    out.setflags(write=False)
    return out


def stratified_kfold(cohort: Cohort, k: int, seed: int) -> FoldPlan:
    return FoldPlan(k, stratified_assignments(cohort.outcome, k, seed), int(seed))


@dataclass(frozen=True, eq=False)
class NestedFold:
    fold: int
    train_rows: np.ndarray
    test_rows: np.ndarray
    inner: FoldPlan  # indices relative to train_rows


def inner_plan(y_train, k_inner: int, seed: int, fold: int) -> FoldPlan:
    s = child_seed(seed, fold)
    return FoldPlan(k_inner, stratified_assignments(y_train, k_inner, s), s)


def nested_folds(cohort: Cohort, k_outer: int, k_inner: int, seed: int,
                 outer: FoldPlan | None = None) -> list:
    outer = outer or stratified_kfold(cohort, k_outer, seed)
    out = []
    for f, train, test in outer.folds():
        out.append(NestedFold(f, train, test, inner_plan(cohort.outcome[train], k_inner, seed, f)))
    return out


def groups_to_codes(labels: Iterable) -> tuple:
    """Sorted unique labels and integer codes into them."""
    labels = np.asarray(list(labels) if not isinstance(labels, np.ndarray) else labels, dtype=object)
    uniq = sorted(set(labels.tolist()), key=str)
    lookup = {g: i for i, g in enumerate(uniq)}
    return uniq, np.array([lookup[g] for g in labels], dtype=np.int64)
