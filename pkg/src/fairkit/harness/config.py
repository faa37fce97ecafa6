"""Experiment configuration files (YAML or JSON)."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from ..cohort import Cohort, load_csv, load_schema
from ..errors import ConfigError
from ..mitigation import MitigationSpec
from ..models import GBT, LOGISTIC, default_grid
from ..models.gbt import GbtConfig
from ..models.logistic import LogisticConfig
from ..synth import CohortSpec, generate_cohort

_CONFIG_TYPES = {LOGISTIC: LogisticConfig, GBT: GbtConfig}


@dataclass
class ExperimentConfig:
    """Everything one experiment run needs.

    Keys in the file mirror the field names. ``data`` is either
    ``{csv: path, schema: path}`` or ``{cohort: <synthetic cohort spec>}``;
    ``mitigations`` lists method names or ``{method: NAME, <params>}``
    mappings and is applied to every attribute in ``protected``.
    """

    data: dict
    protected: list
    model: str = LOGISTIC
    grid: list | None = None
    k_outer: int = 10
    k_inner: int = 3
    seed: int = 0
    mitigations: list = field(default_factory=list)
    output_dir: str = "out"
    alpha: float = 0.05
    band: float = 0.1
    metric: str = "bacc"
    postprocess_fit: str = "oof"
    privileged: dict = field(default_factory=dict)
    base_dir: str = "."

    def __post_init__(self):
        if self.model not in _CONFIG_TYPES:
            raise ConfigError(f"unknown model kind {self.model!r}")
        if isinstance(self.protected, str):
            self.protected = [self.protected]
        if not self.protected:
            raise ConfigError("at least one protected attribute is required")
        if self.k_outer < 2 or self.k_inner < 2:
            raise ConfigError("k_outer and k_inner must be >= 2")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        if not self.band > 0:
            raise ConfigError("band must be > 0 (it is symmetric around 0)")
        if self.metric not in ("bacc", "auc"):
            raise ConfigError(f"unknown selection metric {self.metric!r}")
        if self.postprocess_fit not in ("oof", "in_sample"):
            raise ConfigError("postprocess_fit must be 'oof' or 'in_sample'")
        if not isinstance(self.data, dict) or not ({"csv", "schema"} <= set(self.data) or "cohort" in self.data):
            raise ConfigError("data needs either csv+schema or cohort")
        self.seed = int(self.seed)

    # -- derived ------------------------------------------------------------
    def model_grid(self) -> list:
        if self.grid is None:
            return default_grid(self.model)
        cls = _CONFIG_TYPES[self.model]
        try:
            return [cls(**entry) for entry in self.grid]
        except TypeError as exc:
            raise ConfigError(f"bad grid entry: {exc}") from None

    def mitigation_specs(self) -> list:
        specs = []
        for attr in self.protected:
            for entry in self.mitigations:
                if isinstance(entry, str):
                    specs.append(MitigationSpec(entry, attr))
                else:
                    entry = dict(entry)
                    method = entry.pop("method", None)
                    if method is None:
                        raise ConfigError("mitigation entry lacks 'method'")
                    specs.append(MitigationSpec(method, attr, entry))
        return specs

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def load_cohort(self) -> Cohort:
        if "cohort" in self.data:
            spec = dict(self.data["cohort"])
            return generate_cohort(CohortSpec.from_dict(spec))
        schema = load_schema(self.resolve(self.data["schema"]))
        return load_csv(self.resolve(self.data["csv"]), schema)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "base_dir"}
        d["grid"] = [vars(c).copy() for c in self.model_grid()]
        return d

    @classmethod
    def from_dict(cls, d, base_dir=".") -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "data" not in d or "protected" not in d:
            raise ConfigError("configuration needs 'data' and 'protected'")
        d = dict(d)
        d.setdefault("base_dir", str(base_dir))
        return cls(**d)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig.from_dict(doc, base_dir=path.parent)
