"""Run configuration: one archivable JSON file drives every CLI invocation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .ev_scenario import EVBinConfig
from .ingest import DEFAULT_SCHEMAS, Schema

CONFIG_ENV = "ENERGYSCEN_CONFIG"
NON_RESULT_FIELDS = ("output_dir", "threads")


@dataclass
class RunConfig:
    paths: dict = field(default_factory=dict)          # ev / pv / load / weather
    schemas: dict = field(default_factory=lambda: dict(DEFAULT_SCHEMAS))
    bins: EVBinConfig = field(default_factory=EVBinConfig)
    seed: int = 0
    output_dir: str = "out"
    format: str = "csv"
    peak_sampling: str = "marginal"
    max_attempts: int = 1000
    threads: int = 1
    fanchart_levels: tuple = (5, 25, 50, 75, 95)
    quantile_levels: tuple = (10, 25, 50, 75, 90)
    resolution_minutes: int = 15

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schemas"] = {k: v.to_dict() for k, v in self.schemas.items()}
        d["bins"] = self.bins.to_dict()
        d["fanchart_levels"] = list(self.fanchart_levels)
        d["quantile_levels"] = list(self.quantile_levels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        d = dict(d)
        schemas = dict(DEFAULT_SCHEMAS)
        for k, v in d.pop("schemas", {}).items():
            base = schemas.get(k)
            merged = {**base.to_dict(), **v} if base else v
            schemas[k] = Schema.from_dict(merged)
        bins = EVBinConfig.from_dict(d.pop("bins")) if "bins" in d else EVBinConfig()
        for key in ("fanchart_levels", "quantile_levels"):
            if key in d:
                d[key] = tuple(d[key])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(schemas=schemas, bins=bins, **d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path) -> RunConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    def config_hash(self) -> str:
        """Hash of the fields that can change results (not output_dir or threads)."""
        d = self.to_dict()
        for k in NON_RESULT_FIELDS:
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def meta(self, **extra) -> dict:
        m = {"tool": "energyscen", "version": __version__, "seed": self.seed,
             "config_hash": self.config_hash()}
        m.update(extra)
        return m
