"""Experiment configuration: JSON file plus command-line overrides.

Schema (every key optional except where a command needs it)::

    {
      "operator": {"kind": "mean" | "p_average" | "median_mean" | "median_midrange"
                           | "minmax_mean", "p": 3.0, "alpha": 0.5, "arity": 3},
      "datum":    {"kind": "finite_support", "table": {"": 1.0, "0.2": -0.5}}
                | {"kind": "geometric", "k": 1.0, "lambda": 0.5, "weights": {...}}
                | {"kind": "level_function", "levels": [0, 0, 2]}
                | {"kind": "scaling_eigen", "C": 1.0, "lambda": 2.0}
                | {"kind": "fn", "n": 3},
      "tree":     {"m": 3, "depth": 6},
      "grid":     {"t_end": 10.0, "steps": 10000},
      "closure":  {"kind": "zero" | "geometric_envelope" | "eigen_extension"
                           | "level_extension", ...},
      "options":  {...command specific...},
      "seed":     0
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .averaging import AveragingSpec
from .data import (ClosureRule, EigenExtension, Geometric, GeometricEnvelope, InitialDatum,
                   LevelExtension, ScalingEigen, TimeGrid, ZeroBoundary, closure_from_dict,
                   datum_from_dict)
from .exceptions import ConfigError, TreeDiffusionError
from .tree import TreeShape

TOP_LEVEL_KEYS = {"operator", "datum", "tree", "grid", "closure", "options", "seed"}


@dataclass
class ExperimentConfig:
    operator: AveragingSpec = field(default_factory=lambda: AveragingSpec("mean", 2))
    datum: Optional[InitialDatum] = None
    m: int = 2
    depth: int = 4
    grid: TimeGrid = field(default_factory=lambda: TimeGrid(10.0, 10_000))
    closure: ClosureRule = field(default_factory=ZeroBoundary)
    options: dict = field(default_factory=dict)
    seed: int = 0

    def shape(self) -> TreeShape:
        return TreeShape(self.m, self.depth)

    def validate(self) -> "ExperimentConfig":
        if self.operator.arity != self.m:
            raise ConfigError(f"operator.arity: {self.operator.arity} does not match tree.m {self.m}")
        if isinstance(self.closure, GeometricEnvelope) and not isinstance(self.datum, (Geometric, type(None))):
            raise ConfigError("closure.kind: geometric_envelope needs a geometric datum")
        if isinstance(self.closure, EigenExtension) and not isinstance(self.datum, (ScalingEigen, type(None))):
            raise ConfigError("closure.kind: eigen_extension needs a scaling_eigen datum")
        if isinstance(self.datum, ScalingEigen) and not isinstance(self.closure, EigenExtension):
            raise ConfigError("closure.kind: scaling_eigen data need an eigen_extension closure")
        if isinstance(self.closure, LevelExtension) and self.datum is not None \
                and self.datum.kind != "level_function":
            raise ConfigError("closure.kind: level_extension needs a level_function datum")
        return self

    def to_dict(self) -> dict:
        return {
            "operator": self.operator.to_dict(),
            "datum": None if self.datum is None else self.datum.to_dict(),
            "tree": {"m": self.m, "depth": self.depth},
            "grid": self.grid.to_dict(),
            "closure": self.closure.to_dict(),
            "options": dict(self.options),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - TOP_LEVEL_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        section = None
        try:
            section = "tree"
            tree = dict(data.get("tree") or {})
            m = int(tree.get("m", 2))
            depth = int(tree.get("depth", 4))
            section = "operator"
            op = dict(data.get("operator") or {"kind": "mean"})
            op.setdefault("arity", m)
            operator = AveragingSpec.from_dict(op)
            section = "datum"
            datum = None if data.get("datum") is None else datum_from_dict(data["datum"])
            section = "grid"
            g = dict(data.get("grid") or {})
            grid = TimeGrid(float(g.get("t_end", 10.0)), int(g.get("steps", 10_000)))
            section = "closure"
            closure = closure_from_dict(data.get("closure"))
            section = "seed"
            seed = int(data.get("seed", 0))
        except (TreeDiffusionError, TypeError, ValueError) as exc:
            raise ConfigError(f"{section}: {exc}") from None
        return cls(operator=operator, datum=datum, m=m, depth=depth, grid=grid,
                   closure=closure, options=dict(data.get("options") or {}), seed=seed)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def load_config(path) -> dict:
    """Raw config dict from a JSON file (validated later, after flag overrides)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return data
