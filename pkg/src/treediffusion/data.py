"""Initial data, closure rules and time grids."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple

import numpy as np

from .exceptions import DomainError
from .tree import TreeShape, VertexPath, check_path, format_path, iter_vertices, parse_path


def _as_path(key) -> VertexPath:
    if isinstance(key, str):
        return parse_path(key)
    return tuple(int(d) for d in key)


def _table_from(mapping) -> Tuple[Tuple[VertexPath, float], ...]:
    items = sorted(((_as_path(k), float(v)) for k, v in dict(mapping).items()),
                   key=lambda kv: (len(kv[0]), kv[0]))
    for path, value in items:
        if not math.isfinite(value):
            raise DomainError(f"non-finite datum value at {format_path(path)!r}")
    return tuple(items)


class InitialDatum:
    """Base class: a function on the tree, evaluable at any vertex."""

    kind = ""

    def __call__(self, path) -> float:
        raise NotImplementedError

    def values(self, shape: TreeShape) -> np.ndarray:
        """The datum on every stored vertex, by rank."""
        return np.array([self(p) for p in iter_vertices(shape)], dtype=float)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class FiniteSupport(InitialDatum):
    """Values given by a table; every vertex missing from it carries zero."""

    table: Tuple[Tuple[VertexPath, float], ...] = ()
    kind = "finite_support"

    def __init__(self, table=()):
        object.__setattr__(self, "table", _table_from(table))

    @property
    def mapping(self) -> dict:
        return dict(self.table)

    def __call__(self, path) -> float:
        return self.mapping.get(tuple(path), 0.0)

    @property
    def support_level(self) -> int:
        """a(f): one more than the deepest level carrying a nonzero value."""
        levels = [len(p) for p, v in self.table if v != 0.0]
        return max(levels) + 1 if levels else 0

    @property
    def sup_norm(self) -> float:
        return max((abs(v) for _, v in self.table), default=0.0)

    def values(self, shape: TreeShape) -> np.ndarray:
        out = np.zeros(shape.n_vertices)
        for path, value in self.table:
            check_path(path, shape.branching)
            if len(path) > shape.depth:
                if value != 0.0:
                    raise DomainError(
                        f"datum is nonzero at {format_path(path)!r}, below depth {shape.depth}"
                    )
                continue
            out[shape.rank(path)] = value
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "table": {format_path(p): v for p, v in self.table}}


@dataclass(frozen=True)
class Geometric(InitialDatum):
    """f(x) = k (1 - lam)^l(x) w(x) with optional per-vertex weights |w| <= 1 (default 1)."""

    k: float = 1.0
    lam: float = 0.5
    weights: Tuple[Tuple[VertexPath, float], ...] = ()
    kind = "geometric"

    def __init__(self, k=1.0, lam=0.5, weights=None):
        k, lam = float(k), float(lam)
        if not k > 0:
            raise DomainError(f"k must be positive, got {k}")
        if not 0.0 < lam < 1.0:
            raise DomainError(f"lambda must lie in (0, 1), got {lam}")
        table = _table_from(weights or {})
        if any(abs(w) > 1.0 for _, w in table):
            raise DomainError("geometric weights must satisfy |w| <= 1")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "weights", table)

    def __call__(self, path) -> float:
        w = dict(self.weights).get(tuple(path), 1.0)
        return self.k * (1.0 - self.lam) ** len(path) * w

    def values(self, shape: TreeShape) -> np.ndarray:
        out = self.k * (1.0 - self.lam) ** shape.levels.astype(float)
        for path, w in self.weights:
            if len(path) <= shape.depth:
                out[shape.rank(path)] *= w
        return out

    def envelope(self, lvl) -> float:
        return self.k * (1.0 - self.lam) ** lvl

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "k": self.k, "lambda": self.lam}
        if self.weights:
            out["weights"] = {format_path(p): w for p, w in self.weights}
        return out


@dataclass(frozen=True)
class LevelFunction(InitialDatum):
    """Constant on each level; levels past the end of ``levels`` carry zero."""

    levels: Tuple[float, ...] = ()
    kind = "level_function"

    def __init__(self, levels=()):
        vals = tuple(float(v) for v in levels)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("level values must be finite")
        object.__setattr__(self, "levels", vals)

    def __call__(self, path) -> float:
        lvl = len(path)
        return self.levels[lvl] if lvl < len(self.levels) else 0.0

    def values(self, shape: TreeShape) -> np.ndarray:
        per_level = np.zeros(shape.depth + 1)
        n = min(len(self.levels), shape.depth + 1)
        per_level[:n] = self.levels[:n]
        if any(v != 0.0 for v in self.levels[shape.depth + 1:]):
            raise DomainError(f"level datum is nonzero below depth {shape.depth}")
        return per_level[shape.levels]

    @property
    def support_level(self) -> int:
        nz = [i for i, v in enumerate(self.levels) if v != 0.0]
        return nz[-1] + 1 if nz else 0

    @property
    def sup_norm(self) -> float:
        return max((abs(v) for v in self.levels), default=0.0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "levels": list(self.levels)}


@dataclass(frozen=True)
class ScalingEigen(InitialDatum):
    """f(x) = C lam^l(x); unbounded when lam > 1."""

    C: float = 1.0
    lam: float = 1.0
    kind = "scaling_eigen"

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"lambda must be positive, got {self.lam}")

    def __call__(self, path) -> float:
        return self.C * self.lam ** len(path)

    def values(self, shape: TreeShape) -> np.ndarray:
        return self.C * float(self.lam) ** shape.levels.astype(float)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "C": self.C, "lambda": self.lam}


def monomial_datum(n: int) -> LevelFunction:
    """n! on level n and zero elsewhere; its solution attains the finite-support decay bound."""
    if n < 0:
        raise DomainError("n must be non-negative")
    return LevelFunction([0.0] * n + [float(math.factorial(n))])


def datum_from_dict(data: Mapping) -> InitialDatum:
    data = dict(data)
    kind = data.pop("kind", None)
    try:
        if kind == "finite_support":
            return FiniteSupport(data.pop("table", {}))
        if kind == "geometric":
            return Geometric(data.pop("k", 1.0), data.pop("lambda"), data.pop("weights", None))
        if kind == "level_function":
            return LevelFunction(data.pop("levels"))
        if kind == "scaling_eigen":
            return ScalingEigen(float(data.pop("C", 1.0)), float(data.pop("lambda")))
        if kind == "fn":
            return monomial_datum(int(data.pop("n")))
        if kind == "constant":
            return LevelFunction([float(data.pop("value", 1.0))] * (int(data.pop("depth")) + 1))
    except KeyError as exc:
        raise DomainError(f"datum {kind!r} is missing field {exc.args[0]!r}") from None
    raise DomainError(f"unknown datum kind {kind!r}")


# -- closure rules: value assumed at every successor of a vertex at the truncation depth


class ClosureRule:
    kind = ""

    def ghost(self, lvl: int, t: float) -> float:
        raise NotImplementedError

    def ghosts(self, lvl: int, times) -> np.ndarray:
        return np.array([self.ghost(lvl, float(t)) for t in np.atleast_1d(times)])

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroBoundary(ClosureRule):
    kind = "zero"

    def ghost(self, lvl, t):
        return 0.0

    def ghosts(self, lvl, times):
        return np.zeros(np.shape(np.atleast_1d(times)))

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class GeometricEnvelope(ClosureRule):
    """Ghosts follow the decaying eigen-solution k e^{-lam t} (1 - lam)^level."""

    k: float = 1.0
    lam: float = 0.5
    kind = "geometric_envelope"

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise DomainError(f"lambda must lie in (0, 1), got {self.lam}")

    def ghost(self, lvl, t):
        return self.k * math.exp(-self.lam * t) * (1.0 - self.lam) ** lvl

    def ghosts(self, lvl, times):
        return self.k * np.exp(-self.lam * np.atleast_1d(times)) * (1.0 - self.lam) ** lvl

    def to_dict(self):
        return {"kind": self.kind, "k": self.k, "lambda": self.lam}


@dataclass(frozen=True)
class EigenExtension(ClosureRule):
    """Ghosts follow C e^{(lam - 1) t} lam^level."""

    C: float = 1.0
    lam: float = 1.0
    kind = "eigen_extension"

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"lambda must be positive, got {self.lam}")

    def ghost(self, lvl, t):
        return self.C * math.exp((self.lam - 1.0) * t) * self.lam ** lvl

    def ghosts(self, lvl, times):
        return self.C * np.exp((self.lam - 1.0) * np.atleast_1d(times)) * float(self.lam) ** lvl

    def to_dict(self):
        return {"kind": self.kind, "C": self.C, "lambda": self.lam}


@dataclass(frozen=True)
class LevelExtension(ClosureRule):
    """Ghosts follow the level-constant solution generated by a_0(t) = (1 + t)^-alpha."""

    alpha: float = 1.0
    kind = "level_extension"

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")

    def ghost(self, lvl, t):
        from .closedform import level_constant_solution

        return level_constant_solution(self.alpha, lvl, t)

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha}


def closure_from_dict(data: Optional[Mapping]) -> ClosureRule:
    if not data:
        return ZeroBoundary()
    data = dict(data)
    kind = data.get("kind", "zero")
    try:
        if kind == "zero":
            return ZeroBoundary()
        if kind == "geometric_envelope":
            return GeometricEnvelope(float(data.get("k", 1.0)), float(data["lambda"]))
        if kind == "eigen_extension":
            return EigenExtension(float(data.get("C", 1.0)), float(data["lambda"]))
        if kind == "level_extension":
            return LevelExtension(float(data.get("alpha", 1.0)))
    except KeyError as exc:
        raise DomainError(f"closure {kind!r} is missing field {exc.args[0]!r}") from None
    raise DomainError(f"unknown closure kind {kind!r}")


def matching_closure(datum: InitialDatum) -> ClosureRule:
    """The closure that reproduces the datum's known solution below the truncation."""
    if isinstance(datum, Geometric):
        return GeometricEnvelope(datum.k, datum.lam)
    if isinstance(datum, ScalingEigen):
        return EigenExtension(datum.C, datum.lam)
    return ZeroBoundary()


@dataclass(frozen=True)
class TimeGrid:
    t_end: float = 10.0
    steps: int = 10_000

    def __post_init__(self):
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise DomainError(f"t_end must be positive, got {self.t_end}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"steps must be a positive integer, got {self.steps}")

    @classmethod
    def from_dt(cls, t_end: float, dt: float) -> "TimeGrid":
        steps = max(1, int(round(t_end / dt)))
        return cls(float(t_end), steps)

    @property
    def dt(self) -> float:
        return self.t_end / self.steps

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.steps + 1) * self.t_end / self.steps
        t[-1] = self.t_end
        return t

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_end, self.steps * factor)

    def to_dict(self) -> dict:
        return {"t_end": self.t_end, "steps": int(self.steps)}
