"""Decay bounds for finite-support and geometrically decaying data, and reports
comparing solver output against them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import FiniteSupport, Geometric, LevelFunction
from .exceptions import DomainError
from .solver import SolutionField

REL_TOL = 1e-6
GEOMETRIC_ATOL = 1e-9


@dataclass(frozen=True)
class SupportStats:
    a: int
    mu: int
    sup_norm: float

    def to_dict(self) -> dict:
        return {"a": self.a, "mu": self.mu, "sup_norm": self.sup_norm}


def support_stats(f) -> SupportStats:
    """a(f) (first level from which f vanishes), mu(f) = max(a - 1, 0) and sup |f|."""
    if not isinstance(f, (FiniteSupport, LevelFunction)):
        raise DomainError("support statistics need a finite-support datum")
    a = f.support_level
    return SupportStats(a=a, mu=a - 1 if a > 0 else 0, sup_norm=f.sup_norm)


def finite_support_bound(stats: SupportStats, t):
    """t^mu e^{-t} / mu! * sup|f|; scalar or array ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("t must be non-negative")
    out = t_arr ** stats.mu * np.exp(-t_arr) / math.factorial(stats.mu) * stats.sup_norm
    return float(out) if out.ndim == 0 else out


def geometric_bound(k: float, lam: float, t):
    """k e^{-lam t}."""
    if not k > 0:
        raise DomainError("k must be positive")
    if not 0.0 < lam < 1.0:
        raise DomainError("lambda must lie in (0, 1)")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("t must be non-negative")
    out = k * np.exp(-lam * t_arr)
    return float(out) if out.ndim == 0 else out


@dataclass
class DecayReport:
    kind: str
    bound_params: dict
    times: np.ndarray
    max_abs_u: np.ndarray
    bound: np.ndarray
    passed: np.ndarray
    first_valid_time: Optional[float]
    monotone: bool = True
    tolerances: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        """Bound holds from ``first_valid_time`` on (for every node if geometric)."""
        if self.kind == "geometric":
            return bool(self.passed.all())
        return self.first_valid_time is not None

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.bound > 0, self.max_abs_u / self.bound, np.nan)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "bound_params": self.bound_params,
            "first_valid_time": self.first_valid_time,
            "monotone": self.monotone,
            "ok": self.ok,
            "tolerances": self.tolerances,
            "nodes": [
                {"t": float(t), "max_abs_u": float(u), "bound": float(b), "pass": bool(p)}
                for t, u, b, p in zip(self.times, self.max_abs_u, self.bound, self.passed)
            ],
        }

    def rows(self):
        for t, u, b in zip(self.times, self.max_abs_u, self.bound):
            yield float(t), float(u), float(b)


def _first_valid(times, passed):
    failing = np.flatnonzero(~passed)
    if failing.size == 0:
        return float(times[0]) if times.size else 0.0
    last = failing[-1]
    if last == passed.size - 1:
        return None
    return float(times[last + 1])


def check_decay(field: SolutionField, params, kind: str, rtol: float = REL_TOL,
                atol: float = None) -> DecayReport:
    """Compare per-node max |u| over stored vertices with the decay bound.

    ``kind="finite_support"``: ``params`` is a :class:`SupportStats` or the datum;
    the bound is only expected to hold for large t, so the report carries the
    first node from which it holds through the end of the grid.

    ``kind="geometric"``: ``params`` is ``(k, lam)`` or a :class:`Geometric`
    datum; the bound must hold at every node.
    """
    if kind == "finite_support":
        if field.datum is not None and not isinstance(field.datum, (FiniteSupport, LevelFunction)):
            raise DomainError(f"{field.datum.kind} datum checked against the finite-support bound")
        stats = params if isinstance(params, SupportStats) else support_stats(params)
        bound = finite_support_bound(stats, field.grid.nodes)
        bound_params = stats.to_dict()
        atol = 0.0 if atol is None else atol
    elif kind == "geometric":
        if isinstance(params, Geometric):
            k, lam = params.k, params.lam
        else:
            k, lam = params
        envelope = k * (1.0 - lam) ** field.shape.levels.astype(float)
        if np.any(np.abs(field.initial) > envelope * (1.0 + 1e-12)):
            raise DomainError("initial datum exceeds the geometric envelope k (1 - lam)^level")
        bound = geometric_bound(k, lam, field.grid.nodes)
        bound_params = {"k": k, "lambda": lam}
        atol = GEOMETRIC_ATOL if atol is None else atol
    else:
        raise DomainError(f"unknown decay kind {kind!r}")

    observed = np.asarray(field.sup_norm, dtype=float)
    bound = np.asarray(bound, dtype=float)
    passed = observed <= bound * (1.0 + rtol) + atol
    first = _first_valid(field.grid.nodes, passed)
    seen_pass = np.maximum.accumulate(passed)
    monotone = not bool(np.any(seen_pass & ~passed))
    return DecayReport(kind=kind, bound_params=bound_params, times=field.grid.nodes.copy(),
                       max_abs_u=observed, bound=bound, passed=passed,
                       first_valid_time=first, monotone=monotone,
                       tolerances={"rtol": rtol, "atol": atol})
