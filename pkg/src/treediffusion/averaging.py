"""Averaging operators F: R^m -> R and randomized checks of the averaging axioms.

Axioms checked by :func:`verify_axioms`:

    (i)   F(0,...,0) = 0 and F(1,...,1) = 1
    (ii)  F(t x) = t F(x) for every real t
    (iii) F(t + x) = t + F(x)
    (iv)  F(x) < max x unless all coordinates are equal
    (v)   F is nondecreasing in each coordinate

together with the 1-Lipschitz bound |F(x) - F(y)| <= max_j |x_j - y_j|
that follows from (iii) and (v).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ArityError, DomainError

KINDS = (
    "mean",
    "p_average",
    "median_mean",
    "median_midrange",
    "minmax_mean",
)

# accepted spellings on the command line / in configs
_ALIASES = {
    "arithmetic_mean": "mean",
    "arithmeticmean": "mean",
    "paverage": "p_average",
    "p-average": "p_average",
    "median_mean_blend": "median_mean",
    "medianmeanblend": "median_mean",
    "median_midrange_blend": "median_midrange",
    "medianmidrangeblend": "median_midrange",
    "minmax_mean_blend": "minmax_mean",
    "minmaxmeanblend": "minmax_mean",
}

BISECTION_TOL = 1e-14
BISECTION_MAXITER = 200
AXIOM_TOL = 1e-9


def canonical_kind(kind: str) -> str:
    key = kind.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in KINDS:
        raise DomainError(f"unknown averaging operator {kind!r}; expected one of {KINDS}")
    return key


@dataclass(frozen=True)
class AveragingSpec:
    """Which averaging operator to use and its parameters.

    ``p`` is only meaningful for ``p_average``; ``alpha`` is the weight of the
    median (``median_*``) or of the midrange (``minmax_mean``).
    """

    kind: str = "mean"
    arity: int = 2
    p: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if int(self.arity) != self.arity or self.arity < 2:
            raise DomainError(f"arity must be an integer >= 2, got {self.arity}")
        if self.kind == "p_average":
            if self.p is None or not self.p > 1 or not math.isfinite(self.p):
                raise DomainError(f"p_average needs finite p > 1, got {self.p}")
        elif self.p is not None:
            raise DomainError(f"{self.kind} takes no p parameter")
        if self.kind in ("median_mean", "median_midrange"):
            if self.alpha is None or not 0.0 <= self.alpha <= 1.0:
                raise DomainError(f"{self.kind} needs alpha in [0, 1], got {self.alpha}")
        elif self.kind == "minmax_mean":
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise DomainError(f"minmax_mean needs alpha in (0, 1), got {self.alpha}")
        elif self.alpha is not None:
            raise DomainError(f"{self.kind} takes no alpha parameter")

    def with_arity(self, arity: int) -> "AveragingSpec":
        return AveragingSpec(self.kind, arity, self.p, self.alpha)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "arity": int(self.arity)}
        if self.p is not None:
            out["p"] = self.p
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "AveragingSpec":
        unknown = set(data) - {"kind", "arity", "p", "alpha"}
        if unknown:
            raise DomainError(f"unknown averaging fields: {sorted(unknown)}")
        return cls(
            kind=data.get("kind", "mean"),
            arity=int(data.get("arity", 2)),
            p=None if data.get("p") is None else float(data["p"]),
            alpha=None if data.get("alpha") is None else float(data["alpha"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AveragingSpec":
        return cls.from_dict(json.loads(text))

    def label(self) -> str:
        if self.kind == "p_average":
            return f"p_average(p={self.p:g})"
        if self.alpha is not None:
            return f"{self.kind}(alpha={self.alpha:g})"
        return self.kind


def _mean_rows(X):
    # shifted by the row minimum so constant rows come back exactly
    lo = X.min(axis=1)
    return lo + (X - lo[:, None]).mean(axis=1)


def _median_rows(X):
    # standard median: middle order statistic (odd m), mean of the two middle (even m)
    m = X.shape[1]
    if m % 2:
        return np.partition(X, m // 2, axis=1)[:, m // 2]
    part = np.partition(X, (m // 2 - 1, m // 2), axis=1)
    return 0.5 * (part[:, m // 2 - 1] + part[:, m // 2])


def _p_average_rows(X, p):
    lo = X.min(axis=1)
    hi = X.max(axis=1)
    active = hi - lo > BISECTION_TOL
    if not active.any():
        return 0.5 * (lo + hi) if X.shape[0] else lo
    q = p - 1.0
    Xa = X[active]
    a, b = lo[active], hi[active]
    for _ in range(BISECTION_MAXITER):
        mid = 0.5 * (a + b)
        # done once the bracket is narrow or no float separates the endpoints
        if np.all((b - a <= BISECTION_TOL) | (mid == a) | (mid == b)):
            break
        d = Xa - mid[:, None]
        g = (np.sign(d) * np.abs(d) ** q).sum(axis=1)
        right = g > 0  # g decreases in t, so g(mid) > 0 puts the root above mid
        a = np.where(right, mid, a)
        b = np.where(right, b, mid)
    out = 0.5 * (lo + hi)
    out[active] = 0.5 * (a + b)
    return out


def evaluate_rows(spec: AveragingSpec, X) -> np.ndarray:
    """Apply F to every row of the (n, m) array ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.arity:
        raise ArityError(f"expected rows of length {spec.arity}, got shape {X.shape}")
    kind = spec.kind
    if kind == "mean":
        return _mean_rows(X)
    if kind == "p_average":
        if not np.isfinite(X).all():
            raise DomainError("p_average requires finite values")
        return _p_average_rows(X, spec.p)
    alpha = spec.alpha
    if kind == "minmax_mean":
        mean = _mean_rows(X)
        mid = 0.5 * (X.max(axis=1) + X.min(axis=1))
        return mean + alpha * (mid - mean)
    med = _median_rows(X)
    if kind == "median_mean":
        other = _mean_rows(X)
    else:
        other = 0.5 * (X.max(axis=1) + X.min(axis=1))
    if alpha == 1.0:
        return med
    # written as a correction to the other average so constant rows map to themselves exactly
    return other + alpha * (med - other)


def evaluate(spec: AveragingSpec, values) -> float:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.shape[0] != spec.arity:
        raise ArityError(f"expected {spec.arity} values, got shape {values.shape}")
    return float(evaluate_rows(spec, values[None, :])[0])


def p_average(values, p: float) -> float:
    """The t in [min x, max x] with sum_j sign(x_j - t)|x_j - t|^(p-1) = 0."""
    values = np.asarray(values, dtype=float)
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")
    if values.ndim != 1 or values.size == 0:
        raise DomainError("p_average needs a non-empty vector")
    if not np.isfinite(values).all():
        raise DomainError("p_average requires finite values")
    return float(_p_average_rows(values[None, :], float(p))[0])


@dataclass
class AxiomReport:
    spec: AveragingSpec
    samples: int
    passed: dict = field(default_factory=dict)
    counterexample: Optional[dict] = None

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        return {
            "operator": self.spec.to_dict(),
            "samples": self.samples,
            "passed": dict(self.passed),
            "all_passed": self.all_passed,
            "counterexample": self.counterexample,
        }


AXIOMS = ("normalization", "homogeneity", "translation", "strict_max", "monotone", "lipschitz")


def _tie_probes(m):
    # random continuous samples never produce ties, which is where medians break (iv)
    probes = []
    for k in range(1, m):
        probes.append([0.0] * k + [1.0] * (m - k))
    for k in range(1, m):
        probes.append([1.0] * k + [0.0] * (m - k))
    return np.array(probes)


def verify_axioms(spec: AveragingSpec, sample_count: int = 1000, seed: int = 0,
                  tol: float = AXIOM_TOL) -> AxiomReport:
    """Check the averaging axioms and the Lipschitz bound on seeded random vectors.

    Vectors are drawn with ``numpy.random.default_rng(seed)`` (PCG64).  Axiom
    (iv) is additionally probed on 0/1 vectors with ties.  The first violation
    found is recorded as ``{"axiom", "x", ...}``.
    """
    if sample_count < 1:
        raise DomainError("sample_count must be >= 1")
    m = spec.arity
    rng = np.random.default_rng(seed)
    report = AxiomReport(spec=spec, samples=sample_count, passed={a: True for a in AXIOMS})

    def fail(axiom, **details):
        report.passed[axiom] = False
        if report.counterexample is None:
            report.counterexample = {"axiom": axiom, **{
                k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in details.items()
            }}

    F = lambda X: evaluate_rows(spec, X)  # noqa: E731

    zero, one = F(np.zeros((1, m)))[0], F(np.ones((1, m)))[0]
    if zero != 0.0:
        fail("normalization", x=np.zeros(m), value=float(zero))
    if one != 1.0:
        fail("normalization", x=np.ones(m), value=float(one))

    X = rng.normal(scale=2.0, size=(sample_count, m))
    Y = rng.normal(scale=2.0, size=(sample_count, m))
    t = rng.normal(scale=3.0, size=sample_count)  # both signs
    s = rng.normal(scale=3.0, size=sample_count)
    j = rng.integers(0, m, size=sample_count)
    bump = rng.exponential(scale=1.0, size=sample_count)
    FX = F(X)

    def first_bad(mask):
        idx = np.flatnonzero(mask)
        return int(idx[0]) if idx.size else None

    i = first_bad(np.abs(F(t[:, None] * X) - t * FX) > tol)
    if i is not None:
        fail("homogeneity", x=X[i], t=float(t[i]))

    i = first_bad(np.abs(F(s[:, None] + X) - (s + FX)) > tol)
    if i is not None:
        fail("translation", x=X[i], t=float(s[i]))

    probes = np.vstack([_tie_probes(m), X])
    Fp = F(probes)
    not_const = probes.max(axis=1) > probes.min(axis=1)
    i = first_bad(not_const & ~(Fp < probes.max(axis=1)))
    if i is not None:
        fail("strict_max", x=probes[i], value=float(Fp[i]))

    Xb = X.copy()
    Xb[np.arange(sample_count), j] += bump
    i = first_bad(F(Xb) < FX - tol)
    if i is not None:
        fail("monotone", x=X[i], coordinate=int(j[i]), increment=float(bump[i]))

    i = first_bad(np.abs(FX - F(Y)) > np.abs(X - Y).max(axis=1) + tol)
    if i is not None:
        fail("lipschitz", x=X[i], y=Y[i])

    return report
