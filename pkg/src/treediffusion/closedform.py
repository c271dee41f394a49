"""Exact solutions used as oracles for the numerical solver.

Functions taking a ``path`` also accept a plain integer, read as the level;
every solution here depends on the vertex only through its level except the
finite-support polynomials.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence

import numpy as np

from .averaging import AveragingSpec
from .data import FiniteSupport, LevelFunction, TimeGrid
from .exceptions import DomainError, UnsupportedOperator
from .tree import TreeShape, format_path, iter_vertices


def _level_of(path) -> int:
    if isinstance(path, (int, np.integer)):
        if path < 0:
            raise DomainError("level must be non-negative")
        return int(path)
    return len(path)


def monomial_example(n: int, path, t: float) -> float:
    """e^{-t} n!/(n-l)! t^(n-l) for l <= n, else 0: the solution from the datum n! on level n."""
    if n < 0 or t < 0:
        raise DomainError("need n >= 0 and t >= 0")
    lvl = _level_of(path)
    if lvl > n:
        return 0.0
    return math.exp(-t) * (math.factorial(n) // math.factorial(n - lvl)) * t ** (n - lvl)


def geometric_eigen(k: float, lam: float, path, t: float) -> float:
    """k e^{-lam t} (1 - lam)^l, the separable solution from the datum k (1 - lam)^l."""
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}; see scaling_eigen")
    return k * math.exp(-lam * t) * (1.0 - lam) ** _level_of(path)


def scaling_eigen(C: float, lam: float, path, t: float) -> float:
    """C e^{(lam - 1) t} lam^l; grows in t for lam > 1."""
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    return C * math.exp((lam - 1.0) * t) * lam ** _level_of(path)


# -- level-constant solutions generated from a_0(t) = (1 + t)^-alpha
#
# a_n(t) = sum_j c_{n,j} (1 + t)^(-alpha - j) with
# c_{n,j} = binom(n, j) (-1)^j (alpha)_j, (alpha)_j the rising factorial.


def power_law_coefficients(alpha, n: int) -> List[Fraction]:
    """Exact c_{n,0..n}; ``alpha`` is converted to a Fraction without rounding."""
    if n < 0:
        raise DomainError("n must be non-negative")
    a = Fraction(alpha)
    out = []
    rising = Fraction(1)
    for j in range(n + 1):
        out.append(math.comb(n, j) * (-1) ** j * rising)
        rising *= a + j
    return out


def recursion_step(coeffs: Sequence[Fraction], alpha) -> List[Fraction]:
    """Coefficients of a' + a given those of a, in the (1 + t)^(-alpha - j) basis."""
    a = Fraction(alpha)
    out = list(coeffs) + [Fraction(0)]
    for j, c in enumerate(coeffs):
        out[j + 1] -= (a + j) * c
    return out


def _check_t(t):
    if not t > -1:
        raise DomainError(f"t must exceed -1, got {t}")


def _exact_series(weights, t) -> float:
    """sum_j weights[j] (1 + t)^-j in exact arithmetic, rounded once."""
    y = 1 + Fraction(t)
    n = len(weights) - 1
    acc = Fraction(0)
    for w in weights:  # Horner in y on sum_j w_j y^(n - j)
        acc = acc * y + w
    return float(acc / y ** n)


def level_constant_solution(alpha: float, n: int, t: float) -> float:
    """a_n(t), the value on level n of the solution with u(root, t) = (1 + t)^-alpha.

    The alternating coefficient sum cancels heavily for large n, so it is
    summed exactly and only the power (1 + t)^-alpha is taken in floating point.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    _check_t(t)
    coeffs = power_law_coefficients(alpha, n)
    return (1.0 + t) ** (-alpha) * _exact_series(coeffs, t)


def level_constant_derivative(alpha: float, n: int, t: float) -> float:
    """d/dt a_n(t), differentiated term by term."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    _check_t(t)
    a = Fraction(alpha)
    coeffs = power_law_coefficients(alpha, n)
    weights = [-c * (a + j) for j, c in enumerate(coeffs)]
    return (1.0 + t) ** (-alpha - 1.0) * _exact_series(weights, t)


def level_constant_datum(alpha, n: int) -> Fraction:
    """a_n(0) in exact arithmetic."""
    return sum(power_law_coefficients(alpha, n), Fraction(0))


def subfactorial_datum(n: int) -> int:
    """(-1)^n !n, via !n = n !(n-1) + (-1)^n with Python integers (no overflow)."""
    if n < 0:
        raise DomainError("n must be non-negative")
    d = 1
    for k in range(1, n + 1):
        d = k * d + (-1) ** k
    return (-1) ** n * d


@dataclass(frozen=True)
class LevelSequenceSolution:
    """Level trajectories a_0, a_1, ... with a_{i+1} = a_i' + a_i.

    Built either from ``alpha`` (a_0 = (1 + t)^-alpha) or from a polynomial
    ``a_0`` given by increasing-order coefficients.
    """

    alpha: float = None
    polynomial: tuple = None

    def __post_init__(self):
        if (self.alpha is None) == (self.polynomial is None):
            raise DomainError("give exactly one of alpha or polynomial")
        if self.polynomial is not None:
            object.__setattr__(self, "polynomial", tuple(float(c) for c in self.polynomial))

    def _poly(self, n):
        P = np.polynomial.Polynomial(self.polynomial)
        total = np.polynomial.Polynomial([0.0])
        deriv = P
        for j in range(n + 1):
            total = total + math.comb(n, j) * deriv
            deriv = deriv.deriv()
        return total

    def value(self, n: int, t: float) -> float:
        if self.alpha is not None:
            return level_constant_solution(self.alpha, n, t)
        return float(self._poly(n)(t))

    def derivative(self, n: int, t: float) -> float:
        if self.alpha is not None:
            return level_constant_derivative(self.alpha, n, t)
        return float(self._poly(n).deriv()(t))

    def recursion_residual(self, n_max: int, times) -> float:
        """max |a_{i+1} - a_i' - a_i| over i < n_max and the given times."""
        worst = 0.0
        for t in np.atleast_1d(times):
            for i in range(n_max):
                r = self.value(i + 1, t) - self.derivative(i, t) - self.value(i, t)
                worst = max(worst, abs(r))
        return worst


# -- finite-support data under the arithmetic mean


@dataclass(frozen=True)
class PolynomialSolution:
    """e^t u(x, t) = sum_j coeffs[rank][j] t^j on every stored vertex (exact rationals)."""

    shape: TreeShape
    coeffs: tuple

    def degree(self, rank: int) -> int:
        return len(self.coeffs[rank]) - 1

    def root_coeffs(self) -> tuple:
        return self.coeffs[0]

    def value(self, rank: int, t: float) -> float:
        c = self.coeffs[rank]
        return math.exp(-t) * math.fsum(float(cj) * t ** j for j, cj in enumerate(c))

    def field_values(self, grid: TimeGrid) -> np.ndarray:
        """Values on every (node, rank), shape (steps + 1, n_vertices)."""
        t = grid.nodes
        width = max(len(c) for c in self.coeffs)
        C = np.zeros((len(self.coeffs), width))
        for r, c in enumerate(self.coeffs):
            C[r, :len(c)] = [float(x) for x in c]
        powers = t[:, None] ** np.arange(width)[None, :]
        return np.exp(-t)[:, None] * (powers @ C.T)

    def rows(self):
        """(vertex, level, degree, c0, c1, ...) per stored vertex, rank order."""
        for r, path in enumerate(iter_vertices(self.shape)):
            c = self.coeffs[r]
            yield (format_path(path), len(path), len(c) - 1, *c)


def finite_support_exact(shape: TreeShape, f, spec: AveragingSpec = None) -> PolynomialSolution:
    """Propagate the datum bottom-up: integrate the mean of the children's polynomials.

    Exact only for the arithmetic mean, so any other operator is refused.
    """
    if spec is not None and spec.kind != "mean":
        raise UnsupportedOperator(
            f"closed-form propagation needs the arithmetic mean, not {spec.label()}"
        )
    if spec is not None and spec.arity != shape.branching:
        raise DomainError("operator arity does not match the tree branching")
    if not isinstance(f, (FiniteSupport, LevelFunction)):
        raise DomainError("finite_support_exact needs a finite-support datum")
    mu = max(f.support_level - 1, 0)
    if mu > shape.depth:
        raise DomainError(f"datum reaches level {mu}, below depth {shape.depth}")
    vals = f.values(shape)
    m = shape.branching
    coeffs: list = [None] * shape.n_vertices
    for lvl in range(shape.depth, -1, -1):
        sl = shape.level_slice(lvl)
        for r in range(sl.start, sl.stop):
            c0 = Fraction(vals[r])
            if lvl >= mu or lvl == shape.depth:
                coeffs[r] = (c0,)
                continue
            kids = [coeffs[k] for k in range(m * r + 1, m * r + m + 1)]
            width = max(len(k) for k in kids)
            mean = [sum((k[j] for k in kids if j < len(k)), Fraction(0)) / m
                    for j in range(width)]
            coeffs[r] = (c0, *(mj / (j + 1) for j, mj in enumerate(mean)))
    return PolynomialSolution(shape=shape, coeffs=tuple(coeffs))
