"""Seeded random data for the property suites.

All generators take a ``numpy.random.Generator``; the suites build it with
``numpy.random.default_rng(seed)`` (PCG64), so a seed pins every draw.
"""
from __future__ import annotations

import numpy as np

from .averaging import AveragingSpec
from .data import FiniteSupport, Geometric
from .tree import TreeShape, iter_vertices

FUZZ_OPERATORS = (
    ("mean", None, None),
    ("p_average", 3.0, None),
    ("p_average", 1.5, None),
    ("minmax_mean", None, 0.5),
    ("median_mean", None, 0.5),
    ("median_midrange", None, 0.5),
)


def fuzz_operator(rng: np.random.Generator, m: int) -> AveragingSpec:
    kind, p, alpha = FUZZ_OPERATORS[rng.integers(len(FUZZ_OPERATORS))]
    return AveragingSpec(kind, m, p, alpha)


def random_finite_support(shape: TreeShape, mu: int, rng: np.random.Generator,
                          density: float = 0.6, scale: float = 1.0) -> FiniteSupport:
    """Values in [-scale, scale] on levels <= mu, at least one nonzero value on level mu."""
    if mu > shape.depth:
        raise ValueError("mu exceeds the tree depth")
    table = {}
    for path in iter_vertices(shape):
        if len(path) > mu:
            break
        if rng.random() < density:
            table[path] = float(rng.uniform(-scale, scale))
    top = tuple(int(d) for d in rng.integers(0, shape.branching, size=mu))
    if table.get(top, 0.0) == 0.0:
        table[top] = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 1.0) * scale)
    return FiniteSupport(table)


def random_geometric(shape: TreeShape, k: float, lam: float,
                     rng: np.random.Generator) -> Geometric:
    """k (1 - lam)^level times independent weights uniform in [-1, 1]."""
    weights = {path: float(rng.uniform(-1.0, 1.0)) for path in iter_vertices(shape)}
    return Geometric(k, lam, weights)


def random_bounded(shape: TreeShape, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Arbitrary bounded values on every stored vertex, by rank."""
    return rng.uniform(-scale, scale, size=shape.n_vertices)


def random_ordered_pair(shape: TreeShape, rng: np.random.Generator, scale: float = 1.0):
    """(f, g) arrays with f <= g pointwise; about a third of the vertices tie."""
    f = rng.uniform(-scale, scale, size=shape.n_vertices)
    gap = rng.uniform(0.0, scale, size=shape.n_vertices)
    gap[rng.random(shape.n_vertices) < 1 / 3] = 0.0
    return f, f + gap
