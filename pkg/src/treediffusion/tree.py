"""Truncated directed m-ary tree: addressing, enumeration and the interval embedding.

Vertices are digit tuples; ``()`` is the root.  Stored vertices live in a flat
array indexed by level-order rank, so the successors of rank ``r`` occupy the
contiguous block ``m*r + 1 ... m*r + m``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence, Tuple

import numpy as np

from .exceptions import DomainError, TruncationBoundary, VertexBudgetExceeded

VertexPath = Tuple[int, ...]

DEFAULT_VERTEX_BUDGET = 5_000_000


def level(path: Sequence[int]) -> int:
    return len(path)


def format_path(path: Sequence[int]) -> str:
    """Dot-separated digits; the root is the empty string."""
    return ".".join(str(d) for d in path)


def parse_path(text: str) -> VertexPath:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(tok) for tok in text.split("."))
    except ValueError:
        raise DomainError(f"malformed vertex path {text!r}") from None


def check_path(path: Sequence[int], m: int) -> VertexPath:
    path = tuple(int(d) for d in path)
    for d in path:
        if not 0 <= d < m:
            raise DomainError(f"digit {d} out of range for branching {m}")
    return path


def vertex_count(m: int, depth: int) -> int:
    """Number of vertices of levels ``0..depth``: (m^(depth+1) - 1) / (m - 1)."""
    return (m ** (depth + 1) - 1) // (m - 1)


@dataclass(frozen=True)
class TreeShape:
    """Truncated m-ary tree holding levels ``0..depth``.

    ``m = 2`` is accepted even though the theory is usually stated for m > 2;
    nothing in the evolution results depends on that restriction.
    """

    branching: int
    depth: int
    budget: int = DEFAULT_VERTEX_BUDGET

    def __post_init__(self):
        if int(self.branching) != self.branching or self.branching < 2:
            raise DomainError(f"branching must be an integer >= 2, got {self.branching}")
        if int(self.depth) != self.depth or self.depth < 0:
            raise DomainError(f"depth must be a non-negative integer, got {self.depth}")
        if self.n_vertices > self.budget:
            raise VertexBudgetExceeded(
                f"m={self.branching}, depth={self.depth} needs {self.n_vertices} "
                f"vertices, budget is {self.budget}"
            )

    @property
    def m(self) -> int:
        return self.branching

    @property
    def n_vertices(self) -> int:
        return vertex_count(self.branching, self.depth)

    @property
    def n_internal(self) -> int:
        """Vertices with stored successors (levels ``0..depth-1``)."""
        return 0 if self.depth == 0 else vertex_count(self.branching, self.depth - 1)

    def level_offset(self, lvl: int) -> int:
        return 0 if lvl == 0 else vertex_count(self.branching, lvl - 1)

    def level_slice(self, lvl: int) -> slice:
        if not 0 <= lvl <= self.depth:
            raise DomainError(f"level {lvl} not stored (depth {self.depth})")
        start = self.level_offset(lvl)
        return slice(start, start + self.branching ** lvl)

    @cached_property
    def levels(self) -> np.ndarray:
        """Level of every stored vertex, by rank."""
        out = np.empty(self.n_vertices, dtype=np.int64)
        for lvl in range(self.depth + 1):
            out[self.level_slice(lvl)] = lvl
        return out

    def rank(self, path: Sequence[int]) -> int:
        path = check_path(path, self.branching)
        if len(path) > self.depth:
            raise DomainError(f"path {format_path(path)!r} lies below depth {self.depth}")
        r = 0
        for d in path:
            r = self.branching * r + 1 + d
        return r

    def path(self, rank: int) -> VertexPath:
        if not 0 <= rank < self.n_vertices:
            raise DomainError(f"rank {rank} out of range")
        digits = []
        m = self.branching
        while rank > 0:
            rank, d = divmod(rank - 1, m)
            digits.append(d)
        return tuple(reversed(digits))

    def parent_rank(self, rank: int) -> int:
        if rank <= 0:
            raise DomainError("the root has no parent")
        return (rank - 1) // self.branching

    def child_ranks(self, rank: int) -> range:
        if rank >= self.n_internal:
            raise TruncationBoundary(f"rank {rank} is at the truncation depth")
        start = self.branching * rank + 1
        return range(start, start + self.branching)


def successors(path: Sequence[int], shape: TreeShape) -> Tuple[VertexPath, ...]:
    path = check_path(path, shape.branching)
    if len(path) >= shape.depth:
        raise TruncationBoundary(
            f"vertex {format_path(path)!r} sits at depth {shape.depth}; apply the closure rule"
        )
    return tuple(path + (d,) for d in range(shape.branching))


def iter_vertices(shape: TreeShape) -> Iterator[VertexPath]:
    """Level-then-lexicographic order, which is also rank order."""
    level_paths = [()]
    for lvl in range(shape.depth + 1):
        yield from level_paths
        if lvl < shape.depth:
            level_paths = [p + (d,) for p in level_paths for d in range(shape.branching)]


def enumerate_vertices(shape: TreeShape) -> list:
    return list(iter_vertices(shape))


def psi_embed(path: Sequence[int], m: int, exact: bool = False):
    """Left endpoint of the vertex's interval in [0, 1] and the interval itself.

    Returns ``(psi, (psi, psi + m**-k))`` with k the level.  With ``exact=True``
    the values are :class:`fractions.Fraction`.
    """
    path = check_path(path, m)
    psi = Fraction(0)
    scale = Fraction(1)
    for d in path:
        scale /= m
        psi += d * scale
    interval = (psi, psi + scale)
    if exact:
        return psi, interval
    return float(psi), (float(interval[0]), float(interval[1]))


def psi_values(shape: TreeShape) -> np.ndarray:
    """psi for every stored vertex, by rank (floating point)."""
    out = np.empty(shape.n_vertices)
    m = shape.branching
    out[0] = 0.0
    for r in range(shape.n_internal):
        lvl = shape.levels[r]
        base = out[r]
        start = m * r + 1
        out[start:start + m] = base + np.arange(m) * float(m) ** -(lvl + 1)
    return out
