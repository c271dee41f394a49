"""Numerical solution of u_t = F(u at the successors) - u on a truncated tree.

Time stepping works on the variation-of-constants form

    u(x, t + h) = e^{-h} u(x, t) + int_0^h e^{z - h} F(children at t + z) dz

with F interpolated linearly across the step and the exponential weights
integrated exactly.  The weights are positive and sum to one, so constants
are stationary and the discrete scheme is monotone: the maximum and
comparison principles carry over to the numerical field.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.signal import lfilter
from scipy.special import gammainc

from .averaging import AveragingSpec, evaluate_rows
from .data import ClosureRule, InitialDatum, TimeGrid, ZeroBoundary
from .exceptions import ArityError, DomainError, IterationLimitError, NumericalFailure
from .tree import TreeShape, format_path

logger = logging.getLogger(__name__)

STORE_MODES = ("full", "stream")


def exp_weights(h: float):
    """(e^{-h}, w0, w1): weights of F at the left/right node for one step of length h.

    w0 + w1 = 1 - e^{-h}; w1 = (h - 1 + e^{-h}) / h is summed as a series for
    small h to avoid cancellation.
    """
    decay = math.exp(-h)
    total = -math.expm1(-h)
    w1 = _phi2_series(h) if h < 0.1 else (h - total) / h
    return decay, total - w1, w1


def _phi2_series(h):
    # sum_{n>=2} (-h)^n / n!, divided by h
    term, acc = 1.0, 0.0
    for n in range(1, 22):
        term *= -h / n
        if n >= 2:
            acc += term
    return acc / h


@dataclass
class SolutionField:
    """u on a truncated tree sampled at the nodes of a time grid.

    ``values`` has shape (steps + 1, n_vertices) and is ``None`` for streamed
    runs; ``root`` and ``sup_norm`` (max |u| over stored vertices per node)
    are always kept.
    """

    shape: TreeShape
    grid: TimeGrid
    spec: Optional[AveragingSpec]
    closure: ClosureRule
    initial: np.ndarray
    root: np.ndarray
    sup_norm: np.ndarray
    final: np.ndarray
    values: Optional[np.ndarray] = None
    datum: Optional[InitialDatum] = None
    label: str = ""

    @property
    def is_full(self) -> bool:
        return self.values is not None

    def at(self, path, k: int) -> float:
        r = self.shape.rank(path)
        if r == 0:
            return float(self.root[k])
        if self.values is None:
            if k == self.grid.steps:
                return float(self.final[r])
            raise DomainError("streamed field only keeps the root trajectory and final level")
        return float(self.values[k, r])

    def vertex_trajectory(self, path) -> np.ndarray:
        r = self.shape.rank(path)
        if r == 0:
            return self.root.copy()
        if self.values is None:
            raise DomainError("streamed field only keeps the root trajectory")
        return self.values[:, r].copy()

    def summary(self, residual: Optional[float] = None) -> dict:
        return {
            "operator": None if self.spec is None else self.spec.to_dict(),
            "datum": None if self.datum is None else self.datum.to_dict(),
            "closure": self.closure.to_dict(),
            "depth": self.shape.depth,
            "m": self.shape.branching,
            "dt": self.grid.dt,
            "T": self.grid.t_end,
            "sup_norm_trajectory": [float(v) for v in self.sup_norm],
            "residual": residual,
        }


def _row_sup(values):
    # max |u| per time node without materializing |values|
    return np.maximum(values.max(axis=1), -values.min(axis=1))


def _check_inputs(shape, spec, closure):
    if spec.arity != shape.branching:
        raise ArityError(f"operator arity {spec.arity} != tree branching {shape.branching}")
    if closure is None:
        closure = ZeroBoundary()
    return closure


def _datum_values(shape, f):
    if isinstance(f, InitialDatum):
        return f.values(shape), f
    vals = np.asarray(f, dtype=float)
    if vals.shape != (shape.n_vertices,):
        raise DomainError(f"expected {shape.n_vertices} datum values, got shape {vals.shape}")
    return vals.copy(), None


def _averages(shape: TreeShape, spec: AveragingSpec, closure: ClosureRule):
    """u -> F(u at successors) for every stored vertex, at a given time."""
    n_int = shape.n_internal
    m = shape.branching
    leaf_level = shape.depth + 1

    def apply(u, t):
        out = np.empty_like(u)
        if n_int:
            out[:n_int] = evaluate_rows(spec, u[1:].reshape(n_int, m))
        # all ghost successors share one value c, and F(c, ..., c) = c
        out[n_int:] = closure.ghost(leaf_level, t)
        return out

    return apply


def _fail_nonfinite(shape, u, step):
    bad = int(np.flatnonzero(~np.isfinite(u))[0])
    vertex = format_path(shape.path(bad))
    raise NumericalFailure(
        f"non-finite value at vertex {vertex!r}, step {step}", vertex=vertex, step=step
    )


def solve_ivp(shape: TreeShape, spec: AveragingSpec, f, grid: TimeGrid,
              closure: ClosureRule = None, store: str = "full",
              callback: Callable = None) -> SolutionField:
    """March the exponential integrator with one predictor-corrector sweep per step.

    Per step of length h, with a = 1 - e^{-h}:

        predictor  v  = u_k + a (F_k - u_k)
        corrector  u_{k+1} = u_k + a (F_k - u_k) + w1 (F(v) - F_k)

    ``f`` is an :class:`InitialDatum` or an array of values by rank.
    ``store="stream"`` keeps two time levels only.  ``callback(k, t, u)`` is
    called after every step if given.
    """
    closure = _check_inputs(shape, spec, closure)
    if store not in STORE_MODES:
        raise DomainError(f"store must be one of {STORE_MODES}")
    u, datum = _datum_values(shape, f)
    if not np.isfinite(u).all():
        _fail_nonfinite(shape, u, 0)
    F = _averages(shape, spec, closure)
    h = grid.dt
    _, _, w1 = exp_weights(h)
    a = -math.expm1(-h)
    t = grid.nodes
    N = grid.steps

    values = None
    if store == "full":
        values = np.empty((N + 1, shape.n_vertices))
        values[0] = u
    root = np.empty(N + 1)
    sup = np.empty(N + 1)
    root[0] = u[0]
    sup[0] = np.abs(u).max()
    initial = u.copy()

    Fk = F(u, t[0])
    for k in range(N):
        base = u + a * (Fk - u)
        Fp = F(base, t[k + 1])
        u = base + w1 * (Fp - Fk)
        if not np.isfinite(u).all():
            _fail_nonfinite(shape, u, k + 1)
        Fk = F(u, t[k + 1])
        root[k + 1] = u[0]
        sup[k + 1] = np.abs(u).max()
        if values is not None:
            values[k + 1] = u
        if callback is not None:
            callback(k + 1, t[k + 1], u)

    return SolutionField(shape=shape, grid=grid, spec=spec, closure=closure,
                         initial=initial, root=root, sup_norm=sup, final=u,
                         values=values, datum=datum)


def _integral_operator_chunks(shape, spec, initial, grid, closure, U, chunk=256):
    """Yield (k0, block) with block = (K U)[k0:k0 + chunk], carrying the recurrence."""
    n_int = shape.n_internal
    m = shape.branching
    t = grid.nodes
    N = grid.steps
    decay, w0, w1 = exp_weights(grid.dt)
    ghost_level = shape.depth + 1

    def averages(k0, k1):
        G = np.empty((k1 - k0, U.shape[1]))
        if n_int:
            rows = U[k0:k1, 1:].reshape((k1 - k0) * n_int, m)
            G[:, :n_int] = evaluate_rows(spec, rows).reshape(k1 - k0, n_int)
        G[:, n_int:] = closure.ghosts(ghost_level, t[k0:k1])[:, None]
        return G

    y_prev = None
    g_prev = None
    for k0 in range(0, N + 1, chunk):
        k1 = min(k0 + chunk, N + 1)
        G = averages(k0, k1)
        drive = np.empty_like(G)
        if k0 == 0:
            drive[0] = initial
            drive[1:] = w0 * G[:-1] + w1 * G[1:]
            block = lfilter([1.0], [1.0, -decay], drive, axis=0)
        else:
            drive[0] = w0 * g_prev + w1 * G[0]
            drive[1:] = w0 * G[:-1] + w1 * G[1:]
            block = lfilter([1.0], [1.0, -decay], drive, axis=0, zi=(decay * y_prev)[None, :])[0]
        y_prev = block[-1].copy()
        g_prev = G[-1].copy()
        yield k0, block


def apply_integral_operator(shape: TreeShape, spec: AveragingSpec, initial: np.ndarray,
                            grid: TimeGrid, closure: ClosureRule, U: np.ndarray) -> np.ndarray:
    """Discretized K_f U on every (node, vertex), same quadrature as :func:`solve_ivp`.

    (K U)_0 = f and (K U)_{k+1} = e^{-h} (K U)_k + w0 F(U_k) + w1 F(U_{k+1}).
    """
    out = np.empty_like(U, dtype=float)
    for k0, block in _integral_operator_chunks(shape, spec, initial, grid, closure, U,
                                               chunk=U.shape[0]):
        out[k0:k0 + block.shape[0]] = block
    return out


@dataclass
class PicardResult:
    field: SolutionField
    trace: list = field(default_factory=list)

    @property
    def ratios(self) -> list:
        d = self.trace
        return [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > 0]

    @property
    def iterations(self) -> int:
        return len(self.trace)


def contraction_factor(t_end: float) -> float:
    return -math.expm1(-t_end)


def picard_iterate(shape: TreeShape, spec: AveragingSpec, f, grid: TimeGrid,
                   closure: ClosureRule = None, max_iter: int = 500,
                   tol: float = 1e-10) -> PicardResult:
    """Fixed-point iteration of the discretized K_f from u0(x, t) = e^{-t} f(x).

    Stops when the sup-distance between successive iterates is <= ``tol``;
    raises :class:`IterationLimitError` (carrying the trace) otherwise.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    closure = _check_inputs(shape, spec, closure)
    f0, datum = _datum_values(shape, f)
    U = np.exp(-grid.nodes)[:, None] * f0[None, :]
    trace = []
    for it in range(1, max_iter + 1):
        V = apply_integral_operator(shape, spec, f0, grid, closure, U)
        if not np.isfinite(V).all():
            k, r = np.argwhere(~np.isfinite(V))[0]
            vertex = format_path(shape.path(int(r)))
            raise NumericalFailure(f"non-finite iterate at vertex {vertex!r}, node {k}",
                                   vertex=vertex, step=int(k))
        dist = float(np.abs(V - U).max())
        trace.append(dist)
        U = V
        logger.debug("picard iteration %d: sup distance %.3e", it, dist)
        if dist <= tol:
            break
    else:
        raise IterationLimitError(
            f"no convergence to {tol:g} within {max_iter} iterations", trace
        )
    out = SolutionField(shape=shape, grid=grid, spec=spec, closure=closure,
                        initial=f0.copy(), root=U[:, 0].copy(),
                        sup_norm=_row_sup(U), final=U[-1].copy(),
                        values=U, datum=datum)
    return PicardResult(field=out, trace=trace)


def residual_norm(field: SolutionField, spec: AveragingSpec = None,
                  vertices: str = "interior") -> float:
    """max |u - K_f u| over time nodes and vertices.

    ``vertices="interior"`` skips the deepest stored level, whose successors
    come from the closure rule; ``"all"`` includes it.
    """
    if field.values is None:
        raise DomainError("residual needs a fully stored field (store='full')")
    spec = spec or field.spec
    if spec is None:
        raise DomainError("no averaging operator given")
    shape = field.shape
    _check_inputs(shape, spec, field.closure)
    if vertices not in ("interior", "all"):
        raise DomainError("vertices must be 'interior' or 'all'")
    cols = shape.n_internal if vertices == "interior" and shape.n_internal else shape.n_vertices
    U = field.values
    worst = 0.0
    for k0, block in _integral_operator_chunks(shape, spec, U[0], field.grid, field.closure, U):
        diff = np.abs(U[k0:k0 + block.shape[0], :cols] - block[:, :cols])
        worst = max(worst, float(diff.max()))
    return worst


def sample_field(shape: TreeShape, grid: TimeGrid, fn: Callable, closure: ClosureRule = None,
                 spec: AveragingSpec = None, datum: InitialDatum = None) -> SolutionField:
    """Tabulate a level-dependent closed form as a field.

    ``fn(levels, t)`` must broadcast: it is called once with levels of shape
    (1, n_vertices) and times of shape (steps + 1, 1).
    """
    closure = closure or ZeroBoundary()
    t = grid.nodes
    target = (grid.steps + 1, shape.n_vertices)
    values = np.asarray(fn(shape.levels[None, :].astype(float), t[:, None]), dtype=float)
    if values.shape != target:
        values = np.broadcast_to(values, target).copy()
    return SolutionField(shape=shape, grid=grid, spec=spec, closure=closure,
                         initial=values[0].copy(), root=values[:, 0].copy(),
                         sup_norm=_row_sup(values), final=values[-1].copy(),
                         values=values, datum=datum)


def truncation_tail_bound(depth: int, t: float, tail_sup: float) -> float:
    """tail_sup * P(Poisson(t) >= depth): root error bound of a zero-closed truncation.

    Equals tail_sup * (1 - e^{-t} sum_{j < depth} t^j / j!), evaluated through the
    regularized incomplete gamma function to avoid cancellation.
    """
    if depth < 0 or t < 0 or tail_sup < 0:
        raise DomainError("depth, t and tail_sup must be non-negative")
    if depth == 0:
        return float(tail_sup)
    return float(tail_sup * gammainc(depth, t))
