"""scikit-learn style front ends.

``AveragingOperator`` is a transformer mapping (n_samples, m) arrays to F of
every row; ``TreeDiffusion`` and ``PicardSolver`` are fitted to an initial
datum and predict u at arbitrary times.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .averaging import AveragingSpec, evaluate_rows, verify_axioms
from .data import (ClosureRule, InitialDatum, TimeGrid, closure_from_dict, datum_from_dict,
                   matching_closure)
from .exceptions import ArityError, DomainError
from .solver import picard_iterate, residual_norm, solve_ivp
from .tree import TreeShape


class AveragingOperator(TransformerMixin, BaseEstimator):
    """Row-wise averaging operator; the arity is learned from ``X`` in ``fit``."""

    def __init__(self, kind="mean", p=None, alpha=None):
        self.kind = kind
        self.p = p
        self.alpha = alpha

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=2)
        self.spec_ = AveragingSpec(self.kind, X.shape[1], self.p, self.alpha)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ArityError(f"fitted for {self.n_features_in_} features, got {X.shape[1]}")
        return evaluate_rows(self.spec_, X)[:, None]

    def verify(self, sample_count=1000, seed=0):
        check_is_fitted(self, "spec_")
        return verify_axioms(self.spec_, sample_count, seed)


def _check_datum(X, shape):
    if isinstance(X, InitialDatum):
        return X
    if isinstance(X, dict):
        return datum_from_dict(X)
    values = check_array(X, ensure_2d=False, dtype=float).ravel()
    if values.shape[0] != shape.n_vertices:
        raise DomainError(f"expected {shape.n_vertices} datum values (one per vertex), "
                          f"got {values.shape[0]}")
    return values


def _check_closure(closure, datum):
    if closure is None or closure == "auto":
        return matching_closure(datum) if isinstance(datum, InitialDatum) else closure_from_dict(None)
    if isinstance(closure, ClosureRule):
        return closure
    if isinstance(closure, str):
        return closure_from_dict({"kind": closure})
    return closure_from_dict(closure)


class TreeDiffusion(BaseEstimator):
    """Solve u_t = F(u at successors) - u on a truncated m-ary tree.

    Parameters
    ----------
    operator, p, alpha : averaging operator and its parameters
    m, depth : branching and number of stored levels below the root
    t_end, dt : time horizon and step
    closure : ClosureRule, dict, kind name, or "auto" (matched to the datum)
    store : "full" keeps every time level, "stream" only the root and sup norms
    """

    def __init__(self, operator="mean", p=None, alpha=None, m=2, depth=4, t_end=10.0,
                 dt=1e-3, closure="auto", store="full"):
        self.operator = operator
        self.p = p
        self.alpha = alpha
        self.m = m
        self.depth = depth
        self.t_end = t_end
        self.dt = dt
        self.closure = closure
        self.store = store

    def _setup(self, X):
        self.shape_ = TreeShape(int(self.m), int(self.depth))
        self.spec_ = AveragingSpec(self.operator, int(self.m), self.p, self.alpha)
        self.grid_ = TimeGrid.from_dt(float(self.t_end), float(self.dt))
        datum = _check_datum(X, self.shape_)
        self.closure_ = _check_closure(self.closure, datum)
        return datum

    def fit(self, X, y=None):
        """``X``: an InitialDatum, a datum dict, or one value per stored vertex (rank order)."""
        datum = self._setup(X)
        self.field_ = solve_ivp(self.shape_, self.spec_, datum, self.grid_, self.closure_,
                                store=self.store)
        return self

    def predict(self, t, paths=None):
        """u at times ``t`` (linear in time between grid nodes) for the given vertices.

        Returns an array of shape (len(t), len(paths)); ``paths`` defaults to the root.
        """
        check_is_fitted(self, "field_")
        t = check_array(np.atleast_1d(t), ensure_2d=False, dtype=float).ravel()
        nodes = self.grid_.nodes
        if np.any(t < 0) or np.any(t > nodes[-1]):
            raise DomainError(f"times must lie in [0, {nodes[-1]}]")
        paths = [()] if paths is None else [tuple(p) for p in paths]
        cols = [np.interp(t, nodes, self.field_.vertex_trajectory(p)) for p in paths]
        return np.column_stack(cols)

    def residual(self):
        check_is_fitted(self, "field_")
        return residual_norm(self.field_, self.spec_)


class PicardSolver(TreeDiffusion):
    """Same problem solved by fixed-point iteration of the integral operator."""

    def __init__(self, operator="mean", p=None, alpha=None, m=2, depth=4, t_end=1.0,
                 dt=1e-3, closure="auto", max_iter=500, tol=1e-10):
        # iterates are whole space-time fields, so storage is always full
        super().__init__(operator=operator, p=p, alpha=alpha, m=m, depth=depth,
                         t_end=t_end, dt=dt, closure=closure, store="full")
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        datum = self._setup(X)
        result = picard_iterate(self.shape_, self.spec_, datum, self.grid_, self.closure_,
                                max_iter=int(self.max_iter), tol=float(self.tol))
        self.field_ = result.field
        self.trace_ = np.asarray(result.trace)
        self.ratios_ = np.asarray(result.ratios)
        self.n_iter_ = result.iterations
        return self
