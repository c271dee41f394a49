import math

import numpy as np
import pytest
import scipy.integrate

from treediffusion.averaging import AveragingSpec, evaluate_rows
from treediffusion.data import (FiniteSupport, Geometric, GeometricEnvelope, LevelFunction,
                                TimeGrid, ZeroBoundary)
from treediffusion.exceptions import (ArityError, DomainError, IterationLimitError,
                                      NumericalFailure)
from treediffusion.solver import (apply_integral_operator, contraction_factor, exp_weights,
                                  picard_iterate, residual_norm, sample_field, solve_ivp,
                                  truncation_tail_bound)
from treediffusion.tree import TreeShape


def rhs_oracle(shape, spec, ghost=0.0):
    """Plain method-of-lines right-hand side, written independently of the solver."""
    m, n_int = shape.branching, shape.n_internal

    def rhs(t, u):
        F = np.full_like(u, ghost)
        if n_int:
            F[:n_int] = evaluate_rows(spec, u[1:].reshape(n_int, m))
        return F - u
    return rhs


@pytest.mark.parametrize("h", [1e-8, 1e-4, 0.05, 0.1, 0.5, 3.0])
def test_exp_weights(h):
    decay, w0, w1 = exp_weights(h)
    assert decay == pytest.approx(math.exp(-h), rel=1e-15)
    # exact weights of a linear interpolant: int_0^h e^{s-h} (1 - s/h) ds etc.
    ref0 = scipy.integrate.quad(lambda s: math.exp(s - h) * (1 - s / h), 0, h, epsabs=0, epsrel=1e-13)[0]
    ref1 = scipy.integrate.quad(lambda s: math.exp(s - h) * s / h, 0, h, epsabs=0, epsrel=1e-13)[0]
    assert w0 == pytest.approx(ref0, rel=1e-10)
    assert w1 == pytest.approx(ref1, rel=1e-10)
    assert w0 > 0 and w1 > 0
    assert decay + w0 + w1 == pytest.approx(1.0, abs=1e-15)


def test_root_of_f1_datum_matches_t_exp():
    shape = TreeShape(3, 1)
    f = LevelFunction([0.0, 1.0])
    field = solve_ivp(shape, AveragingSpec("mean", 3), f, TimeGrid.from_dt(4.0, 1e-3))
    t = field.grid.nodes
    assert np.abs(field.root - t * np.exp(-t)).max() < 1e-7


def test_constant_datum_is_exact():
    shape = TreeShape(2, 3)
    spec = AveragingSpec("p_average", 2, p=3.0)
    from treediffusion.data import EigenExtension
    field = solve_ivp(shape, spec, np.ones(shape.n_vertices), TimeGrid(2.0, 20),
                      EigenExtension(1.0, 1.0))
    assert np.all(field.values == 1.0)


@pytest.mark.parametrize("spec", [
    AveragingSpec("mean", 2),
    AveragingSpec("p_average", 2, p=3.0),
    AveragingSpec("median_midrange", 3, alpha=0.5),
    AveragingSpec("minmax_mean", 3, alpha=0.5),
])
def test_against_scipy_ode_integrator(spec, rng):
    m = spec.arity
    shape = TreeShape(m, 3)
    f = rng.uniform(-1, 1, shape.n_vertices)
    grid = TimeGrid.from_dt(2.0, 1e-3)
    field = solve_ivp(shape, spec, f, grid)
    ref = scipy.integrate.solve_ivp(rhs_oracle(shape, spec), (0, 2.0), f, t_eval=grid.nodes[::100],
                                    method="DOP853", rtol=1e-12, atol=1e-12)
    # piecewise-smooth operators (median, max) only allow first-order-in-kink accuracy
    tol = 1e-6 if spec.kind in ("mean", "p_average") else 1e-4
    assert np.abs(field.values[::100] - ref.y.T).max() < tol


def test_second_order_convergence(rng):
    shape = TreeShape(2, 4)
    spec = AveragingSpec("p_average", 2, p=3.0)
    f = rng.uniform(-1, 1, shape.n_vertices)
    ref = scipy.integrate.solve_ivp(rhs_oracle(shape, spec), (0, 1.0), f, method="DOP853",
                                    rtol=1e-13, atol=1e-13).y[:, -1]
    errs = [np.abs(solve_ivp(shape, spec, f, TimeGrid(1.0, n)).final - ref).max() for n in (50, 100)]
    assert errs[0] / errs[1] > 3.5


def test_stream_mode_agrees_with_full(rng):
    shape = TreeShape(3, 3)
    spec = AveragingSpec("median_mean", 3, alpha=0.5)
    f = rng.normal(size=shape.n_vertices)
    full = solve_ivp(shape, spec, f, TimeGrid(1.0, 200))
    stream = solve_ivp(shape, spec, f, TimeGrid(1.0, 200), store="stream")
    assert stream.values is None and not stream.is_full
    assert np.array_equal(full.root, stream.root)
    assert np.array_equal(full.sup_norm, stream.sup_norm)
    assert np.array_equal(full.final, stream.final)
    with pytest.raises(DomainError):
        residual_norm(stream)


def test_field_accessors():
    shape = TreeShape(2, 2)
    field = solve_ivp(shape, AveragingSpec("mean", 2), LevelFunction([0, 0, 2]), TimeGrid(1.0, 10))
    assert field.at((), 0) == 0.0 and field.at((1, 0), 0) == 2.0
    assert np.array_equal(field.vertex_trajectory((0,)), field.values[:, 1])
    s = field.summary(1e-3)
    assert s["depth"] == 2 and s["m"] == 2 and s["residual"] == 1e-3
    assert len(s["sup_norm_trajectory"]) == 11


def test_callback_sees_every_step():
    seen = []
    solve_ivp(TreeShape(2, 1), AveragingSpec("mean", 2), np.zeros(3), TimeGrid(1.0, 5),
              callback=lambda k, t, u: seen.append((k, t)))
    assert [k for k, _ in seen] == [1, 2, 3, 4, 5]
    assert seen[-1][1] == 1.0


def test_arity_and_nonfinite_errors():
    shape = TreeShape(3, 2)
    with pytest.raises(ArityError):
        solve_ivp(shape, AveragingSpec("mean", 2), np.zeros(shape.n_vertices), TimeGrid(1.0, 5))
    bad = np.zeros(shape.n_vertices)
    bad[4] = np.nan
    with pytest.raises(NumericalFailure) as info:
        solve_ivp(shape, AveragingSpec("mean", 3), bad, TimeGrid(1.0, 5))
    assert info.value.vertex == "0.0" and info.value.step == 0
    with pytest.raises(DomainError):
        solve_ivp(shape, AveragingSpec("mean", 3), np.zeros(5), TimeGrid(1.0, 5))


def test_integral_operator_fixes_solver_output(rng):
    shape = TreeShape(2, 4)
    spec = AveragingSpec("minmax_mean", 2, alpha=0.5)
    f = rng.uniform(-1, 1, shape.n_vertices)
    field = solve_ivp(shape, spec, f, TimeGrid(1.5, 300))
    KU = apply_integral_operator(shape, spec, f, field.grid, field.closure, field.values)
    # the solver is one predictor-corrector sweep of the same quadrature
    assert np.abs(KU - field.values).max() < 1e-5
    assert residual_norm(field, vertices="all") == pytest.approx(np.abs(KU - field.values).max())


def test_residual_chunking_is_seamless(rng):
    shape = TreeShape(2, 3)
    spec = AveragingSpec("p_average", 2, p=3.0)
    f = rng.uniform(-1, 1, shape.n_vertices)
    field = solve_ivp(shape, spec, f, TimeGrid(3.0, 1000))
    KU = apply_integral_operator(shape, spec, f, field.grid, field.closure, field.values)
    whole = float(np.abs(KU[:, :shape.n_internal] - field.values[:, :shape.n_internal]).max())
    assert residual_norm(field) == pytest.approx(whole, abs=1e-15)


def test_sampled_eigen_field_has_small_residual():
    shape = TreeShape(3, 4)
    grid = TimeGrid(2.0, 2000)
    lam = 0.5
    closure = GeometricEnvelope(1.0, lam)
    sampled = sample_field(shape, grid, lambda lv, t: np.exp(-lam * t) * (1 - lam) ** lv,
                           closure, AveragingSpec("mean", 3))
    assert residual_norm(sampled, vertices="all") < 1e-7
    assert sampled.values.shape == (2001, shape.n_vertices)


def test_picard_matches_solver_and_contracts(rng):
    shape = TreeShape(2, 3)
    spec = AveragingSpec("p_average", 2, p=3.0)
    f = rng.uniform(-1, 1, shape.n_vertices)
    grid = TimeGrid(1.0, 1000)
    res = picard_iterate(shape, spec, f, grid)
    assert res.trace[-1] <= 1e-10
    assert max(res.ratios) <= contraction_factor(1.0)
    direct = solve_ivp(shape, spec, f, grid)
    assert np.abs(res.field.values - direct.values).max() < 1e-6


def test_picard_iteration_limit(rng):
    shape = TreeShape(2, 2)
    with pytest.raises(IterationLimitError) as info:
        picard_iterate(shape, AveragingSpec("mean", 2), rng.normal(size=7), TimeGrid(3.0, 100),
                       max_iter=2)
    assert len(info.value.trace) == 2


def test_tail_bound_values():
    assert truncation_tail_bound(0, 1.0, 0.3) == 0.3
    assert truncation_tail_bound(1, 2.0, 1.0) == pytest.approx(1 - math.exp(-2.0), rel=1e-14)
    t = 3.0
    direct = 1 - math.exp(-t) * sum(t ** j / math.factorial(j) for j in range(4))
    assert truncation_tail_bound(4, t, 2.0) == pytest.approx(2.0 * direct, rel=1e-12)
    assert truncation_tail_bound(5, 0.0, 1.0) == 0.0
    with pytest.raises(DomainError):
        truncation_tail_bound(-1, 1.0, 1.0)


def test_geometric_datum_stays_under_envelope(rng):
    from treediffusion.fuzz import random_geometric
    shape = TreeShape(2, 6)
    f = random_geometric(shape, 1.0, 0.5, rng)
    field = solve_ivp(shape, AveragingSpec("mean", 2), f, TimeGrid(4.0, 800),
                      GeometricEnvelope(1.0, 0.5), store="stream")
    assert np.all(field.sup_norm <= np.exp(-0.5 * field.grid.nodes) + 1e-9)


def test_finite_support_rejects_data_below_depth():
    with pytest.raises(DomainError):
        FiniteSupport({"0.0.0": 1.0}).values(TreeShape(2, 2))
