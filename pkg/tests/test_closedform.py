import math
from fractions import Fraction

import numpy as np
import pytest

from treediffusion.averaging import AveragingSpec
from treediffusion.closedform import (LevelSequenceSolution, finite_support_exact,
                                      geometric_eigen, level_constant_datum,
                                      level_constant_derivative, level_constant_solution,
                                      monomial_example, power_law_coefficients, recursion_step,
                                      scaling_eigen, subfactorial_datum)
from treediffusion.data import FiniteSupport, LevelFunction, TimeGrid, monomial_datum
from treediffusion.exceptions import DomainError, UnsupportedOperator
from treediffusion.solver import solve_ivp
from treediffusion.tree import TreeShape


def derangements(n):
    # inclusion-exclusion, exact
    return int(sum(Fraction(math.factorial(n) * (-1) ** k, math.factorial(k)) for k in range(n + 1)))


def test_subfactorial_sequence():
    assert [subfactorial_datum(n) for n in range(8)] == [1, 0, 1, -2, 9, -44, 265, -1854]
    for n in range(13):
        assert subfactorial_datum(n) == (-1) ** n * derangements(n)
        assert level_constant_datum(1, n) == subfactorial_datum(n)


def test_subfactorial_large_n_uses_integers():
    assert subfactorial_datum(30) == derangements(30)


@pytest.mark.parametrize("alpha", [1, Fraction(1, 2), 2.5])
def test_recursion_step_generates_next_level(alpha):
    for n in range(12):
        assert recursion_step(power_law_coefficients(alpha, n), alpha) == \
            power_law_coefficients(alpha, n + 1)


def test_power_law_coefficients_formula():
    # c_{n,j} = binom(n, j) (-1)^j alpha (alpha+1) ... (alpha+j-1)
    assert power_law_coefficients(1, 3) == [1, -3, 6, -6]
    assert power_law_coefficients(Fraction(1, 2), 2) == [1, -1, Fraction(3, 4)]


@pytest.mark.parametrize("alpha, n, t", [(1.0, 0, 0.5), (1.0, 4, 1.3), (0.7, 6, 2.0), (2.0, 3, 0.1)])
def test_level_constant_derivative_by_finite_differences(alpha, n, t):
    h = 1e-5
    fd = (level_constant_solution(alpha, n, t + h) - level_constant_solution(alpha, n, t - h)) / (2 * h)
    assert level_constant_derivative(alpha, n, t) == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_level_constant_root_and_level_one():
    assert level_constant_solution(1.0, 0, 3.0) == pytest.approx(0.25)
    # a_1 = a_0' + a_0 = -(1+t)^-2 + (1+t)^-1
    assert level_constant_solution(1.0, 1, 1.0) == pytest.approx(0.5 - 0.25)
    with pytest.raises(DomainError):
        level_constant_solution(1.0, 2, -1.0)


def test_level_sequence_recursion_residual():
    sol = LevelSequenceSolution(alpha=1.0)
    assert sol.recursion_residual(10, np.linspace(0, 5, 11)) < 1e-8
    poly = LevelSequenceSolution(polynomial=(1.0, -2.0, 0.5))
    assert poly.recursion_residual(6, [0.0, 1.0, 2.5]) < 1e-12
    assert poly.value(1, 0.0) == -1.0  # a_0' + a_0 at 0
    with pytest.raises(DomainError):
        LevelSequenceSolution()


def test_eigen_closed_forms():
    assert geometric_eigen(2.0, 0.5, (0, 1), 2.0) == pytest.approx(2.0 * math.exp(-1.0) * 0.25)
    assert geometric_eigen(1.0, 0.3, 3, 0.0) == pytest.approx(0.7 ** 3)
    assert scaling_eigen(1.0, 2.0, 2, 1.0) == pytest.approx(4.0 * math.e)
    with pytest.raises(DomainError):
        geometric_eigen(1.0, 1.5, (), 1.0)


def test_eigen_solutions_satisfy_the_equation():
    # u_t = mean(children) - u with level-constant children
    for fn in (lambda l, t: geometric_eigen(1.0, 0.4, l, t), lambda l, t: scaling_eigen(1.0, 1.7, l, t)):
        for lvl in range(4):
            t, h = 0.8, 1e-6
            ut = (fn(lvl, t + h) - fn(lvl, t - h)) / (2 * h)
            assert ut == pytest.approx(fn(lvl + 1, t) - fn(lvl, t), rel=1e-7)


def test_monomial_example_values():
    assert monomial_example(3, (), 2.0) == pytest.approx(8 * math.exp(-2))
    assert monomial_example(3, (0, 1), 2.0) == pytest.approx(6 * 2 * math.exp(-2))
    assert monomial_example(3, 3, 2.0) == pytest.approx(6 * math.exp(-2))
    assert monomial_example(2, 3, 1.0) == 0.0


@pytest.mark.parametrize("n", range(6))
def test_finite_support_exact_monomial(n):
    shape = TreeShape(3, max(n, 1))
    sol = finite_support_exact(shape, monomial_datum(n), AveragingSpec("mean", 3))
    assert sol.root_coeffs() == tuple([Fraction(0)] * n + [Fraction(1)])
    for r in range(shape.n_vertices):
        lvl = int(shape.levels[r])
        assert sol.value(r, 1.7) == pytest.approx(monomial_example(n, lvl, 1.7), rel=1e-13, abs=1e-300)


def test_finite_support_exact_against_solver():
    shape = TreeShape(2, 3)
    f = FiniteSupport({"": 0.5, "0": -1.0, "1.0": 2.0, "1.1.0": 1.0})
    sol = finite_support_exact(shape, f)
    assert sol.degree(0) == 3
    grid = TimeGrid(3.0, 3000)
    numeric = solve_ivp(shape, AveragingSpec("mean", 2), f, grid)
    assert np.abs(sol.field_values(grid) - numeric.values).max() < 1e-6
    rows = list(sol.rows())
    assert rows[0][:3] == ("", 0, 3)


def test_finite_support_exact_refuses_other_operators():
    with pytest.raises(UnsupportedOperator):
        finite_support_exact(TreeShape(2, 2), LevelFunction([1.0]), AveragingSpec("p_average", 2, p=3.0))
    with pytest.raises(DomainError):
        finite_support_exact(TreeShape(2, 2), LevelFunction([0, 0, 0, 1.0]))
