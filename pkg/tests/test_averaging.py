import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from treediffusion.averaging import (AveragingSpec, evaluate, evaluate_rows, p_average,
                                     verify_axioms)
from treediffusion.exceptions import ArityError, DomainError

SPECS = [
    AveragingSpec("mean", 3),
    AveragingSpec("p_average", 3, p=1.5),
    AveragingSpec("p_average", 3, p=3.0),
    AveragingSpec("median_mean", 3, alpha=0.5),
    AveragingSpec("median_mean", 4, alpha=0.3),
    AveragingSpec("median_midrange", 3, alpha=0.5),
    AveragingSpec("median_midrange", 2, alpha=0.0),
    AveragingSpec("minmax_mean", 5, alpha=0.5),
]


def test_evaluate_examples():
    assert evaluate(AveragingSpec("mean", 3), [1, 2, 3]) == 2
    assert evaluate(AveragingSpec("median_midrange", 3, alpha=0.0), [0, 0, 3]) == 1.5
    assert evaluate(AveragingSpec("minmax_mean", 3, alpha=0.5), [0, 1, 2]) == 1


def test_arity_mismatch():
    with pytest.raises(ArityError):
        evaluate(AveragingSpec("mean", 3), [1, 2])


@pytest.mark.parametrize("kw", [
    dict(kind="p_average", arity=3, p=1.0),
    dict(kind="p_average", arity=3),
    dict(kind="median_mean", arity=3, alpha=1.5),
    dict(kind="minmax_mean", arity=3, alpha=1.0),
    dict(kind="mean", arity=1),
    dict(kind="mean", arity=3, p=2.0),
    dict(kind="nonsense", arity=3),
])
def test_invalid_specs(kw):
    with pytest.raises(DomainError):
        AveragingSpec(**kw)


def test_standard_median_even_and_odd():
    med = AveragingSpec("median_mean", 4, alpha=1.0)
    assert evaluate(med, [4, 1, 3, 2]) == 2.5
    assert evaluate(AveragingSpec("median_mean", 3, alpha=1.0), [5, 1, 3]) == 3


def _g(x, p, t):
    return sum(math.copysign(abs(xj - t) ** (p - 1), xj - t) for xj in x)


def test_p_average_examples():
    assert p_average([0.7, 0.7, 0.7], 3.3) == 0.7
    assert p_average([0, 0, 1], 2) == pytest.approx(1 / 3, abs=1e-14)
    assert p_average([0, 0, 1], 3) == pytest.approx(math.sqrt(2) - 1, abs=1e-14)
    # independent root finder on the defining equation
    ref = brentq(lambda t: _g([0, 0, 1], 3, t), 0, 1, xtol=1e-16)
    assert p_average([0, 0, 1], 3) == pytest.approx(ref, abs=1e-14)


@pytest.mark.parametrize("p", [1.2, 1.5, 2.5, 4.0, 7.0])
def test_p_average_against_brentq(p):
    rng = np.random.default_rng(int(p * 10))
    for _ in range(20):
        x = rng.normal(size=4)
        ref = brentq(lambda t: _g(x, p, t), x.min(), x.max(), xtol=1e-15)
        assert p_average(x, p) == pytest.approx(ref, abs=1e-12)


def test_p_average_domain():
    with pytest.raises(DomainError):
        p_average([0, np.inf], 3)
    with pytest.raises(DomainError):
        p_average([0, 1], 1.0)


def test_p_two_is_the_mean():
    rng = np.random.default_rng(1)
    X = rng.normal(scale=5, size=(500, 3))
    got = evaluate_rows(AveragingSpec("p_average", 3, p=2.0), X)
    assert np.abs(got - X.mean(axis=1)).max() <= 1e-12


def test_constant_rows_are_fixed_exactly():
    rng = np.random.default_rng(2)
    for spec in SPECS:
        c = rng.normal(size=50)
        X = np.repeat(c[:, None], spec.arity, axis=1)
        assert np.array_equal(evaluate_rows(spec, X), c)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.label()}-m{s.arity}")
def test_verify_axioms_passes(spec):
    report = verify_axioms(spec, 1000, seed=3)
    assert report.all_passed, report.counterexample
    assert report.counterexample is None


def test_pure_median_fails_strictness():
    report = verify_axioms(AveragingSpec("median_mean", 3, alpha=1.0), 1000, seed=0)
    assert not report.passed["strict_max"]
    assert report.counterexample == {"axiom": "strict_max", "x": [0.0, 1.0, 1.0], "value": 1.0}
    assert all(v for k, v in report.passed.items() if k != "strict_max")


def test_report_counterexample_empty_iff_passed():
    for spec in SPECS[:3]:
        r = verify_axioms(spec, 50, seed=1)
        assert r.all_passed == (r.counterexample is None)


def test_verify_axioms_is_seeded():
    spec = AveragingSpec("p_average", 3, p=3.0)
    assert verify_axioms(spec, 100, 5).to_dict() == verify_axioms(spec, 100, 5).to_dict()


def test_spec_json_round_trip():
    for spec in SPECS:
        again = AveragingSpec.from_json(spec.to_json())
        assert again == spec
    assert json.loads(SPECS[1].to_json()) == {"kind": "p_average", "arity": 3, "p": 1.5}


vectors3 = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(SPECS[:4] + SPECS[5:6]), vectors3, vectors3)
def test_bounds_lipschitz_permutation(spec, x, y):
    x, y = np.array(x), np.array(y)
    fx = evaluate(spec, x)
    assert x.min() - 1e-9 <= fx <= x.max() + 1e-9
    assert abs(fx - evaluate(spec, y)) <= np.abs(x - y).max() + 1e-9
    for perm in itertools.permutations(range(3)):
        assert evaluate(spec, x[list(perm)]) == pytest.approx(fx, abs=1e-9)
