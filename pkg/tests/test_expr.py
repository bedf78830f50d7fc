import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morphic import expr as E
from morphic.expr import Chart, SampleSpec, diff, is_zero, simplify
from morphic.parser import ExprSyntaxError, UnknownIdentifierError, parse

CHART = Chart.make(["x1", "x2"])
X1, X2 = CHART.vars()


def test_parse_and_evaluate():
    e = parse("x1*x2 + 1", CHART)
    assert isinstance(e, E.Add)
    assert e.evaluate([2, 3]) == 7
    assert e.evaluate_exact([2, 3]) == 7


def test_pythagoras_evaluates_to_one():
    e = parse("sin(x1)^2 + cos(x1)^2", CHART)
    vals = e.evaluate(CHART.sample(50, 1))
    assert np.allclose(vals, 1.0, atol=1e-12)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("x3", CHART)
    assert info.value.offset == 0


@pytest.mark.parametrize("text", ["x1 +", "(x1", "x1 ^ x2", "2 $ x1", "sin x1"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse(text, CHART)


def test_power_operators_agree():
    assert simplify(parse("x1**3", CHART) - parse("x1^3", CHART)) == E.ZERO


def test_decimal_literals_are_exact():
    assert parse("0.1", CHART).evaluate_exact([0, 0]) == Fraction(1, 10)


def test_diff_examples():
    assert simplify(diff(X1 * X2, 0)) == X2
    assert diff(E.sin(X1), 0).evaluate([0.0, 0.0]) == 1.0
    assert diff(X1 * X2, 1) == X1


def test_zero_tiers():
    assert is_zero(X1 - X1, CHART).tier == "SymbolicZero"
    v = is_zero(parse("sin(x1)^2 + cos(x1)^2 - 1", CHART), CHART)
    assert v.ok
    v = is_zero(X1 * X2, CHART)
    assert v.tier == "NonZero"
    assert abs(v.witness[0] * v.witness[1] - v.residual) < 1e-12


def test_simplify_collects_rational_functions():
    e = X1 / (X1 + X2) + X2 / (X1 + X2)
    assert simplify(e) == E.ONE
    assert simplify((X1 ** 2 - X2 ** 2) / (X1 - X2)) == simplify(X1 + X2)


def test_singular_points_are_resampled():
    e = E.ONE / X1 - E.ONE / X1
    assert is_zero(e, CHART).ok
    f = parse("x1/x1 - 1", CHART)
    assert is_zero(f, CHART).ok


def test_opaque_partials_match_closed_form():
    o = E.Opaque("f", 2, lambda p: np.sin(p[:, 0]) * p[:, 1])
    pts = CHART.sample(20, 3)
    assert np.allclose(diff(o, 0).evaluate(pts), np.cos(pts[:, 0]) * pts[:, 1], atol=1e-8)
    # an opaque function of the base is constant along extra coordinates
    assert diff(o, 3) == E.ZERO


def test_substitute():
    e = parse("x1*x2 + x2", CHART)
    out = E.substitute(e, [E.Const(2), X1])
    assert simplify(out - 3 * X1) == E.ZERO


def test_sample_spec_validation():
    with pytest.raises(ValueError):
        SampleSpec(samples=0)
    with pytest.raises(ValueError):
        SampleSpec(tol=0)


# random expressions built so that every sample point of [-1, 1]^2 is regular

_leaves = st.one_of(
    st.sampled_from([X1, X2]),
    st.integers(-3, 3).map(E.Const),
)


def _grow(children):
    return st.one_of(
        st.tuples(children, children).map(lambda t: t[0] + t[1]),
        st.tuples(children, children).map(lambda t: t[0] - t[1]),
        st.tuples(children, children).map(lambda t: t[0] * t[1]),
        st.tuples(children, children).map(lambda t: t[0] / (2 + E.sin(t[1]))),
        st.tuples(children, children).map(lambda t: t[0] / (1 + t[1] ** 2)),
        children.map(E.sin),
        children.map(E.cos),
        children.map(lambda c: E.exp(c / (1 + c ** 2))),
        children.map(lambda c: c ** 2),
    )


exprs = st.recursive(_leaves, _grow, max_leaves=6)
points = CHART.sample(30, 11)


def _fd(e, j, pts, h=1e-5):
    up, dn = pts.copy(), pts.copy()
    up[:, j] += h
    dn[:, j] -= h
    return (e.evaluate(up) - e.evaluate(dn)) / (2 * h)


@settings(max_examples=60, deadline=None)
@given(exprs, st.integers(0, 1))
def test_diff_agrees_with_central_differences(e, j):
    exact = diff(e, j).evaluate(points)
    approx = _fd(e, j, points)
    scale = np.maximum(1.0, np.abs(exact))
    assert np.all(np.abs(exact - approx) <= 1e-5 * scale)


@settings(max_examples=60, deadline=None)
@given(exprs)
def test_mixed_partials_commute(e):
    d12 = diff(diff(e, 0), 1).evaluate(points)
    d21 = diff(diff(e, 1), 0).evaluate(points)
    assert np.allclose(d12, d21, rtol=1e-9, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(exprs, exprs)
def test_diff_is_linear_and_leibniz(f, g):
    lin = diff(2 * f - g, 0) - (2 * diff(f, 0) - diff(g, 0))
    leib = diff(f * g, 1) - (diff(f, 1) * g + f * diff(g, 1))
    assert np.allclose(lin.evaluate(points), 0, atol=1e-9)
    assert np.allclose(leib.evaluate(points), 0, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(exprs)
def test_simplify_preserves_values(e):
    before = e.evaluate(points)
    after = simplify(e).evaluate(points)
    assert np.allclose(before, after, rtol=1e-9, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(exprs)
def test_printed_form_parses_back(e):
    back = parse(str(e), CHART)
    assert np.allclose(back.evaluate(points), e.evaluate(points), rtol=1e-12, atol=1e-12)


def test_compiled_evaluation_matches_exact():
    e = parse("(x1^2 + 1)/(x2 - 3) + exp(x1)*cos(x2)", CHART)
    exact = (0.25 + 1) / (-3.25) + math.exp(0.5) * math.cos(-0.25)
    assert abs(e.evaluate([0.5, -0.25]) - exact) < 1e-12
