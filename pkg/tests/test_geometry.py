import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morphic import expr as E
from morphic.expr import Chart, SampleSpec, simplify
from morphic.geometry import (
    FlowExitError,
    NonLinearFieldError,
    OneForm,
    TwoForm,
    VectorField,
    d0,
    d1,
    flow,
    flow_invariance_check,
    interior,
    lie_bracket,
    lie_derivative_oneform,
    linear_decomposition,
    tangent_lift_field,
    total_space_chart,
)

PLANE = Chart.make(["x1", "x2"])
SPACE = Chart.make(["x1", "x2", "x3"])


def vf(chart, *comps):
    return VectorField(chart, list(comps))


def test_bracket_examples():
    d1_ = VectorField.coordinate(PLANE, 0)
    assert lie_bracket(d1_, vf(PLANE, "x1", "0")) == d1_
    X = vf(PLANE, "x1*x2", "sin(x1)")
    assert lie_bracket(X, X).is_zero().tier == "SymbolicZero"
    got = lie_bracket(vf(PLANE, "0", "x1"), vf(PLANE, "x2", "0"))
    assert got == vf(PLANE, "x1", "-x2")


def test_forms_examples():
    assert d0(PLANE.parse("x1*x2"), PLANE) == OneForm(PLANE, ["x2", "x1"])
    f = PLANE.parse("exp(x1)*x2")
    w = d1(d0(f, PLANE))
    assert all(simplify(c) == E.ZERO for row in w.matrix for c in row)
    got = interior(VectorField.coordinate(PLANE, 0), TwoForm.wedge(PLANE, 0, 1))
    assert got == OneForm.coordinate(PLANE, 1)


def test_two_form_must_be_antisymmetric():
    with pytest.raises(ValueError):
        TwoForm(PLANE, [["0", "1"], ["1", "0"]])


def test_chart_mismatch():
    with pytest.raises(ValueError):
        lie_bracket(VectorField.coordinate(PLANE, 0), VectorField.coordinate(SPACE, 0))


def test_flow_examples():
    assert np.allclose(flow(VectorField.coordinate(PLANE, 0), [0.0, 0.0], 1.0), [1.0, 0.0])
    line = Chart.make(["x1"], [(-5, 5)])
    assert abs(flow(vf(line, "x1"), [1.0], 1.0)[0] - math.e) < 1e-6
    p = np.array([0.3, -0.2])
    assert np.array_equal(flow(vf(PLANE, "x2", "x1"), p, 0.0), p)


def test_flow_exit_names_the_step():
    with pytest.raises(FlowExitError) as info:
        flow(VectorField.coordinate(PLANE, 0), [0.5, 0.0], 1.0)
    assert 500 <= info.value.step <= 502
    out = flow(VectorField.coordinate(PLANE, 0), [0.5, 0.0], 1.0, check_box=False)
    assert np.allclose(out, [1.5, 0.0])


def test_tangent_lift_field():
    T = tangent_lift_field(vf(PLANE, "x1*x2", "0"))
    assert T.chart.names == ("x1", "x2", "x1dot", "x2dot")
    assert simplify(T.components[2] - T.chart.parse("x2*x1dot + x1*x2dot")) == E.ZERO


def test_linear_decomposition():
    tot = total_space_chart(Chart.make(["x"]), ["a1", "a2"])
    X = vf(tot, "1", "x*a2 + a1", "0")
    xbar, L, v0 = linear_decomposition(X)
    assert xbar == VectorField.coordinate(Chart.make(["x"]), 0)
    assert [[str(c) for c in row] for row in L] == [["1", "x"], ["0", "0"]]
    assert all(c == E.ZERO for c in v0)
    with pytest.raises(NonLinearFieldError):
        linear_decomposition(vf(tot, "a1", "0", "0"))
    with pytest.raises(NonLinearFieldError):
        linear_decomposition(vf(tot, "1", "a1*a2", "0"))


# flow invariance of fiber subbundles under linear fields

TOTAL = total_space_chart(Chart.make(["x"]), ["a1", "a2"])


def _groups(report, group):
    return [e for e in report.entries if e.group == group]


def test_invariance_of_scaled_line():
    X = vf(TOTAL, "1", "a1", "0")
    for B in ([["1", "0"]], [["0", "1"]]):
        rep = flow_invariance_check(X, B)
        assert rep.passed, rep.format()
        assert rep.hypothesis_holds


def test_invariance_of_shear():
    X = vf(TOTAL, "1", "a2", "0")
    rep = flow_invariance_check(X, [["1", "0"]])
    assert rep.passed
    rep = flow_invariance_check(X, [["0", "1"]])
    assert not rep.hypothesis_holds
    assert not _groups(rep, "hypothesis")[0].passed
    assert not _groups(rep, "flow")[0].passed


def test_invariance_rejects_affine_fields():
    with pytest.raises(NonLinearFieldError):
        flow_invariance_check(vf(TOTAL, "1", "a1 + 1", "0"), [["1", "0"]])


# properties

_comps = st.sampled_from(["x1", "x2", "x3", "x1*x2", "sin(x3)", "x2^2 - x1", "exp(x1)*x3", "1", "0", "cos(x1*x2)"])
fields = st.lists(_comps, min_size=3, max_size=3).map(lambda cs: VectorField(SPACE, cs))
POINTS = SPACE.sample(25, 5)


@settings(max_examples=30, deadline=None)
@given(fields, fields, fields)
def test_jacobi(X, Y, Z):
    s = lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X)) + lie_bracket(Z, lie_bracket(X, Y))
    assert s.is_zero().ok


@settings(max_examples=30, deadline=None)
@given(fields, _comps)
def test_naturality_of_d(X, f):
    f = SPACE.parse(f)
    lhs = lie_derivative_oneform(X, d0(f, SPACE))
    rhs = d0(X(f), SPACE)
    assert np.allclose(lhs.evaluate(POINTS), rhs.evaluate(POINTS), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(fields, st.lists(_comps, min_size=3, max_size=3))
def test_cartan_formula(X, xi):
    xi = OneForm(SPACE, xi)
    cartan = interior(X, d1(xi)) + d0(xi(X), SPACE)
    assert np.allclose(lie_derivative_oneform(X, xi).evaluate(POINTS), cartan.evaluate(POINTS), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(fields, fields)
def test_bracket_is_derivation_commutator(X, Y):
    f = SPACE.parse("x1*sin(x2) + x3^2")
    lhs = lie_bracket(X, Y)(f)
    rhs = X(Y(f)) - Y(X(f))
    assert np.allclose(lhs.evaluate(POINTS), rhs.evaluate(POINTS), atol=1e-10)


ROTATION = vf(Chart.make(["x1", "x2"], [(-3, 3), (-3, 3)]), "-x2", "x1 + x2/5")


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.05, 0.6), st.floats(0.05, 0.6))
def test_flow_group_law(a, b, s, t):
    p = np.array([a, b])
    two_step = flow(ROTATION, flow(ROTATION, p, s), t)
    assert np.allclose(two_step, flow(ROTATION, p, s + t), atol=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.05, 0.8))
def test_flow_reversal(a, b, t):
    p = np.array([a, b])
    assert np.allclose(flow(ROTATION, flow(ROTATION, p, t), -t), p, atol=1e-9)
