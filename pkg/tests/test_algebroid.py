import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morphic import expr as E
from morphic.algebroid import (
    AlgebroidMismatch,
    D_X,
    LieAlgebroid,
    TangentSection,
    anchor_apply,
    as_total_space_field,
    bracket,
    check_axioms,
    core_field,
    tangent_anchor,
    tangent_bracket,
    tangent_lift_core,
    tangent_lift_linear,
    total_chart,
)
from morphic.expr import Chart, simplify
from morphic.geometry import VectorField, lie_bracket, tangent_lift_field

from conftest import heisenberg_constants

PLANE = Chart.make(["x1", "x2"])
TM = LieAlgebroid.tangent(PLANE)
ANCHORED = LieAlgebroid(PLANE, 2, [["1", "0"], ["0", "exp(x1)"]], [[[0, 0], [0, 1]], [[0, -1], [0, 0]]])


def test_heisenberg_bracket(heisenberg):
    e1, e2, e3 = heisenberg.frame()
    assert bracket(heisenberg, e1, e2) == e3
    assert bracket(heisenberg, e2, e1) == -e3
    a = heisenberg.section(["x1", "1", "x1^2"])
    assert bracket(heisenberg, a, a).is_zero().tier == "SymbolicZero"
    assert anchor_apply(heisenberg, e1) == VectorField.zero(heisenberg.chart)


def test_tangent_algebroid_matches_lie_bracket():
    a = TM.section(["0", "x1"])
    b = TM.section(["x2", "0"])
    assert bracket(TM, a, b) == TM.section(["x1", "-x2"])
    X, Y = VectorField(PLANE, a.components), VectorField(PLANE, b.components)
    assert list(bracket(TM, a, b).components) == list(lie_bracket(X, Y).components)
    assert anchor_apply(TM, a) == X


def test_axioms_hold(heisenberg):
    for A in (heisenberg, TM, LieAlgebroid.tangent(Chart.make(["x1", "x2", "x3"]))):
        rep = check_axioms(A)
        assert rep.passed, rep.format()
        assert {e.group for e in rep.entries} >= {"antisymmetry", "Jacobi", "anchor"}


def test_corrupted_structure_breaks_jacobi():
    # [e1, e2] = x1 e3 and [e3, e1] = e1: the cyclic sum on (e1, e2, e3) is x1 e3
    C = [[[0] * 3 for _ in range(3)] for _ in range(3)]
    C[0][1][2], C[1][0][2] = "x1", "-x1"
    C[2][0][0], C[0][2][0] = 1, -1
    A = LieAlgebroid.lie_algebra(C)
    rep = check_axioms(A)
    bad = rep.first_failure()
    assert bad.group == "Jacobi"
    assert "(e1, e2, e3)" in bad.name
    assert bad.witness is not None and abs(bad.witness[0]) == pytest.approx(bad.residual)


def test_structure_must_be_antisymmetric():
    C = heisenberg_constants()
    C[1][0][2] = 1
    with pytest.raises(ValueError):
        LieAlgebroid.lie_algebra(C)


def test_sections_of_different_algebroids(heisenberg):
    with pytest.raises(AlgebroidMismatch):
        bracket(TM, TM.basis(0), heisenberg.basis(0))


def test_axioms_with_a_nontrivial_anchor():
    # rho(e1) = d1, rho(e2) = exp(x1) d2, [e1, e2] = e2
    assert check_axioms(ANCHORED).passed
    broken = LieAlgebroid(PLANE, 2, [["1", "0"], ["0", "exp(x1)"]])
    rep = check_axioms(broken)
    assert rep.first_failure().group == "anchor"


# tangent lifts

def test_linear_and_core_lifts():
    A = LieAlgebroid(PLANE, 3)
    c = A.section(["2", "0", "-1"])
    comps = tangent_lift_linear(A, c).components()
    assert [str(x) for x in comps] == ["2", "0", "-1", "0", "0", "0"]
    a = A.section(["x1", "0", "0"])
    comps = tangent_lift_linear(A, a).components()
    assert str(comps[3]) == "x1dot" and all(x == E.ZERO for x in comps[4:])
    hat = tangent_lift_core(A, A.section(["x1", "x2", "1"])).components()
    assert all(x == E.ZERO for x in hat[:3])


def test_tangent_bracket_examples(heisenberg):
    e1, e2, e3 = heisenberg.frame()
    T = tangent_lift_linear
    got = tangent_bracket(heisenberg, T(heisenberg, e1), T(heisenberg, e2))
    assert got.components() == T(heisenberg, e3).components()
    hat = tangent_lift_core
    assert all(c == E.ZERO for c in tangent_bracket(heisenberg, hat(heisenberg, e1), hat(heisenberg, e2)).components())
    a = TM.section(["0", "x1"])
    b = TM.section(["1", "0"])
    got = tangent_bracket(TM, T(TM, a), hat(TM, b))
    assert got.components() == hat(TM, TM.section(["0", "-1"])).components()


def test_tangent_anchor_is_complete_lift():
    A = LieAlgebroid(PLANE, 2, [["x2", "0"], ["0", "sin(x1)"]])
    a = A.section(["x1", "x2^2"])
    rho_a = anchor_apply(A, a)
    lifted = tangent_lift_field(rho_a)
    assert tangent_anchor(A, "T", a).components == lifted.components
    core = tangent_anchor(A, "core", a).components
    assert core[:2] == (E.ZERO, E.ZERO) and core[2:] == rho_a.components


_comp = st.sampled_from(["0", "1", "x1", "x2", "x1*x2", "sin(x2)", "x1^2 - 1"])
_sec = st.lists(_comp, min_size=2, max_size=2)
_kind = st.sampled_from(["T", "core"])


@settings(max_examples=30, deadline=None)
@given(_kind, _sec, _kind, _sec, _comp)
def test_tangent_bracket_is_compatible_with_anchor(k1, a, k2, b, f):
    # rho_TA is a bracket morphism: rho[u, v] = [rho u, rho v]
    A = ANCHORED

    def tc_field(ts):
        return sum((tangent_anchor(A, k, s, ts.tchart) * c for c, k, s in ts.terms), VectorField.zero(ts.tchart))

    u = TangentSection(A, [(PLANE.parse(f), k1, A.section(a))])
    v = TangentSection(A, [(E.ONE, k2, A.section(b))])
    lhs = tc_field(tangent_bracket(A, u, v))
    rhs = lie_bracket(tc_field(u), tc_field(v))
    assert (lhs - rhs).is_zero().ok


# linear fields on the total space

def test_core_fields_commute():
    A = LieAlgebroid(PLANE, 2)
    a, b = A.section(["x1", "x2^2"]), A.section(["sin(x1)", "1"])
    assert lie_bracket(core_field(A, a), core_field(A, b)).is_zero().tier == "SymbolicZero"


def test_D_X_examples():
    line = Chart.make(["x"])
    A = LieAlgebroid(line, 2)
    X = as_total_space_field(A, VectorField.coordinate(line, 0), [[0, 0], [0, 0]])
    a = A.section(["x^2", "sin(x)"])
    assert D_X(A, X, a) == A.section(["2*x", "cos(x)"])
    X = as_total_space_field(A, VectorField.coordinate(line, 0), [[1, 0], [0, 0]])
    assert D_X(A, X, A.basis(0)) == -A.basis(0)
    assert D_X(A, X, A.basis(1)) == A.zero()


@settings(max_examples=30, deadline=None)
@given(_sec, _sec, st.lists(_comp, min_size=4, max_size=4), _comp)
def test_D_X_is_the_bracket_with_core_fields(xbar, a, L, f):
    # [X, a^up] = (D_X a)^up, and D_X(f a) = f D_X a + Xbar(f) a
    A = LieAlgebroid(PLANE, 2)
    X = as_total_space_field(A, VectorField(PLANE, xbar), [L[:2], L[2:]])
    a = A.section(a)
    assert (lie_bracket(X, core_field(A, a)) - core_field(A, D_X(A, X, a))).is_zero().ok
    f = PLANE.parse(f)
    lhs = D_X(A, X, a * f)
    rhs = D_X(A, X, a) * f + a * VectorField(PLANE, xbar)(f)
    assert (lhs - rhs).is_zero().ok
