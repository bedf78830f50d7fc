import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morphic import expr as E
from morphic.expr import Chart, SampleSpec, simplify
from morphic.foliation import (
    Frame,
    RankDeficiencyError,
    adapted_chart_check,
    bott,
    coordinate_frame,
    involutive,
    membership,
)
from morphic.geometry import VectorField

PLANE = Chart.make(["x1", "x2"])
SPACE = Chart.make(["x1", "x2", "x3"])


def vf(chart, *comps):
    return VectorField(chart, list(comps))


def test_membership_examples():
    F = Frame([vf(SPACE, "1", "0", "x2"), vf(SPACE, "0", "1", "0")])
    assert membership(F[0], F).tier == "SymbolicZero"
    v = F[0] * SPACE.var(0) + F[1] * SPACE.var(1)
    assert membership(v, F).ok
    out = membership(vf(SPACE, "0", "0", "1"), F)
    assert out.tier == "NonZero"
    assert out.witness is not None and out.residual > 0.1


def test_membership_residual_is_relative_to_the_vector():
    F = Frame([vf(PLANE, "1", "0")])
    w = VectorField(PLANE, [E.ONE, PLANE.parse("x1 + x1^2")])
    out = membership(w, F)
    assert not out.ok
    x1 = out.witness[0]
    off = abs(x1 + x1 ** 2)
    assert out.residual == pytest.approx(off / max(1.0, np.hypot(1.0, off)), rel=1e-9)


def test_membership_rank_deficiency():
    F = Frame([vf(PLANE, "1", "0"), vf(PLANE, "x1", "0")])
    with pytest.raises(RankDeficiencyError):
        membership(vf(PLANE, "0", "1"), F)


def test_involutivity_examples():
    assert involutive(coordinate_frame(PLANE, [0, 1])).passed
    contact = Frame([vf(SPACE, "1", "0", "0"), vf(SPACE, "0", "x1", "1")])
    rep = involutive(contact)
    assert not rep.passed
    assert rep.first_failure().witness is not None
    rescaled = Frame([vf(SPACE, "1", "0", "0"), vf(SPACE, "0", "1 + x1", "0")])
    assert involutive(rescaled).passed


def test_bott_examples():
    F = coordinate_frame(PLANE, [0])
    Q = coordinate_frame(PLANE, [1])
    assert simplify(bott(F, vf(PLANE, "0", "1"), Q)[0][0]) == E.ZERO
    assert simplify(bott(F, vf(PLANE, "0", "x1"), Q)[0][0]) == E.ONE
    assert simplify(bott(F, vf(PLANE, "x1*x2", "0"), Q)[0][0]) == E.ZERO


def test_adapted_chart_examples():
    assert adapted_chart_check(coordinate_frame(PLANE, [0]), 1).passed
    half = Chart.make(["x1", "x2"], [(-0.5, 1), (-1, 1)])
    assert adapted_chart_check(Frame([vf(half, "1 + x1", "0")]), 1).passed
    rep = adapted_chart_check(Frame([vf(PLANE, "1", "1")]), 1)
    assert not rep.passed
    assert adapted_chart_check(coordinate_frame(SPACE, [2]), (2,)).passed


_coef = st.sampled_from(["1", "2", "x1", "x2^2 + 1", "exp(x3)", "cos(x1)/3"])


@settings(max_examples=25, deadline=None)
@given(_coef, _coef, _coef)
def test_membership_invariant_under_recombination(a, b, c):
    # replacing a frame by an invertible recombination changes nothing
    F = Frame([vf(SPACE, "1", "0", "x2"), vf(SPACE, "0", "1", "x1")])
    a, b, c = (SPACE.parse(t) for t in (a, b, c))
    # the lower-triangular matrix [[exp(x3)+1, 0], [c, 1]] is invertible everywhere
    G = Frame([F[0] * (E.exp(SPACE.var(2)) + 1) + F[1] * c, F[1]])
    v = F[0] * a + F[1] * b
    assert membership(v, F).ok and membership(v, G).ok
    w = v + vf(SPACE, "0", "0", "1")
    assert not membership(w, F).ok and not membership(w, G).ok
    assert involutive(F).passed == involutive(G).passed
