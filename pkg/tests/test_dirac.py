import pytest
from hypothesis import given, settings, strategies as st

from morphic import expr as E
from morphic.algebroid import anchor_apply, check_axioms
from morphic.dirac import (
    DiracError,
    DiracFrame,
    check_dirac,
    dirac_im,
    dirac_to_algebroid,
    dorfman,
    graph_frame,
    pairing,
)
from morphic.expr import Chart
from morphic.geometry import OneForm, TwoForm, VectorField, d0
from morphic.imfoliation import check_im, quotient

PLANE = Chart.make(["x1", "x2"])
SPACE = Chart.make(["x1", "x2", "x3"])
R4 = Chart.make(["x1", "x2", "x3", "x4"])


def test_dorfman_examples():
    d1, d2 = VectorField.coordinate(PLANE, 0), VectorField.coordinate(PLANE, 1)
    zero = OneForm.zero(PLANE)
    X, xi = dorfman((d1, zero), (d2, zero))
    assert X.is_zero().tier == "SymbolicZero" and xi.is_zero().tier == "SymbolicZero"
    X, xi = dorfman((d1, zero), (VectorField.zero(PLANE), OneForm(PLANE, ["0", "x1"])))
    assert X.is_zero().ok
    assert xi == OneForm.coordinate(PLANE, 1)


def test_pairing_is_symmetric():
    u = (VectorField(PLANE, ["x2", "1"]), OneForm(PLANE, ["0", "x1"]))
    v = (VectorField(PLANE, ["1", "0"]), OneForm(PLANE, ["x2", "1"]))
    assert pairing(u, v) == pairing(v, u)


def test_presymplectic_graph():
    D = graph_frame(R4, TwoForm.wedge(R4, 0, 1))
    assert [str(c) for c in D[0][1].components] == ["0", "1", "0", "0"]
    assert [str(c) for c in D[1][1].components] == ["-1", "0", "0", "0"]
    assert check_dirac(D).passed
    A = dirac_to_algebroid(D)
    assert all(c == E.ZERO for r in A.C for c0 in r for c in c0)
    for a in range(4):
        assert anchor_apply(A, A.basis(a)) == D[a][0]


def test_graph_of_a_non_closed_form_is_not_dirac():
    # x3 dx1^dx2 has d = dx1^dx2^dx3 != 0
    w = TwoForm(SPACE, [["0", "x3", "0"], ["-x3", "0", "0"], ["0", "0", "0"]])
    report = check_dirac(graph_frame(SPACE, w))
    assert not report.passed
    assert report.first_failure().group == "closure"
    with pytest.raises(DiracError):
        dirac_to_algebroid(graph_frame(SPACE, w))


def test_cotangent_bundle_is_dirac():
    D = DiracFrame(PLANE, [(VectorField.zero(PLANE), OneForm.coordinate(PLANE, i)) for i in range(2)])
    assert check_dirac(D).passed
    A = dirac_to_algebroid(D)
    assert check_axioms(A).passed
    assert all(x == E.ZERO for row in A.anchor for x in row)


def test_isotropy_failure():
    D = DiracFrame(PLANE, [(VectorField.coordinate(PLANE, 0), OneForm.coordinate(PLANE, 0)),
                           (VectorField.coordinate(PLANE, 1), OneForm.zero(PLANE))])
    report = check_dirac(D)
    assert report.first_failure().group == "isotropy"


def test_frame_size():
    with pytest.raises(DiracError):
        DiracFrame(PLANE, [(VectorField.coordinate(PLANE, 0), OneForm.zero(PLANE))])


def test_presymplectic_im_foliation_and_quotient():
    D = graph_frame(R4, TwoForm.wedge(R4, 0, 1))
    im = dirac_im(D, [2, 3])
    assert im.leaf == (2, 3)
    assert im.connection.is_zero_gamma()
    report, _ = check_im(im)
    assert report.passed
    qa, report = quotient(im)
    assert report.passed
    assert qa.chart.names == ("x1", "x2") and qa.rank == 2
    assert qa.anchor == ((E.ONE, E.ZERO), (E.ZERO, E.ONE))
    rep = check_axioms(qa)
    assert rep.passed and all(e.tier in ("SymbolicZero", "Pass") for e in rep.entries)


def test_characteristic_must_be_pure_vector_fields():
    D = graph_frame(R4, TwoForm.wedge(R4, 0, 1))
    with pytest.raises(DiracError):
        dirac_im(D, [0])


_c = st.sampled_from(["0", "1", "x1", "x2", "x1*x2", "sin(x1)", "x2^2"])
_pair = st.tuples(st.lists(_c, min_size=2, max_size=2), st.lists(_c, min_size=2, max_size=2)).map(
    lambda t: (VectorField(PLANE, t[0]), OneForm(PLANE, t[1]))
)


def _sub(u, v):
    return (u[0] - v[0], u[1] - v[1])


@settings(max_examples=25, deadline=None)
@given(_pair, _pair, _pair)
def test_dorfman_satisfies_the_leibniz_identity(u, v, w):
    # [u, [v, w]] = [[u, v], w] + [v, [u, w]]
    lhs = dorfman(u, dorfman(v, w))
    a = dorfman(dorfman(u, v), w)
    b = dorfman(v, dorfman(u, w))
    X, xi = _sub(lhs, (a[0] + b[0], a[1] + b[1]))
    assert X.is_zero().ok and xi.is_zero().ok


@settings(max_examples=25, deadline=None)
@given(_pair, _pair)
def test_dorfman_symmetric_part_is_exact(u, v):
    # [u, v] + [v, u] = d<u, v>
    s = dorfman(u, v)
    t = dorfman(v, u)
    assert (s[0] + t[0]).is_zero().ok
    assert (s[1] + t[1] - d0(pairing(u, v), PLANE)).is_zero().ok
