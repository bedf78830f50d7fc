import numpy as np
import pytest

from morphic import expr as E
from morphic.algebroid import LieAlgebroid, as_total_space_field, core_field, total_chart
from morphic.connection import NUMERIC, SYMBOLIC
from morphic.expr import Chart, simplify
from morphic.foliation import Frame, involutive, membership
from morphic.geometry import VectorField
from morphic.imfoliation import (
    IMFoliation,
    IMFoliationError,
    MorphicFoliation,
    _restrict_to_section,
    check_im,
    check_morphic,
    construct_fa,
    extract_nabla,
    quotient,
    roundtrip,
)
from morphic.model import load_gallery

PLANE = Chart.make(["x1", "x2"])


def groups_failed(report):
    return [e.group for e in report.entries if not e.passed]


def test_heisenberg_center_is_an_im_foliation(heisenberg):
    e1, e2, e3 = heisenberg.frame()
    im = IMFoliation(heisenberg, (), [e3], [e1, e2])
    report, pf = check_im(im)
    assert report.passed, report.format()
    assert pf.certificate == SYMBOLIC


def test_non_ideal_core_fails_with_a_pair(heisenberg):
    e1, e2, e3 = heisenberg.frame()
    report, _ = check_im(IMFoliation(heisenberg, (), [e1], [e2, e3]))
    bad = report.first_failure()
    assert bad.group.startswith("(2)")
    assert bad.witness["pair"] == ["e1", "e2"]


def test_translation_action_passes():
    A = LieAlgebroid.tangent(PLANE)
    report, _ = check_im(IMFoliation(A, (0,), [], A.frame()))
    assert report.passed


def test_curved_connection_fails_flatness():
    A = LieAlgebroid(PLANE, 1)
    report, pf = check_im(IMFoliation(A, (0, 1), [], [A.basis(0)], [[["x2"]], [["0"]]]))
    assert pf is None
    assert groups_failed(report) == ["(1) nabla is flat"]


def test_core_must_be_anchored_into_the_leaves():
    A = LieAlgebroid.tangent(PLANE)
    report, _ = check_im(IMFoliation(A, (0,), [A.basis(1)], [A.basis(0)]))
    assert "invariants" in groups_failed(report)


def test_bracket_of_parallel_sections_must_be_parallel():
    # TM over the plane, leaves along x1, Q = {d1, x1 d2}: with Gamma = 0 the
    # parallel frame is Q itself and [d1, x1 d2] = d2 is not parallel
    A = LieAlgebroid.tangent(PLANE)
    im = IMFoliation(A, (0,), [], [A.basis(0), A.section(["0", "x1"])])
    report, _ = check_im(im)
    failed = groups_failed(report)
    assert "(3) [parallel, parallel] is parallel" in failed


def test_anchor_condition():
    # rho(P) = x1 d2 with leaves along x1: [d1, x1 d2] = d2 is not in F_M
    A = LieAlgebroid(PLANE, 1, [["0"], ["x1"]])
    report, _ = check_im(IMFoliation(A, (0,), [], [A.basis(0)]))
    assert "(4) rho(parallel) is Bott-parallel" in groups_failed(report)


def test_construct_fa_translation_action_is_horizontal():
    A = LieAlgebroid.tangent(PLANE)
    fa = construct_fa(IMFoliation(A, (0,), [], A.frame()))
    assert len(fa.fields) == 1
    assert [str(c) for c in fa.fields[0].components] == ["1", "0", "0", "0"]


def test_construct_fa_heisenberg_is_the_core(heisenberg):
    e1, e2, e3 = heisenberg.frame()
    fa = construct_fa(IMFoliation(heisenberg, (), [e3], [e1, e2]))
    assert fa.fields == [core_field(heisenberg, e3)]
    assert check_morphic(fa).passed


def test_construct_fa_rejects_failing_input(heisenberg):
    e1, e2, e3 = heisenberg.frame()
    with pytest.raises(IMFoliationError):
        construct_fa(IMFoliation(heisenberg, (), [e1], [e2, e3]))


def test_construct_fa_with_exponential_frame():
    line = Chart.make(["x1"])
    A = LieAlgebroid(line, 1)
    fa = construct_fa(IMFoliation(A, (0,), [], [A.basis(0)], [[["1"]]]))
    # the parallel section is exp(-x1) e1, so the lift of d1 is d1 - a1 d/da1
    assert [str(c) for c in fa.fields[0].components] == ["1", "-a1"]


def test_hand_built_non_ideal_fails_closure(heisenberg):
    e1 = heisenberg.basis(0)
    fa = MorphicFoliation(heisenberg, [core_field(heisenberg, e1)], ())
    report = check_morphic(fa)
    assert report.entries[0].passed
    assert "(ii) subalgebroid of TA -> TM" in groups_failed(report)


def test_curved_lift_is_not_involutive():
    # lifts d1 and d2 + x1 a1 d/da1 of two leaf directions: their bracket is a1 d/da1
    A = LieAlgebroid(PLANE, 1)
    tc = total_chart(A)
    X1 = as_total_space_field(A, VectorField.coordinate(PLANE, 0), [["0"]], tc)
    X2 = as_total_space_field(A, VectorField.coordinate(PLANE, 1), [["x1"]], tc)
    report = check_morphic(MorphicFoliation(A, [X1, X2], (0, 1)))
    assert groups_failed(report)[0] == "(i) involutive"


def test_rescaled_core_field_is_pointwise_involutive():
    # {d1, x1 d/da1} spans the whole tangent space wherever x1 != 0, so the
    # bracket d/da1 stays in the pointwise span
    line = Chart.make(["x1"])
    A = LieAlgebroid(line, 1)
    tc = total_chart(A)
    frame = Frame([VectorField.coordinate(tc, 0), VectorField(tc, ["0", "x1"])])
    assert involutive(frame).passed


def test_tangent_lift_of_parallel_sections_lies_in_fa():
    line = Chart.make(["x1"])
    A = LieAlgebroid(line, 1)
    fa = construct_fa(IMFoliation(A, (0,), [], [A.basis(0)], [[["1"]]]))

    def lift_in_fa(s):
        gens = Frame(_restrict_to_section(fa.fields, s, line), chart=line, size=2)
        return membership([E.ONE, E.diff(s.components[0], 0)], gens)

    assert lift_in_fa(A.section(["exp(-x1)"])).ok
    assert lift_in_fa(A.section(["3*exp(-x1)"])).ok
    assert not lift_in_fa(A.basis(0)).ok


def test_extract_from_horizontal_fa_is_zero():
    A = LieAlgebroid(PLANE, 2)
    tc = total_chart(A)
    fa = MorphicFoliation(A, [as_total_space_field(A, VectorField.coordinate(PLANE, 0), [[0, 0], [0, 0]], tc)], (0,))
    conn = extract_nabla(fa)
    assert conn.is_zero_gamma()
    assert conn.report.passed


def test_extract_uses_any_combination_of_lifts():
    # generators (1 + x2^2) times the lift, plus a core field, give the same connection
    A = LieAlgebroid(PLANE, 2)
    tc = total_chart(A)
    # D_X e1 = -(x2 e1 + e2), whose class modulo e2 is -x2
    lift = as_total_space_field(A, VectorField.coordinate(PLANE, 0), [["x2", "0"], ["1", "0"]], tc)
    fa = MorphicFoliation(A, [lift * tc.parse("1 + x2^2"), core_field(A, A.basis(1), tc)], (0,))
    conn = extract_nabla(fa)
    assert [[str(x) for x in row] for row in conn.gamma[0]] == [["-x2"]]
    assert conn.report.passed


def test_lift_independence_spot_check():
    # D_X e1 = -e2 lies in the core, and perturbing the lift by a core-valued field keeps nabla
    A = LieAlgebroid(PLANE, 2)
    tc = total_chart(A)
    lift = as_total_space_field(A, VectorField.coordinate(PLANE, 0), [["0", "0"], ["1", "0"]], tc)
    conn = extract_nabla(MorphicFoliation(A, [lift, core_field(A, A.basis(1), tc)], (0,)))
    assert conn.report.passed


@pytest.mark.parametrize("name", ["heisenberg-ideal", "translation-action", "exponential-line", "transported-frame"])
def test_roundtrip_gallery(name):
    model = load_gallery(name)
    report = roundtrip(model.im, model.spec)
    assert report.passed, report.format()
    tier = report.find("extracted connection")[0].tier
    if model.im.connection.is_zero_gamma():
        assert tier == "SymbolicZero"


def test_transported_frame_is_numeric():
    model = load_gallery("transported-frame")
    report = roundtrip(model.im, model.spec)
    assert report.certificate == NUMERIC
    assert report.fa.certificate == NUMERIC


def test_heisenberg_quotient_is_abelian(heisenberg):
    e1, e2, e3 = heisenberg.frame()
    qa, report = quotient(IMFoliation(heisenberg, (), [e3], [e1, e2]))
    assert report.passed
    assert qa.rank == 2
    assert all(c == E.ZERO for r in qa.C for c0 in r for c in c0)


def test_quotient_of_bott_line():
    qa, report = quotient(load_gallery("bott-line").im)
    assert report.passed, report.format()
    assert qa.chart.names == ("x2",)
    assert qa.rank == 1 and qa.anchor == ((E.ONE,),)


def test_translation_action_quotient_keeps_the_leaf_direction():
    # without a core, the section d1 survives in A/F_core with zero anchor on the x2 line
    qa, report = quotient(load_gallery("translation-action").im)
    assert report.passed
    assert qa.rank == 2
    assert qa.anchor == ((E.ZERO, E.ONE),)


def test_quotient_refuses_failing_input(heisenberg):
    e1, e2, e3 = heisenberg.frame()
    qa, report = quotient(IMFoliation(heisenberg, (), [e1], [e2, e3]))
    assert qa is None and not report.passed


def test_quotient_of_leaf_dependent_frame():
    # TM over the plane, core d1, complement Q = exp(x1) d2 with nabla Q = Q:
    # the parallel section is d2 and the quotient is T of the x2 line
    A = LieAlgebroid.tangent(PLANE)
    im = IMFoliation(A, (0,), [A.basis(0)], [A.section(["0", "exp(x1)"])], [[["1"]]])
    qa, report = quotient(im)
    assert report.passed, report.format()
    assert qa.rank == 1
    assert simplify(qa.anchor[0][0] - 1) == E.ZERO
