"""Regular Dirac structures as Lie algebroids, and the IM-foliation given by
their characteristic distribution."""

from __future__ import annotations

from itertools import combinations
from typing import Sequence

from . import expr as E
from . import linalg
from .algebroid import LieAlgebroid
from .expr import Chart, SampleSpec
from .foliation import Frame, RankDeficiencyError, coordinate_frame, membership
from .geometry import (
    OneForm,
    VectorField,
    _FiberVec,
    d1,
    interior,
    lie_bracket,
    lie_derivative_oneform,
)
from .imfoliation import IMFoliation
from .report import Report

__all__ = ["DiracFrame", "DiracError", "dorfman", "pairing", "check_dirac", "dirac_to_algebroid", "dirac_im", "graph_frame"]


class DiracError(ValueError):
    pass


def dorfman(u, v):
    """[(X, xi), (Y, eta)] = ([X, Y], L_X eta - i_Y d xi)."""
    X, xi = u
    Y, eta = v
    return lie_bracket(X, Y), lie_derivative_oneform(X, eta) - interior(Y, d1(xi))


def pairing(u, v):
    """Symmetric pairing xi(Y) + eta(X)."""
    X, xi = u
    Y, eta = v
    return E.simplify(xi(Y) + eta(X))


def _stack(pair, chart):
    X, xi = pair
    return _FiberVec(chart, list(X.components) + list(xi.components))


class DiracFrame:
    def __init__(self, chart: Chart, pairs: Sequence):
        out = []
        for X, xi in pairs:
            if not isinstance(X, VectorField):
                X = VectorField(chart, X)
            if not isinstance(xi, OneForm):
                xi = OneForm(chart, xi)
            out.append((X, xi))
        if len(out) != chart.dim:
            raise DiracError(f"a Dirac structure on a {chart.dim}-dimensional chart needs {chart.dim} frame pairs")
        self.chart = chart
        self.pairs = out

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    def stacked(self) -> Frame:
        n = self.chart.dim
        return Frame([_stack(p, self.chart) for p in self.pairs], chart=self.chart, size=2 * n)


def check_dirac(D: DiracFrame, spec: SampleSpec = SampleSpec()) -> Report:
    """Rank, isotropy and Dorfman closure of the frame."""
    report = Report("Dirac structure")
    frame = D.stacked()
    try:
        frame.check_rank(spec)
        report.ok("rank", f"{len(D)} independent pairs", group="rank")
    except RankDeficiencyError as err:
        report.fail("rank", str(err), err.point, group="rank")
        return report
    n = len(D)
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    for i, j in pairs:
        report.check(f"<d{i + 1}, d{j + 1}> = 0", E.is_zero(pairing(D[i], D[j]), D.chart, spec), group="isotropy")
    for i, j in combinations(range(n), 2):
        b = _stack(dorfman(D[i], D[j]), D.chart)
        report.check(f"[d{i + 1}, d{j + 1}] in D", membership(b, frame, spec), group="closure")
    return report


def _expand(D: DiracFrame, pair):
    frame = D.stacked()
    coeffs, residual = linalg.expand(frame.columns(), list(_stack(pair, D.chart).components), D.chart)
    return coeffs, residual


def dirac_to_algebroid(D: DiracFrame, spec: SampleSpec = SampleSpec()) -> LieAlgebroid:
    """Anchor = projection to TM, structure functions from expanding Dorfman
    brackets of frame pairs over the frame."""
    n = D.chart.dim
    anchor = [[D[a][0].components[i] for a in range(n)] for i in range(n)]
    C = [[[E.ZERO] * n for _ in range(n)] for _ in range(n)]
    frame = D.stacked()
    for a, b in combinations(range(n), 2):
        br = _stack(dorfman(D[a], D[b]), D.chart)
        v = membership(br, frame, spec)
        if not v.ok:
            raise DiracError(f"[d{a + 1}, d{b + 1}] leaves the frame span (residual {v.residual:.3g} at {v.witness})")
        coeffs, _ = linalg.expand(frame.columns(), list(br.components), D.chart)
        for g in range(n):
            C[a][b][g] = E.simplify(coeffs[g])
            C[b][a][g] = E.simplify(-coeffs[g])
    return LieAlgebroid(D.chart, n, anchor, C, name="Dirac")


def dirac_im(D: DiracFrame, characteristic: Sequence[int], spec: SampleSpec = SampleSpec()) -> IMFoliation:
    """F_core = the named members (X, 0); F_M = their anchors, which must span
    coordinate directions; nabla_{d_i} of the class of d is the class of
    [(d_i, 0), d]."""
    chart = D.chart
    n = chart.dim
    characteristic = [int(i) for i in characteristic]
    for i in characteristic:
        if not 0 <= i < n:
            raise DiracError(f"characteristic index {i} is out of range")
        xi = D[i][1]
        if not all(isinstance(E.simplify(c), E.Const) and E.simplify(c).value == 0 for c in xi.components):
            raise DiracError(f"frame member d{i + 1} has a nonzero form part")
    fm_frame = Frame([D[i][0] for i in characteristic], chart=chart, size=n)
    try:
        fm_frame.check_rank(spec)
    except RankDeficiencyError as err:
        raise DiracError(f"characteristic vector fields are dependent: {err}") from err
    leaf = tuple(j for j in range(n) if membership(VectorField.coordinate(chart, j), fm_frame, spec).ok)
    if len(leaf) != len(characteristic):
        raise DiracError(
            f"characteristic distribution is not spanned by coordinate directions (found {len(leaf)} of {len(characteristic)})"
        )
    coord = coordinate_frame(chart, leaf)
    for i in characteristic:
        if not membership(D[i][0], coord, spec).ok:
            raise DiracError(f"d{i + 1} is not tangent to the coordinate directions {leaf}")
    A = dirac_to_algebroid(D, spec)
    core = [A.basis(i) for i in characteristic]
    rest = [a for a in range(n) if a not in characteristic]
    Q = [A.basis(a) for a in rest]
    gamma = []
    for j in leaf:
        e_j = (VectorField.coordinate(chart, j), OneForm.zero(chart))
        gj = []
        for a in rest:
            coeffs, residual = _expand(D, dorfman(e_j, D[a]))
            if not E.is_zero_many(residual, chart, spec).ok:
                raise DiracError(f"[(d/d{chart.names[j]}, 0), d{a + 1}] leaves the frame span")
            gj.append([E.simplify(coeffs[b]) for b in rest])
        gamma.append(gj)
    return IMFoliation(A, leaf, core, Q, gamma, name="Dirac")


def graph_frame(chart: Chart, omega) -> DiracFrame:
    """Frame (d_i, i_{d_i} omega) of the graph of a two-form."""
    return DiracFrame(chart, [
        (VectorField.coordinate(chart, i), interior(VectorField.coordinate(chart, i), omega)) for i in range(chart.dim)
    ])

