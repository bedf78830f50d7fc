"""Infinitesimal data of multiplicative foliations and the morphic
foliations of the total space they correspond to.

The infinitesimal side is an :class:`IMFoliation`: an algebroid A, coordinate
leaf directions spanning F_M, a core frame spanning F_core and a flat partial
connection on A/F_core.  The total-space side is a :class:`MorphicFoliation`,
a frame of linear and core vector fields on the total space of A.

Conditions quantified over all parallel sections are checked on one parallel
frame P.  Every parallel section is a combination of P with coefficients
constant along the leaves, and rho(F_core) lies in F_M, so the extra Leibniz
terms vanish and the frame-level checks suffice.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

from . import expr as E
from . import linalg
from .algebroid import (
    LieAlgebroid,
    Section,
    anchor_apply,
    as_total_space_field,
    bracket,
    check_axioms,
    core_field,
    total_chart,
)
from .connection import (
    NUMERIC,
    NUMERIC_TOL,
    SYMBOLIC,
    NotFlatError,
    NotParallelError,
    ParallelFrame,
    PartialConnection,
    holonomy_trivial,
    is_flat,
    parallel_frame,
)
from .expr import Chart, SampleSpec
from .foliation import Frame, coordinate_frame, involutive, membership
from .geometry import NonLinearFieldError, VectorField, _FiberVec, lie_bracket, linear_decomposition
from .report import Entry, Report

__all__ = [
    "IMFoliation", "MorphicFoliation", "IMFoliationError", "check_im", "construct_fa", "check_morphic",
    "extract_nabla", "roundtrip", "quotient", "section_label",
]

CONSTRUCTED = "ConstructedFromIM"
USER_SUPPLIED = "UserSupplied"


class IMFoliationError(ValueError):
    def __init__(self, message, report: Report | None = None):
        super().__init__(message)
        self.report = report


def _s(e):
    return e if E.has_opaque(e) else E.simplify(e)


def _is0(e):
    return isinstance(e, E.Const) and e.value == 0


def section_label(s: Section, fallback: str) -> str:
    comps = s.components
    if any(E.has_opaque(c) for c in comps):
        return fallback
    nz = [i for i, c in enumerate(comps) if not _is0(c)]
    if len(nz) == 1 and comps[nz[0]] == E.ONE:
        return f"e{nz[0] + 1}"
    return "(" + ", ".join(str(c) for c in comps) + ")"


class IMFoliation:
    """The quadruple (A, F_M, F_core, nabla) with F_M spanned by the
    coordinate directions ``leaf``."""

    def __init__(self, algebroid: LieAlgebroid, leaf, core: Sequence[Section], complement: Sequence[Section],
                 gamma=None, candidate=None, name: str = ""):
        self.connection = PartialConnection(algebroid, leaf, core, complement, gamma, candidate)
        self.name = name

    @property
    def algebroid(self) -> LieAlgebroid:
        return self.connection.algebroid

    @property
    def chart(self) -> Chart:
        return self.algebroid.chart

    @property
    def leaf(self) -> tuple:
        return self.connection.leaf

    @property
    def core(self) -> list:
        return self.connection.core

    @property
    def complement(self) -> list:
        return self.connection.Q

    @property
    def gamma(self):
        return self.connection.gamma

    def core_frame(self) -> Frame:
        return Frame(self.core, chart=self.chart, size=self.algebroid.rank)

    def __repr__(self):
        return f"IMFoliation(leaf={self.leaf}, r={len(self.core)}, rank={self.algebroid.rank})"


def _tiered(spec: SampleSpec, certificate: str) -> SampleSpec:
    return spec.with_tol(max(spec.tol, NUMERIC_TOL)) if certificate == NUMERIC else spec


def _invariants(im: IMFoliation, spec: SampleSpec, report: Report) -> None:
    A = im.algebroid
    report.extend(im.connection.check_frames(spec), group="invariants")
    fm = coordinate_frame(im.chart, im.leaf)
    for i, c in enumerate(im.core):
        report.check(f"rho({section_label(c, f'c{i + 1}')}) in F_M", membership(anchor_apply(A, c), fm, spec),
                     group="invariants")


def check_im(im: IMFoliation, spec: SampleSpec = SampleSpec()) -> tuple:
    """Verify the four conditions plus the subalgebroid property of F_core.

    Returns ``(report, parallel_frame)``; the frame is None when the
    connection is not flat or no parallel frame could be certified.
    """
    report = Report("IM-foliation conditions")
    A, conn = im.algebroid, im.connection
    _invariants(im, spec, report)
    core = im.core_frame()
    cn = [section_label(c, f"c{i + 1}") for i, c in enumerate(im.core)]
    group = "(0) F_core is a subalgebroid"
    for i, j in combinations(range(len(im.core)), 2):
        report.check(f"[{cn[i]}, {cn[j]}] in F_core", membership(bracket(A, im.core[i], im.core[j]), core, spec),
                     group=group)
    if len(im.core) < 2:
        report.ok("bracket closure", "fewer than two core sections", group=group)
    group = "(1) nabla is flat"
    flat = is_flat(conn, spec)
    report.extend(flat, group=group)
    if not flat.passed:
        report.notes.append("connection is not flat: no parallel frame, conditions (2)-(4) not evaluated")
        return report, None
    try:
        pf = parallel_frame(conn, spec, check_flat=False)
    except NotParallelError as err:
        report.fail("parallel frame", str(err), err.witness, group=group)
        return report, None
    report.ok("parallel frame", f"{pf.method} ({pf.certificate})", group=group)
    if pf.certificate == NUMERIC:
        report.certificate = NUMERIC
        report.notes.append(f"numeric parallel frame: tolerances raised to {NUMERIC_TOL:g}")
    tspec = _tiered(spec, pf.certificate)
    P = pf.parallel
    pn = [section_label(p, f"P{i + 1}") for i, p in enumerate(P)]

    group = "(2) [parallel, core] in F_core"
    for i, c in enumerate(im.core):
        for j, p in enumerate(P):
            v = membership(bracket(A, c, p), core, tspec)
            entry = report.check(f"[{cn[i]}, {pn[j]}] in F_core", v, group=group, certificate=pf.certificate)
            if not v.ok:
                entry.witness = {"pair": [cn[i], pn[j]], "point": list(v.witness) if v.witness else None}
    if not im.core or not P:
        report.ok("brackets with the core", "vacuous: empty core or trivial quotient", group=group)

    group = "(3) [parallel, parallel] is parallel"
    for i, j in combinations(range(len(P)), 2):
        f = conn.reduce(bracket(A, P[i], P[j]))
        res = [x for k in range(conn.l) for x in conn.apply(k, f)]
        v = E.is_zero_many(res, im.chart, tspec) if res else E.ZeroVerdict(E.SYMBOLIC_ZERO)
        entry = report.check(f"nabla [{pn[i]}, {pn[j]}] = 0", v, group=group, certificate=pf.certificate)
        if not v.ok:
            entry.witness = {"pair": [pn[i], pn[j]], "point": list(v.witness) if v.witness else None}
    if len(P) < 2:
        report.ok("brackets of parallel sections", "fewer than two parallel sections", group=group)

    group = "(4) rho(parallel) is Bott-parallel"
    fm = coordinate_frame(im.chart, im.leaf)
    for j, p in enumerate(P):
        rp = anchor_apply(A, p)
        for i in im.leaf:
            v = membership(lie_bracket(VectorField.coordinate(im.chart, i), rp), fm, tspec)
            report.check(f"[d/d{im.chart.names[i]}, rho({pn[j]})] in F_M", v, group=group, certificate=pf.certificate)
    if not P or not im.leaf:
        report.ok("anchor condition", "vacuous: no leaf directions or trivial quotient", group=group)
    return report, pf


class MorphicFoliation:
    """A spanning frame of linear and core vector fields on the total space."""

    def __init__(self, algebroid: LieAlgebroid, fields: Sequence[VectorField], leaf, provenance: str = USER_SUPPLIED,
                 parallel: ParallelFrame | None = None, certificate: str = SYMBOLIC, chart: Chart | None = None):
        self.algebroid = algebroid
        self.fields = list(fields)
        self.chart = chart or (self.fields[0].chart if self.fields else total_chart(algebroid))
        self.leaf = tuple(range(leaf)) if isinstance(leaf, int) else tuple(leaf)
        self.provenance = provenance
        self.parallel = parallel
        self.certificate = certificate
        for f in self.fields:
            if f.chart != self.chart:
                raise ValueError("all generators must live on the same total-space chart")

    def frame(self) -> Frame:
        return Frame(self.fields, chart=self.chart, size=self.chart.dim)

    def classify(self):
        """Split generators into linear fields ``(index, xbar, L)`` and core sections."""
        A = self.algebroid
        linear, core = [], []
        for idx, X in enumerate(self.fields):
            xbar, L, v0 = linear_decomposition(X)
            homogeneous = all(_is0(E.simplify(c)) for c in v0) if not any(E.has_opaque(c) for c in v0) else False
            if homogeneous:
                linear.append((idx, xbar, L))
                continue
            flat_L = [x for row in L for x in row]
            vertical = E.is_zero_many(list(xbar.components) + flat_L, xbar.chart)
            if vertical.ok:
                core.append(Section(A, v0))
                continue
            raise NonLinearFieldError(f"generator {idx + 1} is neither linear nor a core field")
        return linear, core

    def __repr__(self):
        return f"MorphicFoliation(rank={len(self.fields)}, leaf={self.leaf}, {self.provenance}, {self.certificate})"


def construct_fa(im: IMFoliation, spec: SampleSpec = SampleSpec(), parallel: ParallelFrame | None = None,
                 fiber_box=None) -> MorphicFoliation:
    """Span of the tangent lifts of parallel sections along F_M plus the core fields.

    In the trivialization by the full parallel frame P (core first), the
    lift of d/dx_i is ``d_i + (d_i P) P^{-1} a . d/da``.
    """
    if parallel is None:
        report, parallel = check_im(im, spec)
        if not report.passed:
            bad = report.first_failure()
            raise IMFoliationError(f"IM-foliation check failed at {bad.group}: {bad.name}", report)
    A = im.algebroid
    chart = total_chart(A, fiber_box=fiber_box)
    k = A.rank
    full = parallel.sections
    M = [[full[j].components[g] for j in range(k)] for g in range(k)]
    fields = []
    if im.leaf:
        inv = linalg.inverse(M, im.chart)
        for i in im.leaf:
            dM = [[E.diff(x, i) for x in row] for row in M]
            L = linalg.matmul(dM, inv) if any(not _is0(_s(x)) for row in dM for x in row) else \
                [[E.ZERO] * k for _ in range(k)]
            fields.append(as_total_space_field(A, VectorField.coordinate(im.chart, i), L, chart))
    for c in im.core:
        fields.append(core_field(A, c, chart))
    return MorphicFoliation(A, fields, im.leaf, CONSTRUCTED, parallel, parallel.certificate, chart)


def _restrict_to_section(fields, s: Section, base: Chart):
    """Generators evaluated over the image of ``s``: functions of x with a := s(x)."""
    n = base.dim
    values = [E.Var(i, base.names[i]) for i in range(n)] + list(s.components)
    out = []
    for X in fields:
        out.append(_FiberVec(base, [_s(E.substitute(c, values, n)) for c in X.components]))
    return out


def _complement_of(core: Sequence[Section], A: LieAlgebroid) -> list:
    if A.rank == 0:
        return []
    vectors = [list(c.components) for c in core] + [list(e.components) for e in A.frame()]
    rows = linalg.independent_rows(vectors, A.chart)
    return [A.basis(r - len(core)) for r in rows if r >= len(core)]


def _parallel_for(fa: MorphicFoliation, spec: SampleSpec) -> ParallelFrame:
    if fa.parallel is not None:
        return fa.parallel
    conn = extract_nabla(fa, spec)
    return parallel_frame(conn, spec)


def check_morphic(fa: MorphicFoliation, spec: SampleSpec = SampleSpec(), parallel: ParallelFrame | None = None) -> Report:
    """(i) involutivity on the total space, (ii) closure under the tangent
    bracket on linear and core lifts, (iii) the anchor condition."""
    A = fa.algebroid
    base = A.chart
    n, k = base.dim, A.rank
    report = Report("morphic foliation")
    frame = fa.frame()
    tspec = _tiered(spec, fa.certificate)
    if fa.certificate == NUMERIC:
        report.certificate = NUMERIC
        report.notes.append(f"numeric parallel frame: tolerances raised to {NUMERIC_TOL:g}")
    report.extend(involutive(frame, tspec), group="(i) involutive")

    group = "(ii) subalgebroid of TA -> TM"
    try:
        pf = parallel or _parallel_for(fa, spec)
    except (NotFlatError, NotParallelError, NonLinearFieldError, ValueError) as err:
        report.fail("parallel frame of F_A", str(err), group=group)
        return report
    full = pf.sections
    r = len(pf.core)
    names = [section_label(s, f"c{i + 1}" if i < r else f"P{i - r + 1}") for i, s in enumerate(full)]
    for i, j in combinations(range(len(full)), 2):
        s = bracket(A, full[i], full[j])
        gens = Frame(_restrict_to_section(fa.fields, s, base), chart=base, size=n + k)
        for leaf_i in fa.leaf:
            vec = [E.ONE if q == leaf_i else E.ZERO for q in range(n)] + [E.diff(c, leaf_i) for c in s.components]
            v = membership(vec, gens, tspec)
            report.check(f"T[{names[i]}, {names[j]}] along d/d{base.names[leaf_i]} in F_A", v, group=group)
    if not fa.leaf:
        report.ok("linear lifts", "vacuous: no leaf directions", group=group)
    zero_gens = Frame(_restrict_to_section(fa.fields, A.zero(), base), chart=base, size=n + k)
    for j, p in enumerate(full):
        for ci, c in enumerate(pf.core):
            s = bracket(A, p, c)
            vecs = [("", [E.ZERO] * n)] + [
                (f" along d/d{base.names[q]}", [E.ONE if t == q else E.ZERO for t in range(n)]) for q in fa.leaf
            ]
            for tag, head in vecs:
                v = membership(head + list(s.components), zero_gens, tspec)
                report.check(f"[T{names[j]}, {names[ci]}^]{tag} in F_A", v, group=group)
    if not pf.core:
        report.ok("core lifts", "vacuous: empty core", group=group)

    group = "(iii) anchor tangent to F_M"
    transverse = [i for i in range(n) if i not in fa.leaf]
    for j, p in enumerate(full):
        rp = anchor_apply(A, p).components
        exprs = [E.diff(rp[i], q) for q in fa.leaf for i in transverse]
        v = E.is_zero_many(exprs, base, tspec) if exprs else E.ZeroVerdict(E.SYMBOLIC_ZERO)
        report.check(f"rho_TA(T{names[j]}) tangent to F_M", v, group=group)
    for ci, c in enumerate(pf.core):
        rc = anchor_apply(A, c).components
        exprs = [rc[i] for i in transverse]
        v = E.is_zero_many(exprs, base, tspec) if exprs else E.ZeroVerdict(E.SYMBOLIC_ZERO)
        report.check(f"rho_TA({names[ci]}^) tangent to F_M", v, group=group)
    return report


def extract_nabla(fa: MorphicFoliation, spec: SampleSpec = SampleSpec(), complement: Sequence[Section] | None = None,
                  core: Sequence[Section] | None = None) -> PartialConnection:
    """Read the partial connection off a morphic foliation: nabla_{d_i} Q_a is
    the class of D_{X_i} Q_a, where X_i is a linear generator over d_i.

    The result carries a ``report`` attribute with the lift-independence
    spot check (perturbing X_i by a core-valued linear field).
    """
    A = fa.algebroid
    base = A.chart
    k, leaf = A.rank, fa.leaf
    linear, found_core = fa.classify()
    core = list(core) if core is not None else found_core
    Q = list(complement) if complement is not None else _complement_of(core, A)
    report = Report("connection extraction")
    fm = coordinate_frame(base, leaf)
    for idx, xbar, _ in linear:
        v = membership(xbar, fm, spec)
        if not v.ok:
            raise IMFoliationError(f"generator {idx + 1} does not project into F_M")
    if len(linear) < len(leaf):
        raise IMFoliationError(f"{len(linear)} linear generators cannot cover {len(leaf)} leaf directions")
    Ls = []
    if leaf:
        B = [[xbar.components[i] for i in leaf] for _, xbar, _ in linear]
        try:
            chosen = linalg.independent_rows(B, base)
        except linalg.SingularMatrixError as err:
            raise IMFoliationError("linear generators do not cover the leaf directions") from err
        Bc = [[B[c][i] for c in chosen] for i in range(len(leaf))]
        inv = linalg.inverse(Bc, base)
        for i in range(len(leaf)):
            L = [[E.ZERO] * k for _ in range(k)]
            for t, c in enumerate(chosen):
                h = inv[t][i]
                if _is0(_s(h)):
                    continue
                Lc = linear[c][2]
                L = [[L[g][b] + h * Lc[g][b] for b in range(k)] for g in range(k)]
            Ls.append([[_s(x) for x in row] for row in L])
    tmp = PartialConnection(A, leaf, core, Q)

    def gamma_from(Lset):
        out = []
        for i, var in enumerate(leaf):
            L = Lset[i]
            gi = []
            for q in Q:
                D = [_s(E.diff(q.components[g], var) - sum((L[g][b] * q.components[b] for b in range(k)), E.ZERO))
                     for g in range(k)]
                gi.append(tmp.reduce(Section(A, D)))
            out.append(gi)
        return out

    gamma = gamma_from(Ls)
    if core and leaf:
        c = core[0]
        K = [[c.components[g] for _ in range(k)] for g in range(k)]
        perturbed = [[[_s(L[g][b] + K[g][b]) for b in range(k)] for g in range(k)] for L in Ls]
        other = gamma_from(perturbed)
        diffs = [x - y for gi, hi in zip(gamma, other) for ra, rb in zip(gi, hi) for x, y in zip(ra, rb)]
        v = E.is_zero_many(diffs, base, _tiered(spec, fa.certificate)) if diffs else E.ZeroVerdict(E.SYMBOLIC_ZERO)
        report.check("core-valued perturbation of the lift leaves nabla unchanged", v)
    else:
        report.ok("core-valued perturbation of the lift leaves nabla unchanged", "vacuous: empty core or no leaves")
    conn = PartialConnection(A, leaf, core, Q, gamma)
    conn.report = report
    return conn


def roundtrip(im: IMFoliation, spec: SampleSpec = SampleSpec()) -> Report:
    """check_im, construct_fa, check_morphic, extract_nabla and comparison with the input."""
    report = Report("round trip")
    im_report, pf = check_im(im, spec)
    report.extend(im_report, group="check_im")
    report.certificate = im_report.certificate
    report.notes.extend(n for n in im_report.notes if n not in report.notes)
    if not im_report.passed:
        return report
    fa = construct_fa(im, spec, parallel=pf)
    report.extend(check_morphic(fa, spec, parallel=pf), group="check_morphic")
    conn = extract_nabla(fa, spec, complement=im.complement, core=im.core)
    report.extend(conn.report, group="extract")
    diffs = [x - y for gi, hi in zip(conn.gamma, im.gamma) for ra, rb in zip(gi, hi) for x, y in zip(ra, rb)]
    tol = 1e-6 if fa.certificate == NUMERIC else spec.tol
    v = E.is_zero_many(diffs, im.chart, spec.with_tol(tol)) if diffs else E.ZeroVerdict(E.SYMBOLIC_ZERO)
    report.check("extracted connection equals the input connection", v, group="compare",
                 certificate=fa.certificate)
    report.fa = fa
    report.extracted = conn
    return report


def _transversal(im: IMFoliation):
    chart = im.chart
    keep = [i for i in range(chart.dim) if i not in im.leaf]
    new = Chart.make([chart.names[i] for i in keep], [chart.box[i] for i in keep])
    values = []
    for i in range(chart.dim):
        if i in im.leaf:
            lo, hi = chart.box[i]
            values.append(E.Const(Fraction(lo + hi) / 2))
        else:
            values.append(E.Var(keep.index(i), chart.names[i]))
    return new, values


def quotient(im: IMFoliation, spec: SampleSpec = SampleSpec()) -> tuple:
    """The algebroid on the leaf space, modeled on the transversal slice
    through the leaf-box midpoints.  Returns ``(algebroid or None, report)``."""
    report = Report("quotient algebroid")
    im_report, pf = check_im(im, spec)
    report.extend(im_report, group="check_im")
    report.certificate = im_report.certificate
    report.notes.extend(n for n in im_report.notes if n not in report.notes)
    if not im_report.passed:
        return None, report
    report.extend(holonomy_trivial(im.connection, spec), group="holonomy")
    if not report.passed:
        return None, report
    A = im.algebroid
    P = pf.parallel
    m = len(P)
    tspec = _tiered(spec, pf.certificate)
    conn_p = PartialConnection(A, im.leaf, im.core, P)
    C = [[[E.ZERO] * m for _ in range(m)] for _ in range(m)]
    for a, b in combinations(range(m), 2):
        f = conn_p.reduce(bracket(A, P[a], P[b]))
        for g in range(m):
            C[a][b][g] = f[g]
            C[b][a][g] = _s(-f[g])
    anchor = []
    keep = [i for i in range(im.chart.dim) if i not in im.leaf]
    rho = [anchor_apply(A, p).components for p in P]
    for i in keep:
        anchor.append([rho[a][i] for a in range(m)])
    coeffs = [x for row in anchor for x in row] + [C[a][b][g] for a, b in combinations(range(m), 2) for g in range(m)]
    derivs = [E.diff(x, i) for x in coeffs for i in im.leaf]
    v = E.is_zero_many(derivs, im.chart, tspec) if derivs else E.ZeroVerdict(E.SYMBOLIC_ZERO)
    report.check("structure data constant along the leaves", v, group="descent", certificate=pf.certificate)
    if not v.ok:
        return None, report
    chart, values = _transversal(im)
    n_new = chart.dim

    def restrict(e):
        return _s(E.substitute(e, values, n_new))

    qa = LieAlgebroid(
        chart, m,
        [[restrict(x) for x in row] for row in anchor],
        [[[restrict(x) for x in c] for c in r] for r in C],
        name="quotient",
    )
    report.extend(check_axioms(qa, tspec), group="quotient axioms")
    return qa, report
