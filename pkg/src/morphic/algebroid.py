"""Lie algebroids over a single chart in a fixed trivializing frame.

``C[alpha][beta][gamma]`` is the coefficient of ``e_gamma`` in
``[e_alpha, e_beta]`` and ``anchor[i][alpha]`` the ``i``-th component of
``rho(e_alpha)``.
"""

from __future__ import annotations

from itertools import combinations
from typing import Sequence

from . import expr as E
from .expr import Chart, Expr, SampleSpec
from .geometry import (
    NonLinearFieldError,
    VectorField,
    _Components,
    lie_bracket,
    linear_decomposition,
    total_space_chart,
)
from .report import Report

__all__ = [
    "AlgebroidMismatch", "LieAlgebroid", "Section", "bracket", "anchor_apply", "check_axioms",
    "tangent_chart", "TangentSection", "tangent_lift_linear", "tangent_lift_core", "tangent_anchor",
    "tangent_bracket", "core_field", "as_total_space_field", "D_X", "NonLinearFieldError",
]


class AlgebroidMismatch(ValueError):
    pass


def _s(e):
    return e if E.has_opaque(e) else E.simplify(e)


class LieAlgebroid:
    def __init__(self, chart: Chart, rank: int, anchor=None, structure=None, name: str = ""):
        n = chart.dim
        self.chart = chart
        self.rank = k = int(rank)
        self.name = name
        if anchor is None:
            anchor = [[E.ZERO] * k for _ in range(n)]
        if len(anchor) != n or any(len(row) != k for row in anchor):
            raise ValueError(f"anchor must be a {n}x{k} matrix")
        self.anchor = tuple(tuple(_s(_parse(x, chart)) for x in row) for row in anchor)
        if structure is None:
            structure = [[[E.ZERO] * k for _ in range(k)] for _ in range(k)]
        if len(structure) != k or any(len(r) != k or any(len(c) != k for c in r) for r in structure):
            raise ValueError(f"structure functions must have shape ({k}, {k}, {k})")
        C = tuple(tuple(tuple(_s(_parse(x, chart)) for x in c) for c in r) for r in structure)
        for a in range(k):
            for b in range(a, k):
                for g in range(k):
                    s = E.simplify(C[a][b][g] + C[b][a][g])
                    if not (isinstance(s, E.Const) and s.value == 0) and not E.has_opaque(s):
                        raise ValueError(f"structure functions not antisymmetric at C[{a}][{b}][{g}]")
        self.C = C

    @classmethod
    def tangent(cls, chart: Chart) -> "LieAlgebroid":
        """The tautological algebroid TM in the coordinate frame."""
        n = chart.dim
        return cls(chart, n, [[E.ONE if i == j else E.ZERO for j in range(n)] for i in range(n)], name="TM")

    @classmethod
    def lie_algebra(cls, constants, chart: Chart | None = None) -> "LieAlgebroid":
        """A Lie algebra as an algebroid with zero anchor over a one-point-like chart."""
        k = len(constants)
        chart = chart or Chart.make(["x1"], [(-1.0, 1.0)])
        return cls(chart, k, None, constants)

    def section(self, comps) -> "Section":
        return Section(self, comps)

    def basis(self, alpha: int) -> "Section":
        return Section(self, [E.ONE if b == alpha else E.ZERO for b in range(self.rank)])

    def frame(self) -> list:
        return [self.basis(a) for a in range(self.rank)]

    def zero(self) -> "Section":
        return Section(self, [E.ZERO] * self.rank)

    def __eq__(self, other):
        return (isinstance(other, LieAlgebroid) and self.chart == other.chart and self.rank == other.rank
                and self.anchor == other.anchor and self.C == other.C)

    def __hash__(self):
        return hash((self.chart, self.rank, self.anchor, self.C))

    def __repr__(self):
        return f"LieAlgebroid(rank={self.rank}, base={self.chart.names})"


def _parse(x, chart):
    return chart.parse(x) if isinstance(x, str) else E.as_expr(x)


class Section(_Components):
    """A section a = a^alpha e_alpha."""

    __slots__ = ("algebroid",)

    def __init__(self, algebroid: LieAlgebroid, components: Sequence):
        self.algebroid = algebroid
        super().__init__(algebroid.chart, components)

    def _expected(self, chart):
        return self.algebroid.rank

    def _new(self, comps):
        return Section(self.algebroid, comps)

    def _same(self, other):
        if not isinstance(other, Section) or other.algebroid is not self.algebroid and other.algebroid != self.algebroid:
            raise AlgebroidMismatch("sections of different algebroids")

    def __eq__(self, other):
        return isinstance(other, Section) and other.algebroid == self.algebroid and other.components == self.components

    def __hash__(self):
        return hash(("Section", self.components))


def _check(A: LieAlgebroid, *sections):
    for s in sections:
        if not isinstance(s, Section) or (s.algebroid is not A and s.algebroid != A):
            raise AlgebroidMismatch("section does not belong to this algebroid")


def anchor_apply(A: LieAlgebroid, a: Section) -> VectorField:
    _check(A, a)
    return VectorField(A.chart, [
        sum((A.anchor[i][al] * a.components[al] for al in range(A.rank)), E.ZERO) for i in range(A.chart.dim)
    ])


def bracket(A: LieAlgebroid, a: Section, b: Section) -> Section:
    """[a,b]^g = a^al b^be C^g_{al be} + rho(a)(b^g) - rho(b)(a^g)."""
    _check(A, a, b)
    k = A.rank
    ra, rb = anchor_apply(A, a), anchor_apply(A, b)
    comps = []
    for g in range(k):
        acc = ra(b.components[g]) - rb(a.components[g])
        for al in range(k):
            if _is0(a.components[al]):
                continue
            for be in range(k):
                if _is0(b.components[be]) or _is0(A.C[al][be][g]):
                    continue
                acc = acc + a.components[al] * b.components[be] * A.C[al][be][g]
        comps.append(acc)
    return Section(A, comps)


def _is0(e):
    return isinstance(e, E.Const) and e.value == 0


def check_axioms(A: LieAlgebroid, spec: SampleSpec = SampleSpec()) -> Report:
    """Antisymmetry, Jacobi on frame triples, Leibniz and the anchor morphism property."""
    report = Report("Lie algebroid axioms")
    k, chart = A.rank, A.chart
    anti = [A.C[a][b][g] + A.C[b][a][g] for a in range(k) for b in range(a, k) for g in range(k)]
    report.check("antisymmetry", E.is_zero_many(anti, chart, spec), group="antisymmetry")
    e = A.frame()
    for a, b, c in combinations(range(k), 3):
        cyc = (bracket(A, bracket(A, e[a], e[b]), e[c]) + bracket(A, bracket(A, e[b], e[c]), e[a])
               + bracket(A, bracket(A, e[c], e[a]), e[b]))
        v = cyc.is_zero(spec)
        report.check(f"Jacobi (e{a + 1}, e{b + 1}, e{c + 1})", v, group="Jacobi",
                     detail="" if v.ok else f"triple (e{a + 1}, e{b + 1}, e{c + 1})")
    if k < 3:
        report.ok("Jacobi", "fewer than three frame sections", group="Jacobi")
    if chart.dim:
        f = chart.var(0)
        for a in range(k):
            for b in range(k):
                lhs = bracket(A, e[a], e[b] * f)
                rhs = bracket(A, e[a], e[b]) * f + e[b] * anchor_apply(A, e[a])(f)
                report.check(f"Leibniz (e{a + 1}, {chart.names[0]} e{b + 1})", (lhs - rhs).is_zero(spec), group="Leibniz")
    for a in range(k):
        for b in range(a + 1, k):
            lhs = anchor_apply(A, bracket(A, e[a], e[b]))
            rhs = lie_bracket(anchor_apply(A, e[a]), anchor_apply(A, e[b]))
            report.check(f"anchor morphism (e{a + 1}, e{b + 1})", (lhs - rhs).is_zero(spec), group="anchor")
    return report


# ---------------------------------------------------------------------------
# tangent lifts


def tangent_chart(chart: Chart, dot_box=None) -> Chart:
    """Chart (x, xdot) of TM; the velocity box defaults to [-1, 1]."""
    n = chart.dim
    names = list(chart.names) + [f"{nm}dot" for nm in chart.names]
    box = list(chart.box) + list(dot_box or [(-1.0, 1.0)] * n)
    return Chart.make(names, box, base_dim=n)


def _embed(e: Expr, chart: Chart, target: Chart) -> Expr:
    # base coordinates keep their indices on every chart built over the base;
    # Opaque nodes only read their leading columns, so no rewriting is needed
    return e


class TangentSection:
    """A section of TA -> TM written as sum_j f_j(x, xdot) * g_j with each
    generator g_j a linear lift Ta ("T") or a core lift a-hat ("core")."""

    def __init__(self, algebroid: LieAlgebroid, terms=(), tchart: Chart | None = None):
        self.algebroid = algebroid
        self.tchart = tchart or tangent_chart(algebroid.chart)
        self.terms = [(E.as_expr(f), kind, s) for f, kind, s in terms]
        for _, kind, s in self.terms:
            if kind not in ("T", "core"):
                raise TypeError(f"unknown lift kind {kind!r}")
            _check(algebroid, s)

    def __add__(self, other):
        return TangentSection(self.algebroid, self.terms + other.terms, self.tchart)

    def __sub__(self, other):
        return self + other * E.Const(-1)

    def __mul__(self, f):
        f = E.as_expr(f)
        return TangentSection(self.algebroid, [(f * c, k, s) for c, k, s in self.terms], self.tchart)

    __rmul__ = __mul__

    def components(self) -> list:
        """Fiber components (a^alpha, adot^alpha) on the tangent chart."""
        A, tc = self.algebroid, self.tchart
        n, k = A.chart.dim, A.rank
        out = [E.ZERO] * (2 * k)
        dots = [E.Var(n + j, tc.names[n + j]) for j in range(n)]
        for f, kind, s in self.terms:
            comps = [_embed(c, A.chart, tc) for c in s.components]
            for al in range(k):
                if kind == "T":
                    out[al] = out[al] + f * comps[al]
                    dv = sum((E.diff(comps[al], j) * dots[j] for j in range(n)), E.ZERO)
                    out[k + al] = out[k + al] + f * dv
                else:
                    out[k + al] = out[k + al] + f * comps[al]
        return [_s(c) for c in out]

    def __repr__(self):
        parts = [f"({f})*{'T' if kind == 'T' else 'hat'}{list(map(str, s.components))}" for f, kind, s in self.terms]
        return "TangentSection(" + " + ".join(parts or ["0"]) + ")"


def tangent_lift_linear(A: LieAlgebroid, a: Section) -> TangentSection:
    return TangentSection(A, [(E.ONE, "T", a)])


def tangent_lift_core(A: LieAlgebroid, a: Section) -> TangentSection:
    return TangentSection(A, [(E.ONE, "core", a)])


def tangent_anchor(A: LieAlgebroid, kind: str, a: Section, tchart: Chart | None = None) -> VectorField:
    """rho_TA of a generator as a vector field on the tangent chart."""
    tc = tchart or tangent_chart(A.chart)
    n = A.chart.dim
    ra = [_embed(c, A.chart, tc) for c in anchor_apply(A, a).components]
    dots = [E.Var(n + j, tc.names[n + j]) for j in range(n)]
    if kind == "T":
        comps = ra + [sum((E.diff(ra[i], j) * dots[j] for j in range(n)), E.ZERO) for i in range(n)]
    else:
        comps = [E.ZERO] * n + ra
    return VectorField(tc, comps)


def _generator_bracket(A, k1, a, k2, b):
    if k1 == "T" and k2 == "T":
        return [(E.ONE, "T", bracket(A, a, b))]
    if k1 == "T" and k2 == "core":
        return [(E.ONE, "core", bracket(A, a, b))]
    if k1 == "core" and k2 == "T":
        return [(E.ONE, "core", bracket(A, a, b))]
    return []


def tangent_bracket(A: LieAlgebroid, u: TangentSection, v: TangentSection) -> TangentSection:
    """Bracket on TA from the generator rules extended by Leibniz:
    [f g, h k] = f h [g, k] + f rho(g)(h) k - h rho(k)(f) g."""
    if not isinstance(u, TangentSection) or not isinstance(v, TangentSection):
        raise TypeError("operands must be combinations of linear and core lifts")
    tc = u.tchart
    terms = []
    for f, k1, a in u.terms:
        for h, k2, b in v.terms:
            for c, kind, s in _generator_bracket(A, k1, a, k2, b):
                terms.append((_s(f * h * c), kind, s))
            rg = tangent_anchor(A, k1, a, tc)
            rk = tangent_anchor(A, k2, b, tc)
            dh = rg(h)
            if not _is0(dh):
                terms.append((_s(f * dh), k2, b))
            df = rk(f)
            if not _is0(df):
                terms.append((_s(-h * df), k1, a))
    return TangentSection(A, terms, tc)


# ---------------------------------------------------------------------------
# the total space of A and linear vector fields on it


def fiber_names(A: LieAlgebroid) -> list:
    taken = set(A.chart.names)
    names, i = [], 1
    for _ in range(A.rank):
        while f"a{i}" in taken:
            i += 1
        names.append(f"a{i}")
        i += 1
    return names


def total_chart(A: LieAlgebroid, names=None, fiber_box=None) -> Chart:
    return total_space_chart(A.chart, names or fiber_names(A), fiber_box)


def _lift_base(e, A, chart):
    return _embed(e, A.chart, chart)


def core_field(A: LieAlgebroid, b: Section, chart: Chart | None = None) -> VectorField:
    """The vertical field b^alpha(x) d/da_alpha."""
    _check(A, b)
    chart = chart or total_chart(A)
    return VectorField(chart, [E.ZERO] * A.chart.dim + [_lift_base(c, A, chart) for c in b.components])


def as_total_space_field(A: LieAlgebroid, xbar: VectorField, L, chart: Chart | None = None) -> VectorField:
    """Linear field Xbar^i d_i + L^alpha_beta(x) a^beta d/da_alpha."""
    chart = chart or total_chart(A)
    n, k = A.chart.dim, A.rank
    fib = [E.Var(n + b, chart.names[n + b]) for b in range(k)]
    comps = [_lift_base(c, A, chart) for c in xbar.components]
    for al in range(k):
        comps.append(sum((_lift_base(_parse(L[al][b], A.chart), A, chart) * fib[b] for b in range(k)), E.ZERO))
    return VectorField(chart, comps)


def D_X(A: LieAlgebroid, X: VectorField, a: Section) -> Section:
    """The section with [X, a^up] = (D_X a)^up, namely Xbar(a) - L a."""
    _check(A, a)
    xbar, L, _ = linear_decomposition(X)
    k = A.rank
    return Section(A, [
        xbar(a.components[g]) - sum((L[g][b] * a.components[b] for b in range(k)), E.ZERO) for g in range(k)
    ])
