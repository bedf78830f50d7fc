"""Flat partial connections along a coordinate foliation, acting on A/F_core.

Coefficients: ``gamma[i][alpha][beta]`` is the ``Q_beta``-coefficient of
``nabla_{d_i} Q_alpha``, where ``d_i`` is the ``i``-th leaf coordinate
direction.  A coefficient vector ``f`` (over the classes of ``Q``) is
parallel iff ``d_i f = -G_i f`` with ``G_i[beta][alpha] = gamma[i][alpha][beta]``.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial
from typing import Sequence

import numpy as np

from . import expr as E
from . import linalg
from .algebroid import LieAlgebroid, Section
from .expr import SampleSpec
from .foliation import Frame, RankDeficiencyError, coordinate_frame, membership
from .geometry import FlowExitError, VectorField
from .report import Report

SYMBOLIC = "Symbolic"
NUMERIC = "Numeric"
NUMERIC_TOL = 1e-4

__all__ = [
    "PartialConnection", "NotFlatError", "NotParallelError", "ParallelFrame", "curvature", "is_flat",
    "parallel_transport", "parallel_frame", "holonomy_trivial", "SYMBOLIC", "NUMERIC", "NUMERIC_TOL",
]


class NotFlatError(ValueError):
    pass


class NotParallelError(ValueError):
    def __init__(self, message, residual=None, witness=None):
        super().__init__(message)
        self.residual = residual
        self.witness = witness


def _s(e):
    return e if E.has_opaque(e) else E.simplify(e)


def _is0(e):
    return isinstance(e, E.Const) and e.value == 0


class PartialConnection:
    def __init__(self, algebroid: LieAlgebroid, leaf, core: Sequence[Section], complement: Sequence[Section],
                 gamma=None, candidate: Sequence[Section] | None = None):
        chart = algebroid.chart
        if isinstance(leaf, int):
            leaf = tuple(range(leaf))
        self.algebroid = algebroid
        self.leaf = tuple(int(i) for i in leaf)
        if any(not 0 <= i < chart.dim for i in self.leaf) or len(set(self.leaf)) != len(self.leaf):
            raise ValueError(f"leaf directions {self.leaf} are not distinct coordinates of the chart")
        self.core = list(core)
        self.Q = list(complement)
        if len(self.core) + len(self.Q) != algebroid.rank:
            raise ValueError(
                f"core ({len(self.core)}) and complement ({len(self.Q)}) must together have rank {algebroid.rank}"
            )
        l, m = len(self.leaf), len(self.Q)
        if gamma is None:
            gamma = [[[E.ZERO] * m for _ in range(m)] for _ in range(l)]
        if len(gamma) != l or any(len(g) != m or any(len(r) != m for r in g) for g in gamma):
            raise ValueError(f"connection coefficients must have shape ({l}, {m}, {m})")
        self.gamma = tuple(
            tuple(tuple(_s(chart.parse(x) if isinstance(x, str) else E.as_expr(x)) for x in r) for r in g)
            for g in gamma
        )
        self.candidate = list(candidate) if candidate else None

    @property
    def chart(self):
        return self.algebroid.chart

    @property
    def l(self) -> int:
        return len(self.leaf)

    @property
    def m(self) -> int:
        return len(self.Q)

    def G(self, i: int):
        return [[self.gamma[i][a][b] for a in range(self.m)] for b in range(self.m)]

    def full_frame(self) -> list:
        return self.core + self.Q

    def check_frames(self, spec: SampleSpec = SampleSpec()) -> Report:
        report = Report("connection frames")
        frame = Frame(self.full_frame(), chart=self.chart, size=self.algebroid.rank)
        try:
            frame.check_rank(spec)
            report.ok("F_core and Q frame A", f"rank {self.algebroid.rank}")
        except RankDeficiencyError as err:
            report.fail("F_core and Q frame A", str(err), err.point)
        return report

    def is_zero_gamma(self) -> bool:
        return all(_is0(x) for g in self.gamma for r in g for x in r)

    def reduce(self, a: Section) -> list:
        """Coefficients of the class of ``a`` over the classes of ``Q``."""
        if self.m == 0:
            return []
        columns = [list(s.components) for s in self.full_frame()]
        M = [[columns[j][i] for j in range(len(columns))] for i in range(self.algebroid.rank)]
        coeffs = linalg.solve(M, list(a.components), self.chart)
        return [_s(c) for c in coeffs[len(self.core):]]

    def leaf_components(self, X: VectorField, spec: SampleSpec = SampleSpec()) -> list:
        coord = coordinate_frame(self.chart, self.leaf)
        verdict = membership(X, coord, spec)
        if not verdict.ok:
            raise ValueError(f"vector field is not tangent to F_M (residual {verdict.residual:.3g} at {verdict.witness})")
        return [X.components[i] for i in self.leaf]

    def apply(self, i: int, f: Sequence) -> list:
        """nabla_{d_i} of the class with Q-coefficients ``f``."""
        var = self.leaf[i]
        return [_s(E.diff(f[b], var) + sum((f[a] * self.gamma[i][a][b] for a in range(self.m)), E.ZERO))
                for b in range(self.m)]

    def nabla(self, X: VectorField, a: Section, spec: SampleSpec = SampleSpec()) -> list:
        """nabla_X of the class of ``a``, as Q-coefficients; X must lie in F_M."""
        xs = self.leaf_components(X, spec)
        f = self.reduce(a)
        out = [E.ZERO] * self.m
        for i, xi in enumerate(xs):
            if _is0(xi):
                continue
            d = self.apply(i, f)
            out = [o + xi * v for o, v in zip(out, d)]
        return [_s(o) for o in out]

    def __repr__(self):
        return f"PartialConnection(leaf={self.leaf}, core={len(self.core)}, complement={self.m})"


def curvature(conn: PartialConnection):
    """R[i][j][alpha][beta], the Q_beta-coefficient of [nabla_i, nabla_j] Q_alpha."""
    l, m = conn.l, conn.m
    g = conn.gamma
    R = []
    for i in range(l):
        Ri = []
        for j in range(l):
            Rij = []
            for a in range(m):
                row = []
                for b in range(m):
                    e = E.diff(g[j][a][b], conn.leaf[i]) - E.diff(g[i][a][b], conn.leaf[j])
                    for c in range(m):
                        e = e + g[j][a][c] * g[i][c][b] - g[i][a][c] * g[j][c][b]
                    row.append(_s(e))
                Rij.append(row)
            Ri.append(Rij)
        R.append(Ri)
    return R


def is_flat(conn: PartialConnection, spec: SampleSpec = SampleSpec()) -> Report:
    report = Report("flatness")
    if conn.l < 2 or conn.m == 0:
        report.ok("curvature", "vacuous: fewer than two leaf directions or trivial quotient")
        return report
    R = curvature(conn)
    names = conn.chart.names
    for i in range(conn.l):
        for j in range(i + 1, conn.l):
            entries = [x for row in R[i][j] for x in row]
            report.check(f"R({names[conn.leaf[i]]}, {names[conn.leaf[j]]}) = 0", E.is_zero_many(entries, conn.chart, spec))
    return report


# ---------------------------------------------------------------------------
# transport


def _gamma_values(conn: PartialConnection, points) -> np.ndarray:
    """G_i at points, shape (N, l, m, m) with [.., i, beta, alpha]."""
    l, m = conn.l, conn.m
    flat = [conn.gamma[i][a][b] for i in range(l) for a in range(m) for b in range(m)]
    vals = E.evaluate_many(flat, points).reshape(len(points), l, m, m)
    return vals.transpose(0, 1, 3, 2)


def _transport_batch(conn, starts, direction, F0, steps, chart=None):
    """Solve dF/ds = -(sum_i direction_i G_i(x(s))) F along x(s) = start + s * direction, s in [0, 1].

    ``direction`` has shape (N, l); ``F0`` shape (N, m, w).
    """
    n = conn.chart.dim
    leaf = list(conn.leaf)
    starts = np.asarray(starts, dtype=float)
    D = np.zeros((len(starts), n))
    D[:, leaf] = direction

    def rhs_at(s, F):
        x = starts + s * D
        G = _gamma_values(conn, x)
        A = np.einsum("ni,nijk->njk", direction, G)
        return -A @ F

    F = np.array(F0, dtype=float)
    if steps <= 0:
        return F
    h = 1.0 / steps
    for k in range(steps):
        s = k * h
        k1 = rhs_at(s, F)
        k2 = rhs_at(s + h / 2, F + h / 2 * k1)
        k3 = rhs_at(s + h / 2, F + h / 2 * k2)
        k4 = rhs_at(s + h, F + h * k3)
        F = F + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if chart is not None:
            x = starts + (s + h) * D
            bad = ~chart.contains(x)
            if bad.any():
                raise FlowExitError(k + 1, x[np.flatnonzero(bad)[0]])
    return F


def parallel_transport(conn: PartialConnection, start, path, f0, steps_per_unit: int = 1000) -> np.ndarray:
    """Transport Q-coefficients ``f0`` from ``start`` along segments ``(leaf index, delta)``."""
    x = np.array(start, dtype=float)
    f = np.array(f0, dtype=float).reshape(conn.m, 1)
    for i, delta in path:
        if not 0 <= i < conn.l:
            raise ValueError(f"path segment direction {i} is not a leaf direction")
        direction = np.zeros((1, conn.l))
        direction[0, i] = delta
        steps = max(1, int(np.ceil(abs(delta) * steps_per_unit)))
        f = _transport_batch(conn, x[None, :], direction, f[None], steps, conn.chart)[0]
        x = x.copy()
        x[conn.leaf[i]] += delta
    return f[:, 0]


class ParallelFrame:
    """Sections whose classes are parallel: ``sections[:r]`` is the core frame,
    ``sections[r:]`` the parallel completion ``P``, plus the certificate tier."""

    def __init__(self, core, parallel, certificate: str, method: str, coefficients=None):
        self.core = list(core)
        self.parallel = list(parallel)
        self.certificate = certificate
        self.method = method
        self.coefficients = coefficients

    @property
    def sections(self) -> list:
        return self.core + self.parallel

    def __repr__(self):
        return f"ParallelFrame({self.method}, {self.certificate}, rank={len(self.sections)})"


def _combine(conn, F):
    """Sections sum_beta F[beta][alpha] Q_beta, one per column alpha."""
    out = []
    for a in range(conn.m):
        comps = []
        for g in range(conn.algebroid.rank):
            acc = E.ZERO
            for b in range(conn.m):
                if _is0(F[b][a]):
                    continue
                acc = acc + F[b][a] * conn.Q[b].components[g]
            comps.append(_s(acc))
        out.append(Section(conn.algebroid, comps))
    return out


def _closed_form_exponential(conn):
    """exp(-sum_i x_i G_i) when Gamma is constant, the G_i commute and are all
    nilpotent or all diagonal; otherwise None."""
    m = conn.m
    Gs = [linalg.frac_matrix(conn.G(i)) for i in range(conn.l)]
    if any(G is None for G in Gs):
        return None
    Gs = [np.array(G, dtype=object) for G in Gs]
    for a in range(len(Gs)):
        for b in range(a + 1, len(Gs)):
            if (Gs[a].dot(Gs[b]) != Gs[b].dot(Gs[a])).any():
                return None
    xs = [conn.chart.var(i) for i in conn.leaf]
    diagonal = all((G == np.diag(np.diag(G))).all() for G in Gs)
    if diagonal:
        F = [[E.ZERO] * m for _ in range(m)]
        for a in range(m):
            rate = sum((E.Const(Gs[i][a, a]) * xs[i] for i in range(conn.l)), E.ZERO)
            F[a][a] = E.exp(_s(-rate)) if not _is0(_s(rate)) else E.ONE
        return F

    def nilpotent(G):
        P = np.eye(m, dtype=object) * Fraction(1)
        for _ in range(m):
            P = P.dot(G)
        return not P.any()

    if not all(nilpotent(G) for G in Gs):
        return None
    M = [[_s(-sum((E.Const(Gs[i][r, c]) * xs[i] for i in range(conn.l)), E.ZERO)) for c in range(m)] for r in range(m)]
    F = [[E.ONE if r == c else E.ZERO for c in range(m)] for r in range(m)]
    P = [row[:] for row in F]
    for p in range(1, m):
        P = linalg.matmul(P, M)
        F = [[_s(F[r][c] + P[r][c] / factorial(p)) for c in range(m)] for r in range(m)]
    return F


def _numeric_frame(conn, steps: int = 200):
    """Coefficient matrix obtained by transporting the identity from the
    transversal through the leaf-box midpoints, along straight leaf paths."""
    chart = conn.chart
    mid = np.array([(chart.box[i][0] + chart.box[i][1]) / 2 for i in conn.leaf])
    m, leaf = conn.m, list(conn.leaf)

    def fn(points):
        pts = np.asarray(points, dtype=float)[:, : chart.dim]
        starts = pts.copy()
        starts[:, leaf] = mid
        direction = pts[:, leaf] - mid
        F0 = np.broadcast_to(np.eye(m), (len(pts), m, m))
        return _transport_batch(conn, starts, direction, F0, steps)

    table = E.OpaqueTable(fn, chart.dim, "parallel")
    return [[table.entry(b, a) for a in range(m)] for b in range(m)]


def _verify_parallel(conn, sections, spec):
    res = []
    for s in sections:
        f = conn.reduce(s)
        for i in range(conn.l):
            res.extend(conn.apply(i, f))
    return E.is_zero_many(res, conn.chart, spec) if res else E.ZeroVerdict(E.SYMBOLIC_ZERO)


def parallel_frame(conn: PartialConnection, spec: SampleSpec = SampleSpec(), check_flat: bool = True) -> ParallelFrame:
    """A frame of sections with parallel classes, trying in order: Gamma = 0,
    a user candidate, a closed-form exponential, numeric transport."""
    if check_flat:
        flat = is_flat(conn, spec)
        if not flat.passed:
            bad = flat.first_failure()
            raise NotFlatError(f"connection is not flat: {bad.name} residual {bad.residual:.3g} at {bad.witness}")
    if conn.m == 0 or conn.l == 0 or conn.is_zero_gamma():
        return ParallelFrame(conn.core, conn.Q, SYMBOLIC, "Q")
    if conn.candidate is not None:
        cand = list(conn.candidate)
        if len(cand) != conn.m:
            raise NotParallelError(f"candidate parallel frame needs {conn.m} sections, got {len(cand)}")
        frame = Frame(conn.core + cand, chart=conn.chart, size=conn.algebroid.rank)
        frame.check_rank(spec)
        verdict = _verify_parallel(conn, cand, spec)
        if not verdict.ok:
            raise NotParallelError(
                f"candidate frame is not parallel: residual {verdict.residual:.3g} at {verdict.witness}",
                verdict.residual, verdict.witness,
            )
        cert = SYMBOLIC if verdict.tier == E.SYMBOLIC_ZERO else NUMERIC
        return ParallelFrame(conn.core, cand, cert, "candidate")
    F = _closed_form_exponential(conn)
    if F is not None:
        return ParallelFrame(conn.core, _combine(conn, F), SYMBOLIC, "exponential", F)
    F = _numeric_frame(conn)
    return ParallelFrame(conn.core, _combine(conn, F), NUMERIC, "transport", F)


def holonomy_trivial(conn: PartialConnection, spec: SampleSpec = SampleSpec(), loops: int = 50,
                     tol: float = 1e-6, steps_per_unit: int = 400) -> Report:
    """Transport random vectors around random coordinate rectangles in the leaves.

    All loops are integrated together, one batched RK4 run per rectangle side.
    """
    report = Report("holonomy")
    if conn.m == 0 or conn.l == 0:
        report.ok("loops return", "vacuous: no leaf directions or trivial quotient")
        return report
    report.certificate = NUMERIC
    rng = np.random.default_rng(spec.seed)
    chart = conn.chart
    lo = np.array([b[0] for b in chart.box])
    hi = np.array([b[1] for b in chart.box])
    x = lo + (hi - lo) * rng.random((loops, chart.dim))
    dirs = np.zeros((loops, 2), dtype=int)
    deltas = np.zeros((loops, 2))
    for k in range(loops):
        if conn.l >= 2:
            i, j = sorted(rng.choice(conn.l, 2, replace=False))
        else:
            i = j = 0
        dirs[k] = i, j
        for t, d in enumerate((i, j)):
            c = conn.leaf[d]
            deltas[k, t] = rng.uniform(lo[c] - x[k, c], hi[c] - x[k, c])
        if conn.l < 2:
            deltas[k, 1] = 0.0
    f0 = rng.standard_normal((loops, conn.m))
    f0 /= np.linalg.norm(f0, axis=1, keepdims=True)
    F = f0[:, :, None]
    pos = x.copy()
    for side, sign in ((0, 1.0), (1, 1.0), (0, -1.0), (1, -1.0)):
        direction = np.zeros((loops, conn.l))
        direction[np.arange(loops), dirs[:, side]] = sign * deltas[:, side]
        steps = max(1, int(np.ceil(np.abs(direction).max() * steps_per_unit)))
        F = _transport_batch(conn, pos, direction, F, steps)
        pos = pos.copy()
        for k in range(loops):
            pos[k, conn.leaf[dirs[k, side]]] += direction[k, dirs[k, side]]
    defects = np.linalg.norm(F[:, :, 0] - f0, axis=1)
    k = int(np.argmax(defects))
    worst = float(defects[k])
    witness = tuple(float(v) for v in x[k]) + tuple(float(v) for v in deltas[k])
    tier = E.NUMERIC_ZERO if worst <= tol else E.NONZERO
    report.check("loops return", E.ZeroVerdict(tier, worst, witness if tier == E.NONZERO else None),
                 certificate=NUMERIC, detail=f"{loops} rectangles, max defect {worst:.3g}")
    report.defects = defects
    return report
