"""Subbundles given by spanning frames: membership, rank, involutivity,
the Bott connection and adapted-chart validation."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import expr as E
from . import linalg
from .expr import SampleSpec, ZeroVerdict
from .geometry import VectorField, lie_bracket
from .report import Report

__all__ = ["RankDeficiencyError", "Frame", "membership", "involutive", "bott", "adapted_chart_check"]


class RankDeficiencyError(ValueError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class Frame:
    """Ordered spanning family of a subbundle.

    Members are vector fields or algebroid sections (anything exposing
    ``chart`` and ``components``); an empty frame needs ``chart`` and
    ``size`` (ambient fiber dimension).
    """

    def __init__(self, members: Sequence, chart=None, size: int | None = None):
        self.members = list(members)
        if self.members:
            chart = self.members[0].chart
            size = len(self.members[0].components)
            for m in self.members:
                if m.chart != chart or len(m.components) != size:
                    raise ValueError("frame members live in different ambients")
        self.chart = chart
        self.size = size

    @property
    def rank(self) -> int:
        return len(self.members)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def columns(self):
        return [list(m.components) for m in self.members]

    def values(self, points) -> np.ndarray:
        """Frame matrices at ``points``, shape ``(N, size, rank)``."""
        pts = np.atleast_2d(points)
        if not self.members:
            return np.zeros((len(pts), self.size or 0, 0))
        flat = [c for m in self.members for c in m.components]
        vals = E.evaluate_many(flat, pts)
        return vals.reshape(len(pts), self.rank, self.size).transpose(0, 2, 1)

    def is_constant(self) -> bool:
        return all(not E.free_vars(c) and not E.has_opaque(c) for m in self.members for c in m.components)

    def check_rank(self, spec: SampleSpec = SampleSpec()) -> None:
        """Raise :class:`RankDeficiencyError` if the members are dependent at a sample."""
        if not self.members:
            return
        pts, _ = E.sample_points(self.chart, spec, [c for m in self.members for c in m.components])
        mats = self.values(pts)
        for p, M in zip(pts, mats):
            if np.linalg.matrix_rank(M, tol=1e-9 * max(1.0, np.abs(M).max())) < self.rank:
                raise RankDeficiencyError(f"frame loses rank at {list(map(float, p))}", tuple(map(float, p)))


def _symbolic_residual(v, F: Frame):
    exprs = list(v) + [c for col in F.columns() for c in col]
    if any(E.has_opaque(e) for e in exprs):
        return None
    try:
        _, residual = linalg.expand(F.columns(), list(v), F.chart)
    except linalg.SingularMatrixError:
        return None
    if all(isinstance(r, E.Const) and r.value == 0 for r in residual):
        return True
    return False


def membership(v, F: Frame, spec: SampleSpec = SampleSpec()) -> ZeroVerdict:
    """Decide whether ``v`` lies pointwise in the span of ``F``.

    The symbolic tier solves once over expressions; otherwise each sample
    point is solved by least squares.  The residual is measured relative to
    ``max(1, |v(p)|)``.
    """
    comps = list(v.components) if hasattr(v, "components") else [E.as_expr(c) for c in v]
    if F.size is not None and len(comps) != F.size:
        raise ValueError(f"vector has {len(comps)} components, frame ambient has {F.size}")
    if all(isinstance(E.simplify(c), E.Const) and E.simplify(c).value == 0 for c in comps):
        return ZeroVerdict(E.SYMBOLIC_ZERO)
    if _symbolic_residual(comps, F):
        return ZeroVerdict(E.SYMBOLIC_ZERO)
    chart = F.chart if F.chart is not None else v.chart
    flat = comps + [c for col in F.columns() for c in col]
    pts, vals = E.sample_points(chart, spec, flat)
    n = len(comps)
    vv = vals[:, :n]
    mats = vals[:, n:].reshape(len(pts), F.rank, n).transpose(0, 2, 1)
    worst, witness = 0.0, None
    for p, M, b in zip(pts, mats, vv):
        scale = max(1.0, float(np.linalg.norm(b)))
        if F.rank:
            if np.linalg.matrix_rank(M, tol=1e-9 * max(1.0, np.abs(M).max())) < F.rank:
                raise RankDeficiencyError(f"frame loses rank at {list(map(float, p))}", tuple(map(float, p)))
            coef, *_ = np.linalg.lstsq(M, b, rcond=None)
            r = float(np.linalg.norm(M @ coef - b)) / scale
        else:
            r = float(np.linalg.norm(b)) / scale
        if r > worst:
            worst, witness = r, tuple(float(x) for x in p)
    if worst <= spec.tol:
        return ZeroVerdict(E.NUMERIC_ZERO, worst)
    return ZeroVerdict(E.NONZERO, worst, witness)


def involutive(F: Frame, spec: SampleSpec = SampleSpec(), bracket=lie_bracket) -> Report:
    """Frobenius test: every pairwise bracket of members stays in the span."""
    report = Report("involutivity")
    for i in range(F.rank):
        for j in range(i + 1, F.rank):
            verdict = membership(bracket(F[i], F[j]), F, spec)
            report.check(f"[F{i + 1}, F{j + 1}] in span", verdict)
    if F.rank < 2:
        report.ok("pairwise brackets", "fewer than two members")
    return report


def bott(F: Frame, Y: VectorField, Q: Frame, spec: SampleSpec = SampleSpec()):
    """Q-coefficients of the class of [F_i, Y] modulo F, one list per member of F.

    This is the Bott connection applied to the class of ``Y``.
    """
    columns = F.columns() + Q.columns()
    if len(columns) != (F.size or Q.size):
        raise RankDeficiencyError("F and Q together must frame the ambient tangent space")
    out = []
    for Fi in F:
        coeffs, _ = linalg.expand(columns, list(lie_bracket(Fi, Y).components), F.chart)
        out.append(coeffs[F.rank:])
    return out


def coordinate_frame(chart, indices) -> Frame:
    return Frame([VectorField.coordinate(chart, i) for i in indices], chart=chart, size=chart.dim)


def adapted_chart_check(F_M: Frame, leaf, spec: SampleSpec = SampleSpec()) -> Report:
    """Check that ``F_M`` spans exactly the coordinate directions in ``leaf``.

    ``leaf`` is a count ``l`` (the first ``l`` coordinates) or an explicit
    tuple of coordinate indices.
    """
    chart = F_M.chart
    if isinstance(leaf, int):
        leaf = tuple(range(leaf))
    report = Report("adapted chart")
    if F_M.rank != len(leaf):
        report.fail("rank", f"frame has {F_M.rank} members, leaf has {len(leaf)} directions")
        return report
    coord = coordinate_frame(chart, leaf)
    try:
        F_M.check_rank(spec)
    except RankDeficiencyError as err:
        report.fail("F_M independent", str(err), err.point)
        return report
    for k, m in enumerate(F_M):
        report.check(f"F{k + 1} in coordinate span", membership(m, coord, spec))
    for k, i in enumerate(leaf):
        report.check(f"d/d{chart.names[i]} in span F_M", membership(coord[k], F_M, spec))
    report.extend(involutive(F_M, spec), group="involutivity")
    return report
