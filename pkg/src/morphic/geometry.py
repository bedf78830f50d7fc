"""Vector fields and low-degree forms on a chart, Lie brackets, Cartan
calculus, RK4 flows and flow-invariance of fiber subbundles.

Sign convention for the interior product: ``(i_X w)_j = X^i w_ij``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import expr as E
from .expr import Chart, Expr, SampleSpec

__all__ = [
    "ChartMismatch", "FlowExitError", "NonLinearFieldError", "VectorField", "OneForm",
    "TwoForm", "lie_bracket", "d0", "d1", "interior", "lie_derivative_oneform",
    "flow", "tangent_lift_field", "total_space_chart", "linear_decomposition",
    "flow_invariance_check",
]


class ChartMismatch(ValueError):
    pass


class FlowExitError(RuntimeError):
    def __init__(self, step: int, point):
        super().__init__(f"trajectory left the sampling box at step {step} (point {list(point)})")
        self.step = step
        self.point = point


class NonLinearFieldError(ValueError):
    pass


def _prep(comps, chart):
    out = []
    for c in comps:
        if isinstance(c, str):
            c = chart.parse(c)
        c = E.as_expr(c)
        out.append(c if E.has_opaque(c) else E.simplify(c))
    return tuple(out)


class _Components:
    """Shared arithmetic for tuples of component expressions on a chart."""

    __slots__ = ("chart", "components")
    size_name = "component"

    def __init__(self, chart: Chart, components: Sequence):
        comps = _prep(components, chart)
        if len(comps) != self._expected(chart):
            raise ValueError(
                f"{type(self).__name__} needs {self._expected(chart)} components, got {len(comps)}"
            )
        self.chart = chart
        self.components = comps

    def _expected(self, chart):
        return chart.dim

    def _new(self, comps):
        return type(self)(self.chart, comps)

    def _same(self, other):
        if type(other) is not type(self) or other.chart != self.chart:
            raise ChartMismatch(f"cannot combine {type(self).__name__} on different charts")

    def __add__(self, other):
        self._same(other)
        return self._new([a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        self._same(other)
        return self._new([a - b for a, b in zip(self.components, other.components)])

    def __neg__(self):
        return self._new([-a for a in self.components])

    def __mul__(self, f):
        f = E.as_expr(f)
        return self._new([f * a for a in self.components])

    __rmul__ = __mul__

    def __getitem__(self, i):
        return self.components[i]

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __eq__(self, other):
        return type(other) is type(self) and other.chart == self.chart and other.components == self.components

    def __hash__(self):
        return hash((type(self).__name__, self.components))

    def evaluate(self, points) -> np.ndarray:
        return E.evaluate_many(list(self.components), points)

    def is_zero(self, spec: SampleSpec = SampleSpec()):
        return E.is_zero_many(self.components, self.chart, spec)

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(str(c) for c in self.components)})"


class VectorField(_Components):
    """X = X^i d/dx^i."""

    @classmethod
    def coordinate(cls, chart: Chart, i: int) -> "VectorField":
        return cls(chart, [E.ONE if j == i else E.ZERO for j in range(chart.dim)])

    @classmethod
    def zero(cls, chart: Chart) -> "VectorField":
        return cls(chart, [E.ZERO] * chart.dim)

    def __call__(self, f: Expr) -> Expr:
        """Directional derivative X(f)."""
        acc = E.ZERO
        for i, c in enumerate(self.components):
            if isinstance(c, E.Const) and c.value == 0:
                continue
            acc = acc + c * E.diff(f, i)
        return acc if E.has_opaque(acc) else E.simplify(acc)


class OneForm(_Components):
    """xi = xi_i dx^i."""

    @classmethod
    def zero(cls, chart: Chart) -> "OneForm":
        return cls(chart, [E.ZERO] * chart.dim)

    @classmethod
    def coordinate(cls, chart: Chart, i: int) -> "OneForm":
        return cls(chart, [E.ONE if j == i else E.ZERO for j in range(chart.dim)])

    def __call__(self, X: VectorField) -> Expr:
        if X.chart != self.chart:
            raise ChartMismatch("form and field live on different charts")
        return E.simplify(sum((a * b for a, b in zip(self.components, X.components)), E.ZERO))


class TwoForm:
    """Antisymmetric matrix of coefficients w_ij, w = sum_{i<j} w_ij dx^i ^ dx^j."""

    def __init__(self, chart: Chart, matrix):
        n = chart.dim
        rows = [_prep(row, chart) for row in matrix]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"TwoForm needs a {n}x{n} matrix")
        for i in range(n):
            for j in range(i, n):
                s = E.simplify(rows[i][j] + rows[j][i])
                if not (isinstance(s, E.Const) and s.value == 0):
                    raise ValueError(f"two-form matrix is not antisymmetric at ({i}, {j})")
        self.chart = chart
        self.matrix = tuple(rows)

    @classmethod
    def wedge(cls, chart: Chart, i: int, j: int) -> "TwoForm":
        """dx^i ^ dx^j."""
        n = chart.dim
        m = [[E.ZERO] * n for _ in range(n)]
        m[i][j] = E.ONE
        m[j][i] = E.Const(-1)
        return cls(chart, m)

    def __getitem__(self, ij):
        i, j = ij
        return self.matrix[i][j]

    def __eq__(self, other):
        return isinstance(other, TwoForm) and other.chart == self.chart and other.matrix == self.matrix

    def __add__(self, other):
        return TwoForm(self.chart, [[a + b for a, b in zip(r, s)] for r, s in zip(self.matrix, other.matrix)])

    def __repr__(self):
        terms = [
            f"({self.matrix[i][j]}) d{self.chart.names[i]}^d{self.chart.names[j]}"
            for i in range(self.chart.dim)
            for j in range(i + 1, self.chart.dim)
            if not (isinstance(self.matrix[i][j], E.Const) and self.matrix[i][j].value == 0)
        ]
        return "TwoForm(" + " + ".join(terms or ["0"]) + ")"


def _check(*objs):
    charts = {o.chart for o in objs}
    if len(charts) != 1:
        raise ChartMismatch("operands live on different charts")


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """[X, Y]^i = X(Y^i) - Y(X^i)."""
    _check(X, Y)
    return VectorField(X.chart, [X(b) - Y(a) for a, b in zip(X.components, Y.components)])


def d0(f: Expr, chart: Chart) -> OneForm:
    if isinstance(f, str):
        f = chart.parse(f)
    return OneForm(chart, [E.diff(f, i) for i in range(chart.dim)])


def d1(xi: OneForm) -> TwoForm:
    n = xi.chart.dim
    m = [[E.diff(xi.components[j], i) - E.diff(xi.components[i], j) for j in range(n)] for i in range(n)]
    return TwoForm(xi.chart, m)


def interior(X: VectorField, w: TwoForm) -> OneForm:
    _check(X, w)
    n = X.chart.dim
    return OneForm(X.chart, [sum((X.components[i] * w.matrix[i][j] for i in range(n)), E.ZERO) for j in range(n)])


def lie_derivative_oneform(X: VectorField, xi: OneForm) -> OneForm:
    """(L_X xi)_j = X(xi_j) + xi_i d_j X^i, computed directly in coordinates."""
    _check(X, xi)
    n = X.chart.dim
    return OneForm(
        X.chart,
        [X(xi.components[j]) + sum((xi.components[i] * E.diff(X.components[i], j) for i in range(n)), E.ZERO)
         for j in range(n)],
    )


def _rk4(rhs, y0, t, steps, inside=None):
    y = np.array(y0, dtype=float)
    if steps <= 0 or t == 0:
        return y
    dt = t / steps
    for k in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if inside is not None:
            bad = ~inside(y)
            if bad.any():
                raise FlowExitError(k + 1, np.atleast_2d(y)[np.flatnonzero(bad)[0]])
    return y


def flow(X: VectorField, p, t: float, steps: int | None = None, check_box: bool = True) -> np.ndarray:
    """Classical RK4 flow of ``X`` for time ``t``; ``p`` may be one point or a batch.

    The default step count is 1000 per unit time.
    """
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if t == 0:
        return pts[0].copy() if single else pts.copy()
    if steps is None:
        steps = max(1, int(np.ceil(abs(t) * 1000)))
    comps = list(X.components)

    def rhs(y):
        return E.evaluate_many(comps, y)

    inside = (lambda y: X.chart.contains(y)) if check_box else None
    out = _rk4(rhs, pts, t, steps, inside)
    return out[0] if single else out


def tangent_lift_field(X: VectorField, dot_names=None, dot_box=None) -> VectorField:
    """Complete lift of X to TM: (X^i, d_j X^i xdot^j) on the chart (x, xdot)."""
    chart = X.chart
    n = chart.dim
    names = dot_names or [f"{nm}dot" for nm in chart.names]
    box = dot_box or [(-1.0, 1.0)] * n
    tchart = Chart.make(list(chart.names) + list(names), list(chart.box) + list(box), base_dim=n)
    dots = [E.Var(n + j, names[j]) for j in range(n)]
    comps = list(X.components) + [
        sum((E.diff(X.components[i], j) * dots[j] for j in range(n)), E.ZERO) for i in range(n)
    ]
    return VectorField(tchart, comps)


def total_space_chart(base: Chart, fiber_names: Sequence[str], fiber_box=None) -> Chart:
    k = len(fiber_names)
    box = list(fiber_box) if fiber_box is not None else [(-1.0, 1.0)] * k
    return Chart.make(list(base.names) + list(fiber_names), list(base.box) + box, base_dim=base.dim)


def _base_chart(total: Chart) -> Chart:
    n = total.base_dim
    return Chart.make(total.names[:n], total.box[:n])


def linear_decomposition(X: VectorField):
    """Split a vector field on a total-space chart into (Xbar, L, v0).

    The fiber components must be of degree <= 1 in the fiber coordinates and
    the base components fiber-independent:
    ``X = Xbar^i d_i + (L^a_b(x) a^b + v0^a(x)) d_{a_a}``.
    Raises :class:`NonLinearFieldError` naming the offending component.
    """
    chart = X.chart
    n = chart.base_dim
    if n is None:
        raise ValueError("linear_decomposition needs a total-space chart (base_dim set)")
    k = chart.dim - n
    base = _base_chart(chart)
    zero_fiber = [E.Var(i, chart.names[i]) for i in range(n)] + [E.ZERO] * k
    for i in range(n):
        for a in range(k):
            if not _sym_zero(E.diff(X.components[i], n + a)):
                raise NonLinearFieldError(f"base component {chart.names[i]} depends on fiber coordinate {chart.names[n + a]}")
    L = []
    for a in range(k):
        comp = X.components[n + a]
        for b in range(k):
            for c in range(k):
                if not _sym_zero(E.diff(E.diff(comp, n + b), n + c)):
                    raise NonLinearFieldError(
                        f"fiber component {chart.names[n + a]} is not affine in {chart.names[n + b]}, {chart.names[n + c]}"
                    )
        L.append([_restrict(E.diff(comp, n + b), zero_fiber, n) for b in range(k)])
    xbar = VectorField(base, [_restrict(X.components[i], zero_fiber, n) for i in range(n)])
    v0 = [_restrict(X.components[n + a], zero_fiber, n) for a in range(k)]
    return xbar, L, v0


def _sym_zero(e: Expr) -> bool:
    s = E.simplify(e)
    return isinstance(s, E.Const) and s.value == 0


def _restrict(e: Expr, values, nvars):
    out = E.substitute(e, values, nvars)
    return out if E.has_opaque(out) else E.simplify(out)


def flow_invariance_check(X: VectorField, B: Sequence, spec: SampleSpec = SampleSpec(),
                          times: Sequence[float] = (0.1, 0.5, 1.0), flow_tol: float = 1e-6,
                          steps_per_unit: int = 1000, fiber_scale: float = 0.1):
    """Check that the flow of a linear field preserves the fiber subbundle span(B).

    ``B`` is a sequence of fiber sections given as component sequences (length
    k, functions of the base coordinates).  Part (a) tests D_X b in span(B) for
    every member; part (b) flows (m, b(m)) numerically and tests membership of
    the endpoint fiber vector in span(B) at the endpoint base point.
    """
    from .foliation import Frame, membership
    from .report import Report

    chart = X.chart
    n = chart.base_dim
    xbar, L, v0 = linear_decomposition(X)
    for a, c in enumerate(v0):
        if not _sym_zero(c):
            raise NonLinearFieldError(f"fiber component {chart.names[n + a]} has a fiber-constant term {c}")
    base = xbar.chart
    k = chart.dim - n
    members = [_FiberVec(base, list(b)) for b in B]
    frame = Frame(members)
    report = Report("flow invariance")
    hypothesis = True
    for idx, b in enumerate(members):
        dxb = [xbar(b.components[a]) - sum((L[a][c] * b.components[c] for c in range(k)), E.ZERO) for a in range(k)]
        verdict = membership(_FiberVec(base, dxb), frame, spec)
        report.check(f"(a) D_X b{idx + 1} in span(B)", verdict, group="hypothesis")
        hypothesis = hypothesis and verdict.ok
    rng = np.random.default_rng(spec.seed)
    target = min(spec.samples, 20)
    # every base point carries one trajectory per frame member; all are flowed together
    bases = base.sample(4 * target, int(rng.integers(0, 2**31)))
    starts = []
    for m in bases:
        for b in members:
            fv = b.evaluate(m[None, :])[0]
            # linear flows commute with fiber scaling; keep the start well inside the box
            fv = fv * (fiber_scale / max(1.0, float(np.abs(fv).max())))
            starts.append(np.concatenate([m, fv]))
    r = len(members)
    y = np.array(starts).reshape(len(bases) * r, chart.dim)
    alive = chart.contains(y).reshape(len(bases), r).all(axis=1)
    ends = []
    clock = 0.0
    for t in sorted(times):
        dt = t - clock
        y = flow(X, y, dt, max(1, int(np.ceil(abs(dt) * steps_per_unit))), check_box=False)
        clock = t
        alive &= chart.contains(y).reshape(len(bases), r).all(axis=1)
        ends.append((t, y.copy()))
    keep = np.flatnonzero(alive)[:target]
    checked = len(keep)
    worst = 0.0
    witness = None
    for t, end in ends:
        for i in keep:
            rows = end[i * r:(i + 1) * r]
            span = frame_values(members, rows[0, :n])
            for row in rows:
                res = _residual(span, row[n:])
                if res > worst:
                    worst, witness = res, (t,) + tuple(float(v) for v in row)
    if checked == 0:
        report.fail("(b) flow preserves span(B)", "no trajectory stayed inside the box", group="flow")
    else:
        tier = E.NUMERIC_ZERO if worst <= flow_tol else E.NONZERO
        report.check(
            "(b) flow preserves span(B)",
            E.ZeroVerdict(tier, worst, witness if tier == E.NONZERO else None),
            certificate="Numeric",
            detail=f"{checked} trajectories, t in {list(times)}",
            group="flow",
        )
    report.hypothesis_holds = hypothesis
    return report


def frame_values(members, point) -> np.ndarray:
    return np.array([m.evaluate(np.asarray(point)[None, :])[0] for m in members]).T


def _residual(span: np.ndarray, v: np.ndarray) -> float:
    if span.size == 0:
        return float(np.linalg.norm(v))
    coef, *_ = np.linalg.lstsq(span, v, rcond=None)
    return float(np.linalg.norm(span @ coef - v))


class _FiberVec(_Components):
    """A vector-valued function of arbitrary length on a chart."""

    def __init__(self, chart, components):
        self._n = len(components)
        super().__init__(chart, components)

    def _expected(self, chart):
        return self._n

    def _new(self, comps):
        return _FiberVec(self.chart, comps)
