"""Small linear algebra over expressions.

Solves are exact (rational Gaussian elimination) for constant matrices,
symbolic with pivots chosen at a generic reference point for symbolic
matrices, and pointwise numeric (wrapped as Opaque nodes) as soon as any
entry is numeric-only.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from . import expr as E

Matrix = list  # list of rows of Expr


class SingularMatrixError(ArithmeticError):
    pass


def _const(e: E.Expr):
    s = E.simplify(e)
    return s.value if isinstance(s, E.Const) else None


def reference_point(chart: E.Chart, seed: int = 20240611) -> np.ndarray:
    """A fixed generic point of the chart, used to choose pivots."""
    return chart.sample(1, seed)[0]


def _exact_solve(A, B):
    n = len(A)
    M = [list(A[i]) + list(B[i]) for i in range(n)]
    w = len(M[0])
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise SingularMatrixError("constant matrix is singular")
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [v / p for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return [[M[i][n + j] for j in range(w - n)] for i in range(n)]


def _symbolic_solve(A, B, ref):
    n = len(A)
    M = [[E.simplify(x) for x in list(A[i]) + list(B[i])] for i in range(n)]
    w = len(M[0])
    for col in range(n):
        vals = []
        for r in range(col, n):
            try:
                vals.append(abs(float(M[r][col].evaluate(ref))))
            except E.EvaluationError:
                vals.append(0.0)
        best = int(np.argmax(vals))
        if vals[best] < 1e-12:
            raise SingularMatrixError("matrix is singular at the reference point")
        piv = col + best
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [E.simplify(v / p) for v in M[col]]
        for r in range(n):
            if r == col:
                continue
            f = M[r][col]
            if isinstance(f, E.Const) and f.value == 0:
                continue
            M[r] = [E.simplify(a - f * b) for a, b in zip(M[r], M[col])]
    return [[M[i][n + j] for j in range(w - n)] for i in range(n)]


def _numeric_solve(A, B, nvars, label):
    n = len(A)
    m = len(B[0]) if B else 0
    flat = [x for row in A for x in row] + [x for row in B for x in row]

    def fn(points):
        vals = E.evaluate_many(flat, points)
        Am = vals[:, : n * n].reshape(-1, n, n)
        Bm = vals[:, n * n:].reshape(-1, n, m)
        return np.linalg.solve(Am, Bm)

    table = E.OpaqueTable(fn, nvars, label)
    return [[table.entry(i, j) for j in range(m)] for i in range(n)]


def solve_matrix(A: Sequence[Sequence[E.Expr]], B: Sequence[Sequence[E.Expr]], chart: E.Chart,
                 label: str = "solve") -> list[list[E.Expr]]:
    """Solve ``A X = B`` for square ``A``; ``B`` has one column per right-hand side."""
    A = [[E.as_expr(x) for x in row] for row in A]
    B = [[E.as_expr(x) for x in row] for row in B]
    n = len(A)
    if n == 0:
        return []
    if any(len(row) != n for row in A):
        raise ValueError("matrix must be square")
    entries = [x for row in A for x in row] + [x for row in B for x in row]
    if any(E.has_opaque(x) for x in entries):
        return _numeric_solve(A, B, chart.dim, label)
    consts = [[_const(x) for x in row] for row in A]
    bconsts = [[_const(x) for x in row] for row in B]
    if all(v is not None for row in consts for v in row) and all(v is not None for row in bconsts for v in row):
        X = _exact_solve(consts, bconsts)
        return [[E.Const(v) for v in row] for row in X]
    return _symbolic_solve(A, B, reference_point(chart))


def solve(A, b, chart: E.Chart) -> list[E.Expr]:
    X = solve_matrix(A, [[v] for v in b], chart)
    return [row[0] for row in X]


def inverse(A, chart: E.Chart) -> list[list[E.Expr]]:
    n = len(A)
    eye = [[E.ONE if i == j else E.ZERO for j in range(n)] for i in range(n)]
    return solve_matrix(A, eye, chart, label="inv")


def independent_rows(M: Sequence[Sequence[E.Expr]], chart: E.Chart, tol: float = 1e-9) -> list[int]:
    """Greedy choice of rows of ``M`` (m x r) giving a nonsingular r x r minor."""
    m = len(M)
    r = len(M[0]) if m else 0
    ref = reference_point(chart)
    flat = [E.as_expr(x) for row in M for x in row]
    vals = E.evaluate_many(flat, ref[None, :])[0].reshape(m, r) if flat else np.zeros((m, r))
    chosen: list[int] = []
    for i in range(m):
        trial = vals[chosen + [i]]
        if np.linalg.matrix_rank(trial, tol=tol * max(1.0, np.abs(vals).max())) == len(chosen) + 1:
            chosen.append(i)
        if len(chosen) == r:
            break
    if len(chosen) < r:
        raise SingularMatrixError("frame is rank deficient at the reference point")
    return chosen


def expand(columns: Sequence[Sequence[E.Expr]], v: Sequence[E.Expr], chart: E.Chart):
    """Coefficients of ``v`` over the given column vectors plus the residual.

    Returns ``(coeffs, residual)`` where ``residual = v - sum coeffs[j] * columns[j]``.
    The coefficients solve a square subsystem picked at the reference point.
    """
    v = [E.as_expr(x) for x in v]
    r = len(columns)
    if r == 0:
        return [], [E.simplify(x) for x in v]
    M = [[E.as_expr(columns[j][i]) for j in range(r)] for i in range(len(v))]
    rows = independent_rows(M, chart)
    coeffs = solve([M[i] for i in rows], [v[i] for i in rows], chart)
    residual = []
    for i in range(len(v)):
        acc = v[i]
        for j in range(r):
            acc = acc - coeffs[j] * M[i][j]
        residual.append(E.simplify(acc) if not E.has_opaque(acc) else acc)
    return coeffs, residual


def matmul(A, B):
    n, k = len(A), len(B)
    m = len(B[0]) if k else 0
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = E.ZERO
            for t in range(k):
                acc = acc + A[i][t] * B[t][j]
            row.append(E.simplify(acc) if not E.has_opaque(acc) else acc)
        out.append(row)
    return out


def frac_matrix(M) -> list[list[Fraction]] | None:
    """Exact constant values of a matrix of expressions, or None."""
    out = []
    for row in M:
        vals = [_const(x) for x in row]
        if any(v is None for v in vals):
            return None
        out.append(vals)
    return out
