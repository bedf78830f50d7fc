"""Symbolic scalar expressions over the coordinates of a chart.

Expressions are immutable trees.  Constants are exact rationals whenever
possible; evaluation is vectorised over an ``(N, n)`` array of points and
compiled to numpy code on first use.  ``simplify`` brings an expression into
a rational normal form (expanded numerator over expanded denominator, like
terms collected, powers merged) and is the basis of the ``SymbolicZero``
verdict of :func:`is_zero`.

Numeric-only functions (parallel transport, pointwise linear solves) enter
the same trees as :class:`Opaque` nodes, which behave as atoms for the
simplifier and are differentiated by central differences.
"""

from __future__ import annotations

import itertools
import math
from collections import OrderedDict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Add", "Mul", "Neg", "Div", "Pow", "Func", "Opaque",
    "OpaqueTable", "Chart", "SampleSpec", "ZeroVerdict", "EvaluationError",
    "as_expr", "const", "diff", "simplify", "is_zero", "is_zero_many",
    "substitute", "has_opaque", "free_vars", "evaluate_many", "ZERO", "ONE",
]


class EvaluationError(ArithmeticError):
    """Raised when an expression is not finite at some evaluation point."""

    def __init__(self, message, bad_rows=None):
        super().__init__(message)
        self.bad_rows = bad_rows


_FUNCS = ("sin", "cos", "exp")
_NP_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_MATH_FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp}


def _num(value):
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, (Fraction, float)):
        return value
    if isinstance(value, np.integer):
        return Fraction(int(value))
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"cannot use {value!r} as a numeric constant")


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("_hash", "_simple", "_compiled")
    precedence = 100

    def _init(self, key):
        object.__setattr__(self, "_hash", hash(key))
        object.__setattr__(self, "_simple", None)
        object.__setattr__(self, "_compiled", None)

    def __setattr__(self, name, value):
        raise AttributeError("expressions are immutable")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr) or self._hash != other._hash:
            return False
        return type(self) is type(other) and self._fields() == other._fields()

    def _fields(self):
        raise NotImplementedError

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        return power(self, n)

    # convenience ----------------------------------------------------------
    def diff(self, j: int) -> "Expr":
        return diff(self, j)

    def simplify(self) -> "Expr":
        return simplify(self)

    def evaluate(self, points) -> np.ndarray:
        """Evaluate at an ``(N, n)`` array (or a single point) of coordinates."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        out = evaluate_many([self], pts)[:, 0]
        return float(out[0]) if single else out

    def evaluate_exact(self, point: Sequence) -> Fraction | float:
        """Evaluate at a point with rational arithmetic where possible."""
        return _eval_exact(self, tuple(_num(v) for v in point))

    @property
    def is_constant(self) -> bool:
        return isinstance(simplify(self), Const)

    def __repr__(self):
        return f"Expr({self})"

    def __str__(self):
        return _print(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        value = _num(value)
        object.__setattr__(self, "value", value)
        self._init(("c", value))

    def _fields(self):
        return (type(self.value) is float, self.value)

    @property
    def precedence(self):
        v = self.value
        if v < 0 or (isinstance(v, Fraction) and v.denominator != 1):
            return 2
        return 100


class Var(Expr):
    __slots__ = ("index", "name")

    def __init__(self, index: int, name: str | None = None):
        object.__setattr__(self, "index", int(index))
        object.__setattr__(self, "name", name or f"x{index + 1}")
        self._init(("v", self.index))

    def _fields(self):
        return (self.index,)


class Add(Expr):
    __slots__ = ("args",)
    precedence = 1

    def __init__(self, args):
        object.__setattr__(self, "args", tuple(args))
        self._init(("+",) + self.args)

    def _fields(self):
        return self.args


class Mul(Expr):
    __slots__ = ("args",)
    precedence = 2

    def __init__(self, args):
        object.__setattr__(self, "args", tuple(args))
        self._init(("*",) + self.args)

    def _fields(self):
        return self.args


class Neg(Expr):
    __slots__ = ("arg",)
    precedence = 3

    def __init__(self, arg):
        object.__setattr__(self, "arg", arg)
        self._init(("neg", arg))

    def _fields(self):
        return (self.arg,)


class Div(Expr):
    __slots__ = ("num", "den")
    precedence = 2

    def __init__(self, num, den):
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        self._init(("/", num, den))

    def _fields(self):
        return (self.num, self.den)


class Pow(Expr):
    __slots__ = ("base", "exp")
    precedence = 4

    def __init__(self, base, exp: int):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exp", int(exp))
        self._init(("^", base, self.exp))

    def _fields(self):
        return (self.base, self.exp)


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg):
        if name not in _FUNCS:
            raise ValueError(f"unknown primitive {name!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)
        self._init(("f", name, arg))

    def _fields(self):
        return (self.name, self.arg)


_opaque_ids = itertools.count()


class Opaque(Expr):
    """A numerically defined scalar function of the chart coordinates.

    ``fn`` maps an ``(N, m)`` float array, ``m >= nvars``, to an ``(N,)``
    array and may only read the first ``nvars`` columns.  Partial
    derivatives are central differences whose step grows with the derivative
    order so that nested differences stay above round-off.
    """

    __slots__ = ("label", "nvars", "fn", "uid", "order", "_partials")

    BASE_STEP = 1e-5

    def __init__(self, label: str, nvars: int, fn: Callable, order: int = 0):
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "nvars", int(nvars))
        object.__setattr__(self, "fn", fn)
        object.__setattr__(self, "uid", next(_opaque_ids))
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "_partials", {})
        self._init(("o", self.uid))

    def _fields(self):
        return (self.uid,)

    def partial(self, j: int) -> "Opaque":
        if j in self._partials:
            return self._partials[j]
        h = self.BASE_STEP * 10.0 ** self.order
        fn = self.fn

        def d(points, _j=j, _h=h):
            up = points.copy()
            up[:, _j] += _h
            dn = points.copy()
            dn[:, _j] -= _h
            return (fn(up) - fn(dn)) / (2.0 * _h)

        child = Opaque(f"d{j + 1}({self.label})", self.nvars, d, self.order + 1)
        self._partials[j] = child
        return child


class OpaqueTable:
    """Shared, cached array-valued numeric function feeding several Opaque entries."""

    def __init__(self, fn: Callable, nvars: int, label: str, cache_size: int = 256):
        self._fn = fn
        self.nvars = nvars
        self.label = label
        self._cache: OrderedDict = OrderedDict()
        self._size = cache_size

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.ascontiguousarray(points, dtype=float)
        key = (points.shape, points.tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        value = np.asarray(self._fn(points), dtype=float)
        self._cache[key] = value
        if len(self._cache) > self._size:
            self._cache.popitem(last=False)
        return value

    def entry(self, *index) -> Opaque:
        label = f"{self.label}[{','.join(str(i) for i in index)}]"
        return Opaque(label, self.nvars, lambda pts, _i=index: self(pts)[(slice(None),) + _i])


ZERO = Const(0)
ONE = Const(1)


def const(value) -> Const:
    return Const(value)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(value)


# ---------------------------------------------------------------------------
# smart constructors: cheap folding only; full canonicalisation is simplify()


def add(*args) -> Expr:
    terms = []
    total = Fraction(0)
    for a in args:
        a = as_expr(a)
        parts = a.args if isinstance(a, Add) else (a,)
        for p in parts:
            if isinstance(p, Const):
                total = total + p.value
            else:
                terms.append(p)
    if total != 0:
        terms.append(Const(total))
    if not terms:
        return Const(total) if isinstance(total, float) else ZERO
    if len(terms) == 1:
        return terms[0]
    return Add(terms)


def mul(*args) -> Expr:
    factors = []
    coeff = Fraction(1)
    for a in args:
        a = as_expr(a)
        parts = a.args if isinstance(a, Mul) else (a,)
        for p in parts:
            if isinstance(p, Const):
                coeff = coeff * p.value
            elif isinstance(p, Neg):
                coeff = -coeff
                factors.append(p.arg)
            else:
                factors.append(p)
    if coeff == 0:
        return ZERO
    if not factors:
        return Const(coeff)
    if coeff == -1:
        body = factors[0] if len(factors) == 1 else Mul(factors)
        return Neg(body)
    if coeff != 1:
        factors.insert(0, Const(coeff))
    if len(factors) == 1:
        return factors[0]
    return Mul(factors)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Const):
        if b.value == 0:
            raise ZeroDivisionError("division by the constant 0")
        if isinstance(a, Const):
            return Const(a.value / b.value)
        if b.value == 1:
            return a
        return mul(Const(1 / b.value if isinstance(b.value, float) else Fraction(1) / b.value), a)
    if isinstance(a, Const) and a.value == 0:
        return ZERO
    return Div(a, b)


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const):
        if a.value == 0 and n < 0:
            raise ZeroDivisionError("0 to a negative power")
        return Const(a.value ** n)
    if isinstance(a, Pow):
        return power(a.base, a.exp * n)
    return Pow(a, n)


def func(name: str, a: Expr) -> Expr:
    if isinstance(a, Const) and a.value == 0:
        return ZERO if name == "sin" else ONE
    return Func(name, a)


def sin(a) -> Expr:
    return func("sin", as_expr(a))


def cos(a) -> Expr:
    return func("cos", as_expr(a))


def exp(a) -> Expr:
    return func("exp", as_expr(a))


# ---------------------------------------------------------------------------
# differentiation


@lru_cache(maxsize=200_000)
def diff(e: Expr, j: int) -> Expr:
    """Exact partial derivative with respect to coordinate ``j``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == j else ZERO
    if isinstance(e, Add):
        return add(*(diff(a, j) for a in e.args))
    if isinstance(e, Mul):
        terms = []
        for i, a in enumerate(e.args):
            da = diff(a, j)
            if isinstance(da, Const) and da.value == 0:
                continue
            terms.append(mul(*e.args[:i], da, *e.args[i + 1:]))
        return add(*terms)
    if isinstance(e, Neg):
        return neg(diff(e.arg, j))
    if isinstance(e, Div):
        du, dv = diff(e.num, j), diff(e.den, j)
        if isinstance(dv, Const) and dv.value == 0:
            return div(du, e.den)
        return div(add(mul(du, e.den), neg(mul(e.num, dv))), power(e.den, 2))
    if isinstance(e, Pow):
        db = diff(e.base, j)
        if isinstance(db, Const) and db.value == 0:
            return ZERO
        return mul(Const(e.exp), power(e.base, e.exp - 1), db)
    if isinstance(e, Func):
        da = diff(e.arg, j)
        if isinstance(da, Const) and da.value == 0:
            return ZERO
        if e.name == "sin":
            return mul(Func("cos", e.arg), da)
        if e.name == "cos":
            return neg(mul(Func("sin", e.arg), da))
        return mul(e, da)
    if isinstance(e, Opaque):
        return ZERO if j >= e.nvars else e.partial(j)
    raise TypeError(f"cannot differentiate {type(e).__name__}")


# ---------------------------------------------------------------------------
# structural helpers


def _children(e: Expr):
    if isinstance(e, (Add, Mul)):
        return e.args
    if isinstance(e, (Neg, Func)):
        return (e.arg,)
    if isinstance(e, Div):
        return (e.num, e.den)
    if isinstance(e, Pow):
        return (e.base,)
    return ()


def _walk(e: Expr):
    seen = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        stack.extend(_children(node))


def free_vars(e: Expr) -> set[int]:
    """Indices of coordinates the expression depends on syntactically."""
    out = set()
    for node in _walk(e):
        if isinstance(node, Var):
            out.add(node.index)
        elif isinstance(node, Opaque):
            out.update(range(node.nvars))
    return out


def has_opaque(e: Expr) -> bool:
    return any(isinstance(node, Opaque) for node in _walk(e))


def substitute(e: Expr, values: Sequence[Expr], nvars: int | None = None) -> Expr:
    """Replace coordinate ``i`` by ``values[i]``.

    ``nvars`` is the dimension of the chart the substituted expressions live
    on; it is needed only when ``e`` contains Opaque nodes.
    """
    values = tuple(as_expr(v) for v in values)
    memo: dict[int, Expr] = {}

    def go(x: Expr) -> Expr:
        k = id(x)
        if k in memo:
            return memo[k]
        if isinstance(x, Const):
            out = x
        elif isinstance(x, Var):
            out = values[x.index]
        elif isinstance(x, Add):
            out = add(*(go(a) for a in x.args))
        elif isinstance(x, Mul):
            out = mul(*(go(a) for a in x.args))
        elif isinstance(x, Neg):
            out = neg(go(x.arg))
        elif isinstance(x, Div):
            out = div(go(x.num), go(x.den))
        elif isinstance(x, Pow):
            out = power(go(x.base), x.exp)
        elif isinstance(x, Func):
            out = func(x.name, go(x.arg))
        elif isinstance(x, Opaque):
            out = _compose_opaque(x, values, nvars)
        else:
            raise TypeError(type(x).__name__)
        memo[k] = out
        return out

    return go(e)


def _compose_opaque(o: Opaque, values, nvars):
    if nvars is None:
        raise ValueError("substituting into an Opaque node needs the target dimension")
    inner = list(values[: o.nvars])

    def fn(points, _o=o, _inner=inner):
        embedded = evaluate_many(_inner, points)
        return _o.fn(embedded)

    return Opaque(f"{o.label}∘φ", nvars, fn)


# ---------------------------------------------------------------------------
# evaluation


def _eval_exact(e: Expr, point):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return point[e.index]
    if isinstance(e, Add):
        return sum((_eval_exact(a, point) for a in e.args), Fraction(0))
    if isinstance(e, Mul):
        out = Fraction(1)
        for a in e.args:
            out = out * _eval_exact(a, point)
        return out
    if isinstance(e, Neg):
        return -_eval_exact(e.arg, point)
    if isinstance(e, Div):
        den = _eval_exact(e.den, point)
        if den == 0:
            raise EvaluationError(f"denominator {e.den} vanishes")
        return _eval_exact(e.num, point) / den
    if isinstance(e, Pow):
        b = _eval_exact(e.base, point)
        if b == 0 and e.exp < 0:
            raise EvaluationError(f"{e.base} vanishes under a negative power")
        return b ** e.exp
    if isinstance(e, Func):
        return _MATH_FUNCS[e.name](float(_eval_exact(e.arg, point)))
    if isinstance(e, Opaque):
        pts = np.array([[float(v) for v in point]])
        return float(e.fn(pts)[0])
    raise TypeError(type(e).__name__)


class _Compiler:
    def __init__(self):
        self.lines: list[str] = []
        self.names: dict[int, str] = {}
        self.env: dict = {"np": np}
        self.counter = itertools.count()
        self.memo: dict = {}

    def emit(self, e: Expr) -> str:
        key = e
        if key in self.memo:
            return self.memo[key]
        if isinstance(e, Const):
            code = repr(float(e.value))
            self.memo[key] = code
            return code
        if isinstance(e, Var):
            code = f"X[:, {e.index}]"
            self.memo[key] = code
            return code
        if isinstance(e, Add):
            code = " + ".join(f"({self.emit(a)})" for a in e.args)
        elif isinstance(e, Mul):
            code = " * ".join(f"({self.emit(a)})" for a in e.args)
        elif isinstance(e, Neg):
            code = f"-({self.emit(e.arg)})"
        elif isinstance(e, Div):
            code = f"({self.emit(e.num)}) / ({self.emit(e.den)})"
        elif isinstance(e, Pow):
            if e.exp < 0:
                code = f"1.0 / (({self.emit(e.base)}) ** {-e.exp})"
            else:
                code = f"({self.emit(e.base)}) ** {e.exp}"
        elif isinstance(e, Func):
            code = f"np.{e.name}({self.emit(e.arg)})"
        elif isinstance(e, Opaque):
            name = f"_o{e.uid}"
            self.env[name] = e.fn
            code = f"{name}(X)"
        else:
            raise TypeError(type(e).__name__)
        tmp = f"t{next(self.counter)}"
        self.lines.append(f"    {tmp} = {code}")
        self.memo[key] = tmp
        return tmp


_compiled_cache: OrderedDict = OrderedDict()


def _compile(exprs: tuple) -> Callable:
    hit = _compiled_cache.get(exprs)
    if hit is not None:
        _compiled_cache.move_to_end(exprs)
        return hit
    comp = _Compiler()
    outs = [comp.emit(e) for e in exprs]
    body = "\n".join(comp.lines)
    ret = ", ".join(outs) + ("," if len(outs) == 1 else "")
    src = f"def _f(X):\n{body}\n    return ({ret})\n" if body else f"def _f(X):\n    return ({ret})\n"
    exec(compile(src, "<expr>", "exec"), comp.env)
    fn = comp.env["_f"]
    _compiled_cache[exprs] = fn
    if len(_compiled_cache) > 4096:
        _compiled_cache.popitem(last=False)
    return fn


def evaluate_many(exprs: Sequence[Expr], points) -> np.ndarray:
    """Evaluate several expressions at once; returns an ``(N, len(exprs))`` array.

    Raises :class:`EvaluationError` if any value is not finite; the rows that
    failed are attached as ``bad_rows``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    n = pts.shape[0]
    if not exprs:
        return np.zeros((n, 0))
    fn = _compile(tuple(exprs))
    with np.errstate(all="ignore"):
        cols = fn(pts)
    out = np.empty((n, len(exprs)))
    for k, c in enumerate(cols):
        out[:, k] = c
    bad = ~np.isfinite(out).all(axis=1)
    if bad.any():
        rows = np.flatnonzero(bad)
        raise EvaluationError(f"non-finite value at {len(rows)} point(s), first {pts[rows[0]].tolist()}", rows)
    return out


# ---------------------------------------------------------------------------
# rational normal form
#
# A monomial is a tuple of (atom, exponent) pairs sorted by atom key; atoms are
# Var, Func (with canonical argument) and Opaque nodes.  Exponents may be
# negative (Laurent monomials).  A polynomial is a dict monomial -> coefficient.
# A rational function is (numerator, denominator) with a monic, content-free
# denominator.


def _atom_key(a: Expr):
    if isinstance(a, Var):
        return (0, a.index, "")
    if isinstance(a, Func):
        return (1, 0, a.name + "(" + str(a.arg) + ")")
    return (2, a.uid, "")


_ONE_MONO: tuple = ()


def _mono_mul(m1, m2):
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for atom, k in m2:
        v = d.get(atom, 0) + k
        if v:
            d[atom] = v
        else:
            d.pop(atom, None)
    return tuple(sorted(d.items(), key=lambda t: _atom_key(t[0])))


def _mono_pow(m, n):
    return tuple((a, k * n) for a, k in m) if n else ()


def _p_add(p, q, sign=1):
    out = dict(p)
    for m, c in q.items():
        v = out.get(m, 0) + sign * c
        if v == 0:
            out.pop(m, None)
        else:
            out[m] = v
    return out


def _p_mul(p, q):
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = _mono_mul(m1, m2)
            v = out.get(m, 0) + c1 * c2
            if v == 0:
                out.pop(m, None)
            else:
                out[m] = v
    return out


def _p_scale(p, c, mono=()):
    if c == 0:
        return {}
    return {_mono_mul(m, mono): v * c for m, v in p.items()}


def _p_const(c):
    return {(): c} if c != 0 else {}


def _atoms(*polys):
    out = {}
    for p in polys:
        for m in p:
            for a, _ in m:
                out[a] = _atom_key(a)
    return sorted(out, key=out.get)


def _exponents(m, order):
    d = dict(m)
    return tuple(d.get(a, 0) for a in order)


def _leading(p, order):
    best = None
    for m in p:
        ex = _exponents(m, order)
        key = (sum(ex), ex)
        if best is None or key > best[0]:
            best = (key, m)
    return best[1]


def _mono_min(p):
    """Monomial gcd (componentwise minimum exponent, absent atoms count as 0)."""
    atoms = _atoms(p)
    mins = {}
    for a in atoms:
        mins[a] = min(dict(m).get(a, 0) for m in p)
    return tuple(sorted(((a, k) for a, k in mins.items() if k), key=lambda t: _atom_key(t[0])))


def _mono_divides(m, n):
    dm, dn = dict(m), dict(n)
    return all(dn.get(a, 0) >= k for a, k in dm.items()) and all(
        k >= 0 or dm.get(a, 0) >= k for a, k in dn.items()
    )


def _p_divexact(p, q):
    """Exact quotient p / q for polynomials with nonnegative exponents, else None."""
    if not q:
        raise ZeroDivisionError
    if not p:
        return {}
    order = _atoms(p, q)
    lq = _leading(q, order)
    cq = q[lq]
    inv_lq = _mono_pow(lq, -1)
    rem = dict(p)
    quot: dict = {}
    steps = 0
    while rem:
        steps += 1
        if steps > 2000:
            return None
        lr = _leading(rem, order)
        if not _mono_divides(lq, lr):
            return None
        t = _mono_mul(lr, inv_lq)
        if any(k < 0 for _, k in t):
            return None
        c = rem[lr] / cq
        quot = _p_add(quot, {t: c})
        rem = _p_add(rem, _p_scale(q, c, t), sign=-1)
    return quot


def _clear_negative(p):
    """Return (p * m, m) with m a monomial making all exponents nonnegative."""
    m = _mono_min(p)
    inv = tuple((a, -k) for a, k in m if k < 0)
    inv = tuple(sorted(inv, key=lambda t: _atom_key(t[0])))
    return ({_mono_mul(k, inv): v for k, v in p.items()}, inv)


class _Rat:
    __slots__ = ("num", "den")

    def __init__(self, num, den=None, normalize=True):
        self.num = num
        self.den = den if den is not None else {(): Fraction(1)}
        if normalize:
            self._normalize()

    def _normalize(self):
        num, den = self.num, self.den
        if not num:
            self.num, self.den = {}, {(): Fraction(1)}
            return
        # move monomial content of the denominator into the numerator
        m = _mono_min(den)
        if m:
            inv = _mono_pow(m, -1)
            den = {_mono_mul(k, inv): v for k, v in den.items()}
            num = {_mono_mul(k, inv): v for k, v in num.items()}
        order = _atoms(den)
        lead = _leading(den, order)
        c = den[lead]
        if c != 1:
            inv_c = 1 / c
            den = {k: v * inv_c for k, v in den.items()}
            num = {k: v * inv_c for k, v in num.items()}
        if len(den) > 1:
            cleared, shift = _clear_negative(num)
            q = _p_divexact(cleared, den)
            if q is not None:
                back = _mono_pow(shift, -1)
                num = {_mono_mul(k, back): v for k, v in q.items()}
                den = {(): Fraction(1)}
        self.num, self.den = num, den

    @property
    def is_poly(self):
        return len(self.den) == 1 and () in self.den

    def __add__(self, other):
        if self.den == other.den:
            return _Rat(_p_add(self.num, other.num), self.den)
        if other.is_poly:
            return _Rat(_p_add(self.num, _p_mul(other.num, self.den)), self.den)
        if self.is_poly:
            return _Rat(_p_add(_p_mul(self.num, other.den), other.num), other.den)
        q = _p_divexact(self.den, other.den)
        if q is not None:
            return _Rat(_p_add(self.num, _p_mul(other.num, q)), self.den)
        q = _p_divexact(other.den, self.den)
        if q is not None:
            return _Rat(_p_add(_p_mul(self.num, q), other.num), other.den)
        return _Rat(
            _p_add(_p_mul(self.num, other.den), _p_mul(other.num, self.den)),
            _p_mul(self.den, other.den),
        )

    def __neg__(self):
        return _Rat({k: -v for k, v in self.num.items()}, self.den, normalize=False)

    def __mul__(self, other):
        if self.is_poly and other.is_poly:
            return _Rat(_p_mul(self.num, other.num), None, normalize=False)
        return _Rat(_p_mul(self.num, other.num), _p_mul(self.den, other.den))

    def inverse(self):
        if not self.num:
            raise ZeroDivisionError("division by an expression that simplifies to 0")
        return _Rat(self.den, self.num)

    def pow(self, n):
        if n < 0:
            return self.inverse().pow(-n)
        out = _Rat({(): Fraction(1)}, None, normalize=False)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out


def _to_rat(e: Expr, memo) -> _Rat:
    k = id(e)
    if k in memo:
        return memo[k][1]
    if isinstance(e, Const):
        r = _Rat(_p_const(e.value), None, normalize=False)
    elif isinstance(e, (Var, Opaque)):
        r = _Rat({((e, 1),): Fraction(1)}, None, normalize=False)
    elif isinstance(e, Add):
        r = _to_rat(e.args[0], memo)
        for a in e.args[1:]:
            r = r + _to_rat(a, memo)
    elif isinstance(e, Mul):
        r = _to_rat(e.args[0], memo)
        for a in e.args[1:]:
            r = r * _to_rat(a, memo)
    elif isinstance(e, Neg):
        r = -_to_rat(e.arg, memo)
    elif isinstance(e, Div):
        r = _to_rat(e.num, memo) * _to_rat(e.den, memo).inverse()
    elif isinstance(e, Pow):
        r = _to_rat(e.base, memo).pow(e.exp)
    elif isinstance(e, Func):
        arg = simplify(e.arg)
        if isinstance(arg, Const) and arg.value == 0:
            r = _Rat(_p_const(Fraction(0 if e.name == "sin" else 1)), None, normalize=False)
        else:
            r = _Rat({((Func(e.name, arg), 1),): Fraction(1)}, None, normalize=False)
    else:
        raise TypeError(type(e).__name__)
    memo[k] = (e, r)
    return r


def _mono_expr(m) -> tuple[list, list]:
    up, down = [], []
    for a, k in m:
        if k > 0:
            up.append(power(a, k))
        else:
            down.append(power(a, -k))
    return up, down


def _poly_expr(p) -> Expr:
    if not p:
        return ZERO
    order = _atoms(p)

    def key(m):
        ex = _exponents(m, order)
        return (-sum(ex), tuple(-x for x in ex))

    terms = []
    for m in sorted(p, key=key):
        c = p[m]
        up, down = _mono_expr(m)
        mag = abs(c)
        body = mul(Const(mag), *up) if up else Const(mag)
        if down:
            body = Div(body, mul(*down))
        terms.append(Neg(body) if c < 0 and not isinstance(body, Const) else (Const(-mag) if c < 0 else body))
    return terms[0] if len(terms) == 1 else Add(terms)


def _rat_expr(r: _Rat) -> Expr:
    num = _poly_expr(r.num)
    if r.is_poly:
        return num
    return Div(num, _poly_expr(r.den))


def simplify(e: Expr) -> Expr:
    """Rational normal form: constant folding, like terms, merged powers."""
    e = as_expr(e)
    if e._simple is not None:
        return e._simple
    if isinstance(e, (Const, Var, Opaque)):
        out = e
    else:
        out = _rat_expr(_to_rat(e, {}))
    object.__setattr__(e, "_simple", out)
    object.__setattr__(out, "_simple", out)
    return out


# ---------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 100


def _fmt_const(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        return e.precedence
    if isinstance(e, Add):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _wrap(e: Expr, need: int) -> str:
    s = _print(e)
    return f"({s})" if _prec(e) < need else s


def _print(e: Expr) -> str:
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Add):
        out = [_print(e.args[0])]
        for a in e.args[1:]:
            if isinstance(a, Neg):
                out.append(" - " + _wrap(a.arg, _PREC_MUL))
            elif isinstance(a, Const) and a.value < 0:
                out.append(" - " + _fmt_const(-a.value))
            else:
                out.append(" + " + _wrap(a, _PREC_ADD + 1))
        return "".join(out)
    if isinstance(e, Mul):
        return "*".join(_wrap(a, _PREC_MUL + 1) for a in e.args)
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _PREC_NEG + 1)
    if isinstance(e, Div):
        return _wrap(e.num, _PREC_MUL + 1) + "/" + _wrap(e.den, _PREC_MUL + 1)
    if isinstance(e, Pow):
        base = _wrap(e.base, _PREC_ATOM)
        return f"{base}^{e.exp}" if e.exp >= 0 else f"{base}^({e.exp})"
    if isinstance(e, Func):
        return f"{e.name}({_print(e.arg)})"
    if isinstance(e, Opaque):
        return f"<{e.label}>"
    raise TypeError(type(e).__name__)


# ---------------------------------------------------------------------------
# charts, sampling and zero tests


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names with a closed sampling interval per coordinate.

    ``base_dim`` is set on total-space charts of a vector bundle: the first
    ``base_dim`` coordinates are base coordinates, the rest fiber coordinates.
    """

    names: tuple
    box: tuple
    base_dim: int | None = None

    def __post_init__(self):
        names = tuple(self.names)
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "box", box)
        if len(set(names)) != len(names):
            raise ValueError(f"coordinate names must be unique: {names}")
        if len(box) != len(names):
            raise ValueError("one sampling interval per coordinate is required")
        for name, (lo, hi) in zip(names, box):
            if not hi > lo:
                raise ValueError(f"degenerate sampling interval for {name}: [{lo}, {hi}]")
            if not name.isidentifier() or name in _FUNCS:
                raise ValueError(f"invalid coordinate name {name!r}")

    @classmethod
    def make(cls, names, box=None, base_dim=None) -> "Chart":
        if isinstance(names, str):
            names = names.split()
        names = tuple(names)
        if box is None:
            box = [(-1.0, 1.0)] * len(names)
        return cls(names, tuple(box), base_dim)

    @property
    def dim(self) -> int:
        return len(self.names)

    def var(self, i: int | str) -> Var:
        if isinstance(i, str):
            i = self.names.index(i)
        return Var(i, self.names[i])

    def vars(self) -> list[Var]:
        return [Var(i, n) for i, n in enumerate(self.names)]

    def parse(self, text: str) -> Expr:
        from .parser import parse

        return parse(text, self)

    def sample(self, count: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        if not self.names:
            return np.zeros((count, 0))
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        return lo + (hi - lo) * rng.random((count, self.dim))

    def center(self) -> np.ndarray:
        return np.array([(lo + hi) / 2 for lo, hi in self.box])

    def contains(self, points, slack: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(points)
        lo = np.array([b[0] for b in self.box]) - slack
        hi = np.array([b[1] for b in self.box]) + slack
        return ((pts >= lo) & (pts <= hi)).all(axis=1)


@dataclass(frozen=True)
class SampleSpec:
    samples: int = 100
    seed: int = 0
    tol: float = 1e-8
    h: float = 1e-5

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if not self.h > 0:
            raise ValueError("h must be > 0")

    def with_tol(self, tol: float) -> "SampleSpec":
        return SampleSpec(self.samples, self.seed, tol, self.h)


SYMBOLIC_ZERO = "SymbolicZero"
NUMERIC_ZERO = "NumericZero"
NONZERO = "NonZero"


@dataclass(frozen=True)
class ZeroVerdict:
    tier: str
    residual: float = 0.0
    witness: tuple | None = None

    @property
    def ok(self) -> bool:
        return self.tier in (SYMBOLIC_ZERO, NUMERIC_ZERO)

    def __bool__(self):
        return self.ok


def sample_points(chart: Chart, spec: SampleSpec, exprs: Sequence[Expr] = (), retries: int = 20):
    """Sample points, redrawing those where ``exprs`` fail to evaluate.

    Returns ``(points, values)`` with ``values`` of shape ``(N, len(exprs))``.
    """
    pts = chart.sample(spec.samples, spec.seed)
    if not exprs:
        return pts, np.zeros((len(pts), 0))
    for attempt in range(retries + 1):
        try:
            return pts, evaluate_many(list(exprs), pts)
        except EvaluationError as err:
            if attempt == retries or err.bad_rows is None:
                raise
            fresh = chart.sample(len(err.bad_rows), spec.seed + 7919 * (attempt + 1))
            pts = pts.copy()
            pts[err.bad_rows] = fresh
    raise AssertionError("unreachable")


def is_zero_many(exprs: Sequence[Expr], chart: Chart, spec: SampleSpec = SampleSpec()) -> ZeroVerdict:
    """Three-tier zero test of a finite family of expressions."""
    exprs = [as_expr(e) for e in exprs]
    simple = [simplify(e) for e in exprs]
    if all(isinstance(s, Const) and s.value == 0 for s in simple):
        return ZeroVerdict(SYMBOLIC_ZERO, 0.0, None)
    pts, vals = sample_points(chart, spec, simple)
    mags = np.abs(vals).max(axis=1) if vals.size else np.zeros(len(pts))
    worst = int(np.argmax(mags)) if len(mags) else 0
    residual = float(mags[worst]) if len(mags) else 0.0
    if residual <= spec.tol:
        return ZeroVerdict(NUMERIC_ZERO, residual, None)
    return ZeroVerdict(NONZERO, residual, tuple(float(v) for v in pts[worst]))


def is_zero(e: Expr, chart: Chart, spec: SampleSpec = SampleSpec()) -> ZeroVerdict:
    return is_zero_many([e], chart, spec)
