"""Recursive-descent parser for the expression grammar.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = ("-" | "+") unary | power ;
    power   = primary [ ("^" | "**") unary ] ;
    primary = number | name | func "(" expr ")" | "(" expr ")" ;
    func    = "sin" | "cos" | "exp" ;

Exponents must fold to integer constants.  Numeric literals are read as exact
rationals (``0.1`` is 1/10).
"""

from __future__ import annotations

import re
from fractions import Fraction

from . import expr as E

__all__ = ["ParseError", "ExprSyntaxError", "UnknownIdentifierError", "parse"]


class ParseError(ValueError):
    """Base class for expression parse failures; ``offset`` is a byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExprSyntaxError(ParseError):
    pass


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^()]))"
)


def _tokens(text: str):
    pos = 0
    out = []
    while True:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", len(text[:bad].encode()))
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), len(text[:start].encode())))
        pos = m.end()
    out.append(("end", "", len(text.encode())))
    return out


class _Parser:
    def __init__(self, text: str, chart):
        self.toks = _tokens(text)
        self.i = 0
        self.index = {name: k for k, name in enumerate(chart.names)}
        self.chart = chart

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, off = self.take()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", off)

    def parse(self):
        e = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", off)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return -self.unary()
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        kind, text, off = self.peek()
        if kind == "op" and text in ("^", "**"):
            self.take()
            exponent = E.simplify(self.unary())
            if not isinstance(exponent, E.Const) or Fraction(exponent.value).denominator != 1:
                raise ExprSyntaxError("exponent must be an integer constant", off)
            try:
                return E.power(base, int(exponent.value))
            except ZeroDivisionError as err:
                raise ExprSyntaxError(str(err), off) from None
        return base

    def primary(self):
        kind, text, off = self.take()
        if kind == "num":
            return E.Const(Fraction(text))
        if kind == "name":
            if text in ("sin", "cos", "exp"):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return E.func(text, arg)
            if text not in self.index:
                raise UnknownIdentifierError(text, off)
            k = self.index[text]
            return E.Var(k, text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"expected a number, name or '(', found {found}", off)


def parse(text: str, chart) -> E.Expr:
    """Parse ``text`` against the coordinate names of ``chart``."""
    try:
        return _Parser(text, chart).parse()
    except ZeroDivisionError as err:
        raise ExprSyntaxError(str(err), 0) from None
