"""Parsing and evaluation of one-variable real expressions.

Grammar (closed, no user-defined functions)::

    sum    := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | 't' | 'pi' | 'e'
            | FUNC '(' sum (',' sum)* ')'
            | '(' sum ')'

``^`` binds tightest, then unary minus, then ``* /``, then ``+ -``.
Functions: sin cos tan exp log sqrt abs (one argument), min max (two or
more).  There is no implicit multiplication: ``2t`` is a syntax error.

Expressions are immutable after parsing; evaluation is side-effect free and
follows IEEE-754 double semantics.  Evaluating outside the real domain
(log of a non-positive value, division by zero, sqrt of a negative, a
negative base with a non-integer exponent, or any non-finite result) raises
:class:`~exactquad.errors.EvalDomainError` naming the offending
subexpression.  Syntax errors carry 0-based byte offsets.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import EvalDomainError, SyntaxParseError, UnknownIdentifierError

__all__ = ["Expression", "parse", "evaluate", "continuity_probe"]

_UNARY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "abs": np.abs,
}
_VARIADIC_FUNCS = {"min", "max"}
_CONSTANTS = {"pi": np.pi, "e": np.e}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad = pos + (len(text[pos:]) - len(stripped))
            raise SyntaxParseError(
                f"unexpected character {stripped[0]!r}", _byte_offset(text, bad)
            )
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok if tok is not None else self.peek()
        raise SyntaxParseError(message, _byte_offset(self.text, tok[2]))

    def expect_op(self, op):
        kind, val, _ = self.peek()
        if kind != "op" or val != op:
            self.fail(f"expected '{op}'")
        return self.advance()

    def parse(self):
        node = self.sum()
        kind, val, _ = self.peek()
        if kind != "end":
            self.fail(f"unexpected token {val!r}")
        return node

    def sum(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = ("bin", val, node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                node = ("bin", val, node, self.unary())
            else:
                return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            return ("bin", "^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.advance()
            return ("num", float(val))
        if kind == "ident":
            self.advance()
            if val == "t":
                return ("t",)
            if val in _CONSTANTS:
                return ("const", val)
            if val in _UNARY_FUNCS or val in _VARIADIC_FUNCS or val in ("log", "sqrt"):
                self.expect_op("(")
                args = [self.sum()]
                while True:
                    k, v, _ = self.peek()
                    if k == "op" and v == ",":
                        self.advance()
                        args.append(self.sum())
                    else:
                        break
                self.expect_op(")")
                if val in _VARIADIC_FUNCS:
                    if len(args) < 2:
                        self.fail(f"'{val}' needs at least two arguments",
                                  ("", "", pos))
                elif len(args) != 1:
                    self.fail(f"'{val}' takes exactly one argument", ("", "", pos))
                return ("fn", val, tuple(args))
            raise UnknownIdentifierError(
                f"unknown identifier {val!r}", _byte_offset(self.text, pos)
            )
        if kind == "op" and val == "(":
            self.advance()
            node = self.sum()
            self.expect_op(")")
            return node
        self.fail("expected a value" if kind == "end" else f"unexpected token {val!r}")


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node) -> int:
    tag = node[0]
    if tag == "bin":
        return _PREC[node[1]]
    if tag == "neg":
        return 3
    return 5


def _pretty(node) -> str:
    tag = node[0]
    if tag == "num":
        return repr(node[1])
    if tag == "t":
        return "t"
    if tag == "const":
        return node[1]
    if tag == "neg":
        inner = _pretty(node[1])
        if _prec(node[1]) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    if tag == "bin":
        op, a, b = node[1], node[2], node[3]
        p = _PREC[op]
        left = _pretty(a)
        # parenthesize to reparse into the identical tree, not just an
        # equivalent value
        if _prec(a) < p or (_prec(a) == p and op == "^"):
            left = f"({left})"
        right = _pretty(b)
        if _prec(b) < p or (_prec(b) == p and op != "^"):
            right = f"({right})"
        return f"{left}{op}{right}"
    if tag == "fn":
        return f"{node[1]}({','.join(_pretty(a) for a in node[2])})"
    raise AssertionError(f"bad node {node!r}")


def _compile(node):
    """Build a closure evaluating ``node`` on a float ndarray."""
    tag = node[0]
    if tag == "num":
        v = node[1]
        return lambda t: v
    if tag == "t":
        return lambda t: t
    if tag == "const":
        v = _CONSTANTS[node[1]]
        return lambda t: v
    if tag == "neg":
        f = _compile(node[1])
        return lambda t: -f(t)
    if tag == "bin":
        op, fa, fb = node[1], _compile(node[2]), _compile(node[3])
        if op == "+":
            return lambda t: fa(t) + fb(t)
        if op == "-":
            return lambda t: fa(t) - fb(t)
        if op == "*":
            return lambda t: fa(t) * fb(t)
        if op == "/":
            label = _pretty(node)

            def _div(t):
                den = fb(t)
                if np.any(np.asarray(den) == 0.0):
                    raise EvalDomainError("division by zero", label)
                return fa(t) / den

            return _div
        if op == "^":
            label = _pretty(node)

            def _pow(t):
                base = np.asarray(fa(t), dtype=float)
                expo = np.asarray(fb(t), dtype=float)
                neg = base < 0
                if np.any(neg):
                    e_at = np.broadcast_to(expo, np.broadcast_shapes(base.shape, expo.shape))
                    b_neg = np.broadcast_to(neg, e_at.shape)
                    if np.any(e_at[b_neg] != np.floor(e_at[b_neg])):
                        raise EvalDomainError(
                            "negative base with non-integer exponent", label
                        )
                if np.any((base == 0) & (expo < 0)):
                    raise EvalDomainError("zero raised to a negative power", label)
                return np.power(base, expo)

            return _pow
        raise AssertionError(op)
    if tag == "fn":
        name, args = node[1], node[2]
        if name in _UNARY_FUNCS:
            ufunc, fa = _UNARY_FUNCS[name], _compile(args[0])
            return lambda t: ufunc(fa(t))
        if name == "log":
            fa = _compile(args[0])
            label = _pretty(node)

            def _log(t):
                a = fa(t)
                if np.any(np.asarray(a) <= 0.0):
                    raise EvalDomainError("log of a non-positive value", label)
                return np.log(a)

            return _log
        if name == "sqrt":
            fa = _compile(args[0])
            label = _pretty(node)

            def _sqrt(t):
                a = fa(t)
                if np.any(np.asarray(a) < 0.0):
                    raise EvalDomainError("sqrt of a negative value", label)
                return np.sqrt(a)

            return _sqrt
        fs = [_compile(a) for a in args]
        reducer = np.minimum if name == "min" else np.maximum
        sentinel = np.inf if name == "min" else -np.inf

        def _fold(t):
            out = sentinel
            for f in fs:
                out = reducer(out, f(t))
            return out

        return _fold
    raise AssertionError(f"bad node {node!r}")


def _as_ast(value):
    if isinstance(value, Expression):
        return value.ast
    c = float(value)
    if not np.isfinite(c):
        raise ValueError("expression constants must be finite")
    if c < 0:
        return ("neg", ("num", -c))
    return ("num", c)


class Expression:
    """A parsed function of the scalar variable ``t``.

    Calling an instance evaluates it: scalars in, float out; ndarray in,
    ndarray out.  Arithmetic between expressions (or with plain numbers)
    builds new expressions, so composites like ``(f - c) * g`` stay in the
    same grammar and keep printing/round-tripping.
    """

    __slots__ = ("_ast", "_fn", "_text")

    def __init__(self, ast):
        self._ast = ast
        self._fn = _compile(ast)
        self._text = _pretty(ast)

    @property
    def ast(self):
        return self._ast

    @property
    def text(self) -> str:
        """Canonical source form; reparsing it rebuilds this tree."""
        return self._text

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            out = np.asarray(self._fn(arr), dtype=float)
        if out.shape != arr.shape:
            out = np.broadcast_to(out, arr.shape)
        if not np.all(np.isfinite(out)):
            raise EvalDomainError("non-finite value", self._text)
        if arr.ndim == 0:
            return float(out)
        return np.array(out, dtype=float, copy=True)

    def __repr__(self):
        return f"Expression({self._text!r})"

    def _bin(self, op, other, swap=False):
        try:
            rhs = _as_ast(other)
        except (TypeError, ValueError):
            return NotImplemented
        a, b = (rhs, self._ast) if swap else (self._ast, rhs)
        return Expression(("bin", op, a, b))

    def __add__(self, other):
        return self._bin("+", other)

    __radd__ = __add__

    def __sub__(self, other):
        return self._bin("-", other)

    def __rsub__(self, other):
        return self._bin("-", other, swap=True)

    def __mul__(self, other):
        return self._bin("*", other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._bin("/", other)

    def __rtruediv__(self, other):
        return self._bin("/", other, swap=True)

    def __pow__(self, other):
        return self._bin("^", other)

    def __neg__(self):
        return Expression(("neg", self._ast))


def parse(text: str) -> Expression:
    """Parse ``text`` into an :class:`Expression`.

    Raises :class:`SyntaxParseError` (with a 0-based byte offset) on
    malformed input and :class:`UnknownIdentifierError` for names outside
    the grammar.
    """
    if not text or not text.strip():
        raise SyntaxParseError("empty expression", 0)
    return Expression(_Parser(text).parse())


def evaluate(e: Expression, t: float) -> float:
    """Evaluate ``e`` at the scalar ``t``."""
    return e(float(t))


def continuity_probe(e: Expression, lower: float, upper: float, points: int = 1024):
    """Evaluate ``e`` at Chebyshev-spaced points of ``[lower, upper]``.

    Raises :class:`EvalDomainError` if any probe fails; returns the probe
    values otherwise.  Guards the continuity hypothesis before an
    expression is used as a quadrature input.
    """
    j = np.arange(points, dtype=float)
    x = 0.5 * (lower + upper) + 0.5 * (upper - lower) * np.cos(np.pi * j / (points - 1))
    return e(x)
