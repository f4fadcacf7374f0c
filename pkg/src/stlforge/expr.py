"""Arithmetic expressions over named state variables.

Expressions are small immutable trees. They serve as STL predicate bodies,
dynamics updates and reward functions, so they compile to closures that run
on any backend namespace (floats, tape Scalars, JAX arrays).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

from .errors import DomainError, NonConstantExponentError, ParseError, UnknownVariableError

TIME = "t"
UNARY_OPS = ("neg", "exp", "ln", "sqrt", "sin", "cos", "tan", "tanh", "sigmoid")
FUNCTIONS = ("exp", "ln", "sqrt", "sin", "cos", "tan", "tanh", "sigmoid")
BINARY_OPS = ("+", "-", "*", "/", "^")
NAMED_CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Binary]


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, Unary):
        return variables(e.child)
    return variables(e.left) | variables(e.right)


def count_nodes(e: Expr) -> int:
    if isinstance(e, (Var, Const)):
        return 1
    if isinstance(e, Unary):
        return 1 + count_nodes(e.child)
    return 1 + count_nodes(e.left) + count_nodes(e.right)


# --------------------------------------------------------------------------
# tokenizer (shared with the STL parser)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<op>&&|\|\||>=|<=|[-+*/^()\[\],<>])
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "num" | "op" | "id" | "end"
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class TokenStream:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def peek(self) -> Token:
        return self.tokens[self.i]

    def lookahead(self, k: int) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "end":
            self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.peek.text == text and self.peek.kind != "end":
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek
        if tok.text != text or tok.kind == "end":
            found = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", self.text, tok.pos)
        return self.next()

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek
        return ParseError(message, self.text, tok.pos)


# --------------------------------------------------------------------------
# parser

class ExprParser:
    """Recursive-descent parser; precedence ``^`` > unary minus > ``* /`` > ``+ -``."""

    def __init__(self, stream: TokenStream, names: Sequence[str], defs: Mapping[str, Expr] | None = None):
        self.s = stream
        self.names = set(names) | {TIME}
        self.defs = dict(defs or {})

    def parse_sum(self) -> Expr:
        left = self.parse_product()
        while self.s.peek.text in ("+", "-") and self.s.peek.kind == "op":
            op = self.s.next().text
            left = Binary(op, left, self.parse_product())
        return left

    def parse_product(self) -> Expr:
        left = self.parse_unary()
        while self.s.peek.text in ("*", "/") and self.s.peek.kind == "op":
            op = self.s.next().text
            left = Binary(op, left, self.parse_unary())
        return left

    def parse_unary(self) -> Expr:
        if self.s.accept("-"):
            return Unary("neg", self.parse_unary())
        if self.s.accept("+"):
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        while self.s.peek.text == "^":
            tok = self.s.next()
            exponent = self.parse_exponent()
            if variables(exponent):
                raise NonConstantExponentError("exponent must be a constant", self.s.text, tok.pos)
            try:
                value = evaluate(exponent, {})
            except DomainError as exc:
                raise self.s.error(f"bad exponent: {exc}", tok) from exc
            base = Binary("^", base, Const(value))
        return base

    def parse_exponent(self) -> Expr:
        if self.s.accept("-"):
            return Unary("neg", self.parse_exponent())
        if self.s.accept("+"):
            return self.parse_exponent()
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        tok = self.s.peek
        if tok.kind == "num":
            self.s.next()
            return Const(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.s.next()
            inner = self.parse_sum()
            self.s.expect(")")
            return inner
        if tok.kind == "id":
            self.s.next()
            if tok.text in FUNCTIONS and self.s.peek.text == "(":
                self.s.next()
                arg = self.parse_sum()
                self.s.expect(")")
                return Unary(tok.text, arg)
            if tok.text in self.defs:
                return self.defs[tok.text]
            if tok.text in self.names:
                return Var(tok.text)
            if tok.text in NAMED_CONSTANTS:
                return Const(NAMED_CONSTANTS[tok.text])
            raise UnknownVariableError(f"unknown variable {tok.text!r}", self.s.text, tok.pos)
        found = tok.text or "end of input"
        raise self.s.error(f"unexpected {found!r} in expression")


def parse_expr(text: str, vars: Sequence[str], defs: Mapping[str, Expr] | None = None) -> Expr:
    """Parse ``text`` into an :data:`Expr`, resolving names against ``vars``.

    ``defs`` maps extra identifiers to already-parsed expressions that are
    inlined where referenced (named barrier / reward definitions).
    """
    stream = TokenStream(text)
    expr = ExprParser(stream, vars, defs).parse_sum()
    if stream.peek.kind != "end":
        raise stream.error(f"unexpected {stream.peek.text!r} after expression")
    return expr


# --------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt_const(v: float) -> str:
    if v == math.inf or v != v:
        raise ValueError(f"cannot print constant {v!r}")
    return repr(float(v))


def to_text(e: Expr) -> str:
    """Render an expression so that ``parse_expr(to_text(e))`` rebuilds ``e``."""
    return _render(e)[0]


def _render(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        if math.copysign(1.0, e.value) < 0:
            # re-parses as neg(|c|), which prints identically
            return f"-{_fmt_const(-e.value)}", _PREC["neg"]
        return _fmt_const(e.value), 5
    if isinstance(e, Var):
        return e.name, 5
    if isinstance(e, Unary):
        if e.op == "neg":
            inner, p = _render(e.child)
            if p < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}", _PREC["neg"]
        return f"{e.op}({_render(e.child)[0]})", 5
    op = e.op
    prec = _PREC[op]
    left, lp = _render(e.left)
    right, rp = _render(e.right)
    if op == "^":
        if lp <= prec:
            left = f"({left})"
        if rp <= prec:
            right = f"({right})"
        return f"{left}^{right}", prec
    if lp < prec:
        left = f"({left})"
    if rp <= prec:
        right = f"({right})"
    return f"{left} {op} {right}", prec


# --------------------------------------------------------------------------
# evaluation

def compile_expr(e: Expr, ops=None) -> Callable[[Mapping[str, object]], object]:
    """Compile ``e`` into ``f(env)`` using the math functions of ``ops``."""
    if ops is None:
        from .autodiff import OPS as ops
    return _compile(e, ops)


def _compile(e: Expr, ops):
    if isinstance(e, Const):
        v = e.value
        return lambda env: v
    if isinstance(e, Var):
        name = e.name
        return lambda env: env[name]
    if isinstance(e, Unary):
        child = _compile(e.child, ops)
        if e.op == "neg":
            return lambda env: -child(env)
        fn = getattr(ops, "log" if e.op == "ln" else e.op)
        return lambda env: fn(child(env))
    left = _compile(e.left, ops)
    if e.op == "^":
        c = e.right.value
        if c == 2.0:
            return lambda env: _square(left(env))
        pw = ops.binary("^")
        return lambda env: pw(left(env), c)
    right = _compile(e.right, ops)
    fn = ops.binary(e.op)
    return lambda env: fn(left(env), right(env))


def _square(v):
    return v * v


def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    """Evaluate numerically; raises :class:`DomainError` on ln/sqrt/division faults."""
    from .autodiff import OPS, value_of

    missing = variables(e) - set(env)
    if missing:
        raise KeyError(f"unbound variables: {sorted(missing)}")
    return value_of(compile_expr(e, OPS)(env))


eval_expr = evaluate
