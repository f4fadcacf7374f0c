"""STL formula trees and their text syntax.

Grammar (whitespace-insensitive)::

    phi  := phi "||" phi | phi "&&" phi | phi "U[" a "," b "]" phi
          | "G[" a "," b "]" phi | "F[" a "," b "]" phi | "(" phi ")" | pred
    pred := expr (">=" | ">" | "<=" | "<") expr

Binding from loosest to tightest: ``||``, ``&&``, ``U``, prefix ``G``/``F``.
Predicates are stored as ``h >= 0``; ``lhs <= rhs`` becomes ``rhs - lhs >= 0``
(``-lhs`` when ``rhs`` is the literal 0). Disjunctive nodes (``||``, ``F``,
``U``) carry integer ids assigned in pre-order.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence, Union

from .errors import IntervalError, ParseError
from .expr import Binary, Const, Expr, ExprParser, TokenStream, Unary, to_text

CMP = (">=", ">", "<=", "<")


@dataclass(frozen=True)
class Pred:
    h: Expr
    strict: bool = False


@dataclass(frozen=True)
class And:
    left: "StlAst"
    right: "StlAst"


@dataclass(frozen=True)
class Or:
    left: "StlAst"
    right: "StlAst"
    node_id: int = -1


@dataclass(frozen=True)
class Always:
    a: int
    b: int
    child: "StlAst"


@dataclass(frozen=True)
class Eventually:
    a: int
    b: int
    child: "StlAst"
    node_id: int = -1


@dataclass(frozen=True)
class Until:
    a: int
    b: int
    left: "StlAst"
    right: "StlAst"
    node_id: int = -1


StlAst = Union[Pred, And, Or, Always, Eventually, Until]
DISJUNCTIVE = (Or, Eventually, Until)


def children(phi: StlAst) -> tuple:
    if isinstance(phi, Pred):
        return ()
    if isinstance(phi, (Always, Eventually)):
        return (phi.child,)
    return (phi.left, phi.right)


def walk(phi: StlAst) -> Iterator[StlAst]:
    """Pre-order traversal."""
    yield phi
    for c in children(phi):
        yield from walk(c)


def disjunctive_nodes(phi: StlAst) -> list:
    return [n for n in walk(phi) if isinstance(n, DISJUNCTIVE)]


def weight_count(node) -> int:
    """Number of weights a disjunctive node needs."""
    if isinstance(node, Or):
        return 2
    return node.b - node.a + 1


def depth(phi: StlAst) -> int:
    """Largest time offset (sum of interval upper bounds) reached from t=0."""
    if isinstance(phi, Pred):
        return 0
    if isinstance(phi, (And, Or)):
        return max(depth(phi.left), depth(phi.right))
    if isinstance(phi, (Always, Eventually)):
        return phi.b + depth(phi.child)
    # Until at offset k also needs the left operand at j < k
    return phi.b + max(depth(phi.left), depth(phi.right))


def assign_ids(phi: StlAst) -> StlAst:
    counter = iter(range(1 << 30))

    def go(node):
        if isinstance(node, Pred):
            return node
        if isinstance(node, And):
            return And(go(node.left), go(node.right))
        if isinstance(node, Or):
            nid = next(counter)
            return Or(go(node.left), go(node.right), nid)
        if isinstance(node, Always):
            return Always(node.a, node.b, go(node.child))
        if isinstance(node, Eventually):
            nid = next(counter)
            return Eventually(node.a, node.b, go(node.child), nid)
        nid = next(counter)
        left = go(node.left)
        return Until(node.a, node.b, left, go(node.right), nid)

    return go(phi)


def validate_intervals(phi: StlAst, horizon: int) -> None:
    for node in walk(phi):
        if isinstance(node, (Always, Eventually, Until)):
            if node.a > node.b:
                raise IntervalError(f"interval [{node.a},{node.b}] has a > b")
            if node.a < 0 or node.b > horizon:
                raise IntervalError(f"interval [{node.a},{node.b}] outside [0,{horizon}]")


class StlParser:
    def __init__(self, text: str, names: Sequence[str], horizon: int, defs=None):
        self.s = TokenStream(text)
        self.expr = ExprParser(self.s, names, defs)
        self.horizon = horizon

    def parse(self) -> StlAst:
        phi = self.parse_or()
        if self.s.peek.kind != "end":
            raise self.s.error(f"unexpected {self.s.peek.text!r}")
        return phi

    def parse_or(self):
        left = self.parse_and()
        while self.s.accept("||"):
            left = Or(left, self.parse_and())
        return left

    def parse_and(self):
        left = self.parse_until()
        while self.s.accept("&&"):
            left = And(left, self.parse_until())
        return left

    def parse_until(self):
        left = self.parse_prefix()
        while self._at_temporal("U"):
            a, b = self.parse_interval()
            left = Until(a, b, left, self.parse_prefix())
        return left

    def parse_prefix(self):
        for key, cls in (("G", Always), ("F", Eventually)):
            if self._at_temporal(key):
                a, b = self.parse_interval()
                return cls(a, b, self.parse_prefix())
        return self.parse_atom()

    def _at_temporal(self, key: str) -> bool:
        tok = self.s.peek
        return tok.kind == "id" and tok.text == key and self.s.lookahead(1).text == "["

    def parse_interval(self) -> tuple[int, int]:
        self.s.next()
        self.s.expect("[")
        a = self._int()
        self.s.expect(",")
        b = self._int()
        close = self.s.expect("]")
        if a > b:
            raise IntervalError(f"interval [{a},{b}] has a > b (position {close.pos})")
        if b > self.horizon:
            raise IntervalError(f"interval [{a},{b}] exceeds horizon {self.horizon} (position {close.pos})")
        return a, b

    def _int(self) -> int:
        tok = self.s.next()
        if tok.kind != "num" or not tok.text.isdigit():
            raise self.s.error("expected a non-negative integer bound", tok)
        return int(tok.text)

    def parse_atom(self):
        if self.s.peek.text == "(" and self.s.peek.kind == "op":
            mark = self.s.i
            try:
                self.s.next()
                phi = self.parse_or()
                self.s.expect(")")
                return phi
            except ParseError:
                # not a parenthesised formula; retry as a predicate
                self.s.i = mark
        return self.parse_pred()

    def parse_pred(self) -> Pred:
        lhs = self.expr.parse_sum()
        tok = self.s.peek
        if tok.text not in CMP or tok.kind != "op":
            found = tok.text or "end of input"
            raise self.s.error(f"expected comparison, found {found!r}")
        self.s.next()
        rhs = self.expr.parse_sum()
        return make_pred(lhs, tok.text, rhs)


def make_pred(lhs: Expr, relation: str, rhs: Expr) -> Pred:
    zero = rhs == Const(0.0)
    if relation in (">=", ">"):
        h = lhs if zero else Binary("-", lhs, rhs)
    else:
        h = Unary("neg", lhs) if zero else Binary("-", rhs, lhs)
    return Pred(h, strict=relation in (">", "<"))


def parse_stl(text: str, vars: Sequence[str], horizon: int, defs: Mapping[str, Expr] | None = None) -> StlAst:
    """Parse an STL formula; intervals must lie inside ``[0, horizon]``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not text or not text.strip():
        raise ParseError("empty formula")
    phi = StlParser(text, vars, horizon, defs).parse()
    return assign_ids(phi)


def to_text_stl(phi: StlAst) -> str:
    return _render(phi)[0]


# loosest binding gets the lowest number
_LEVEL = {Or: 1, And: 2, Until: 3, Always: 4, Eventually: 4, Pred: 5}


def _render(phi) -> tuple[str, int]:
    level = _LEVEL[type(phi)]
    if isinstance(phi, Pred):
        cmp = ">" if phi.strict else ">="
        return f"{to_text(phi.h)} {cmp} 0", level

    def sub(node, min_level):
        text, lv = _render(node)
        return f"({text})" if lv < min_level else text

    if isinstance(phi, Or):
        return f"{sub(phi.left, 1)} || {sub(phi.right, 2)}", level
    if isinstance(phi, And):
        return f"{sub(phi.left, 2)} && {sub(phi.right, 3)}", level
    if isinstance(phi, Until):
        return f"{sub(phi.left, 3)} U[{phi.a},{phi.b}] {sub(phi.right, 4)}", level
    key = "G" if isinstance(phi, Always) else "F"
    # a bare predicate after G[..] would swallow following operators, so wrap it
    return f"{key}[{phi.a},{phi.b}] {sub(phi.child, 6)}", level


def describe_nodes(phi: StlAst) -> list[dict]:
    """Rows of the node_id <-> subformula table, with flat weight slots."""
    rows = []
    slot = 0
    for node in sorted(disjunctive_nodes(phi), key=lambda n: n.node_id):
        k = weight_count(node)
        rows.append({
            "node_id": node.node_id,
            "kind": type(node).__name__,
            "weights": k,
            "slots": (slot + 1, slot + k),
            "formula": to_text_stl(node),
        })
        slot += k
    return rows


def strip_ids(phi: StlAst) -> StlAst:
    def go(node):
        if isinstance(node, Pred):
            return node
        kw = {}
        for f in dataclasses.fields(node):
            v = getattr(node, f.name)
            if f.name == "node_id":
                v = -1
            elif isinstance(v, (Pred, And, Or, Always, Eventually, Until)):
                v = go(v)
            kw[f.name] = v
        return type(node)(**kw)

    return go(phi)
