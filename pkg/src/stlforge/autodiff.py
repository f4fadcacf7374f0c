"""Reverse-mode scalar automatic differentiation on an append-only tape.

Every node stores its value and the local partial derivatives with respect to
its operands, computed eagerly when the node is created. ``backward`` walks the
tape once in reverse and accumulates adjoints.

The module-level math functions (``exp``, ``log``, ...) accept plain floats as
well as :class:`Scalar` values, so the same model code runs numerically or on a
tape. :data:`OPS` bundles them into the backend namespace consumed by the
expression, semantics, policy and plant modules.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, TapeError


class Tape:
    __slots__ = ("values", "parents", "partials", "inputs")

    def __init__(self):
        self.values: list[float] = []
        self.parents: list[tuple[int, ...]] = []
        self.partials: list[tuple[float, ...]] = []
        self.inputs: list[int] = []

    def __len__(self):
        return len(self.values)

    def push(self, value, parents=(), partials=()):
        self.values.append(value)
        self.parents.append(parents)
        self.partials.append(partials)
        return Scalar(self, len(self.values) - 1)

    def input(self, value) -> "Scalar":
        s = self.push(float(value))
        self.inputs.append(s.index)
        return s

    def inputs_from(self, values) -> list["Scalar"]:
        return [self.input(v) for v in values]

    def const(self, value) -> "Scalar":
        return self.push(float(value))


def lift(value, tape: Tape) -> "Scalar":
    """Place a constant on ``tape`` (not marked as an input)."""
    if isinstance(value, Scalar):
        if value.tape is not tape:
            raise TapeError("scalar belongs to a different tape")
        return value
    return tape.const(value)


def _other(a: "Scalar", b) -> "Scalar":
    if isinstance(b, Scalar):
        if b.tape is not a.tape:
            raise TapeError("operands live on different tapes")
        return b
    return a.tape.const(b)


class Scalar:
    __slots__ = ("tape", "index")

    def __init__(self, tape: Tape, index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> float:
        return self.tape.values[self.index]

    def __repr__(self):
        return f"Scalar({self.value!r}, node={self.index})"

    def __float__(self):
        return float(self.value)

    def __add__(self, other):
        o = _other(self, other)
        return self.tape.push(self.value + o.value, (self.index, o.index), (1.0, 1.0))

    __radd__ = __add__

    def __sub__(self, other):
        o = _other(self, other)
        return self.tape.push(self.value - o.value, (self.index, o.index), (1.0, -1.0))

    def __rsub__(self, other):
        return _other(self, other) - self

    def __mul__(self, other):
        o = _other(self, other)
        return self.tape.push(self.value * o.value, (self.index, o.index), (o.value, self.value))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _other(self, other)
        if o.value == 0.0:
            raise DomainError("division by zero")
        inv = 1.0 / o.value
        q = self.value * inv
        return self.tape.push(q, (self.index, o.index), (inv, -q * inv))

    def __rtruediv__(self, other):
        return _other(self, other) / self

    def __neg__(self):
        return self.tape.push(-self.value, (self.index,), (-1.0,))

    def __pos__(self):
        return self

    def __pow__(self, exponent):
        if isinstance(exponent, Scalar):
            raise TapeError("pow requires a constant exponent")
        c = float(exponent)
        val = _fpow(self.value, c)
        if c == 0.0:
            d = 0.0
        elif c == 1.0:
            d = 1.0
        else:
            d = c * _fpow(self.value, c - 1.0) if self.value != 0.0 or c > 1.0 else math.inf
        return self.tape.push(val, (self.index,), (d,))

    # comparisons use values only; they never enter the graph
    def __lt__(self, other):
        return self.value < float(other)

    def __le__(self, other):
        return self.value <= float(other)

    def __gt__(self, other):
        return self.value > float(other)

    def __ge__(self, other):
        return self.value >= float(other)


def _fpow(x: float, c: float) -> float:
    try:
        return math.pow(x, c)
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"pow({x!r}, {c!r}) undefined") from exc
    except OverflowError as exc:
        raise DomainError(f"pow({x!r}, {c!r}) overflows") from exc


def _unary(name: str, f: Callable[[float], float], df: Callable[[float, float], float]):
    def op(x):
        if isinstance(x, Scalar):
            v = f(x.value)
            return x.tape.push(v, (x.index,), (df(x.value, v),))
        return f(float(x))

    op.__name__ = name
    return op


def _exp(x):
    try:
        return math.exp(x)
    except OverflowError as exc:
        raise DomainError(f"exp({x!r}) overflows") from exc


def _log(x):
    if x <= 0.0:
        raise DomainError(f"ln of non-positive argument {x!r}")
    return math.log(x)


def _sqrt(x):
    if x < 0.0:
        raise DomainError(f"sqrt of negative argument {x!r}")
    return math.sqrt(x)


def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _dsqrt(x, v):
    return 0.5 / v if v > 0.0 else math.inf


def _dtan(x, v):
    return 1.0 + v * v


exp = _unary("exp", _exp, lambda x, v: v)
log = _unary("log", _log, lambda x, v: 1.0 / x)
sqrt = _unary("sqrt", _sqrt, _dsqrt)
sin = _unary("sin", math.sin, lambda x, v: math.cos(x))
cos = _unary("cos", math.cos, lambda x, v: -math.sin(x))
tan = _unary("tan", math.tan, _dtan)
tanh = _unary("tanh", math.tanh, lambda x, v: 1.0 - v * v)
sigmoid = _unary("sigmoid", _sigmoid, lambda x, v: v * (1.0 - v))


def neg(x):
    return -x


def _binary_op(sym):
    return {
        "+": lambda a, b: a + b,
        "-": lambda a, b: a - b,
        "*": lambda a, b: a * b,
        "/": _div,
        "^": _pow,
    }[sym]


def _div(a, b):
    if not isinstance(a, Scalar) and not isinstance(b, Scalar):
        if b == 0.0:
            raise DomainError("division by zero")
        return a / b
    return a / b


def _pow(a, c):
    if isinstance(c, Scalar):
        raise TapeError("pow requires a constant exponent")
    if isinstance(a, Scalar):
        return a ** c
    return _fpow(float(a), float(c))


UNARY = {
    "neg": neg,
    "exp": exp,
    "ln": log,
    "sqrt": sqrt,
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "tanh": tanh,
    "sigmoid": sigmoid,
}


def apply(op: str, *operands):
    """Apply a named primitive; binary ops use their symbol (``+ - * / ^``)."""
    if op in UNARY:
        if len(operands) != 1:
            raise TypeError(f"{op} takes one operand")
        return UNARY[op](operands[0])
    if len(operands) != 2:
        raise TypeError(f"{op} takes two operands")
    a, b = operands
    if isinstance(a, Scalar) and isinstance(b, Scalar) and a.tape is not b.tape:
        raise TapeError("operands live on different tapes")
    return _binary_op(op)(a, b)


def value_of(x) -> float:
    return x.value if isinstance(x, Scalar) else float(x)


def backward(root) -> dict[int, float]:
    """Adjoints of every marked input of ``root``'s tape, keyed by node index."""
    if not isinstance(root, Scalar):
        raise TapeError("backward needs a Scalar root")
    tape = root.tape
    adj = [0.0] * (root.index + 1)
    adj[root.index] = 1.0
    parents, partials = tape.parents, tape.partials
    for i in range(root.index, -1, -1):
        g = adj[i]
        if g == 0.0:
            continue
        for p, d in zip(parents[i], partials[i]):
            adj[p] += g * d
    return {i: (adj[i] if i <= root.index else 0.0) for i in tape.inputs}


def grad(root, wrt: Sequence[Scalar]) -> np.ndarray:
    """Gradient of ``root`` with respect to the listed input scalars."""
    if not isinstance(root, Scalar):
        return np.zeros(len(wrt))
    adj = backward(root)
    return np.array([adj.get(s.index, 0.0) for s in wrt])


def check_gradient(builder: Callable, at, h: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``builder`` receives a list of inputs (Scalars or floats) and returns a
    scalar. The relative error uses ``max(1, |analytic|)`` as denominator.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    at = [float(v) for v in at]
    tape = Tape()
    xs = tape.inputs_from(at)
    analytic = grad(builder(xs), xs)
    worst = 0.0
    for i in range(len(at)):
        up = list(at)
        dn = list(at)
        up[i] += h
        dn[i] -= h
        fd = (value_of(builder(up)) - value_of(builder(dn))) / (2.0 * h)
        err = abs(analytic[i] - fd) / max(1.0, abs(analytic[i]))
        worst = max(worst, err)
    return worst


class ScalarOps:
    """Backend namespace for plain floats and tape Scalars."""

    name = "scalar"
    exp = staticmethod(exp)
    log = staticmethod(log)
    sqrt = staticmethod(sqrt)
    sin = staticmethod(sin)
    cos = staticmethod(cos)
    tan = staticmethod(tan)
    tanh = staticmethod(tanh)
    sigmoid = staticmethod(sigmoid)
    unary = UNARY

    @staticmethod
    def binary(sym):
        return _binary_op(sym)

    @staticmethod
    def detached_min(values):
        return min(value_of(v) for v in values)

    @staticmethod
    def detached_max(values):
        return max(value_of(v) for v in values)

    @staticmethod
    def hard_min(values):
        return min(value_of(v) for v in values)

    @staticmethod
    def hard_max(values):
        return max(value_of(v) for v in values)

    @staticmethod
    def total(values):
        it = iter(values)
        acc = next(it)
        for v in it:
            acc = acc + v
        return acc

    @staticmethod
    def affine(flat, offset, n_out, n_in, x):
        """``W x + b`` with ``W`` (row-major) then ``b`` read from ``flat[offset:]``."""
        out = []
        boff = offset + n_out * n_in
        for r in range(n_out):
            acc = flat[boff + r]
            row = offset + r * n_in
            for c in range(n_in):
                acc = acc + flat[row + c] * x[c]
            out.append(acc)
        return out

    @staticmethod
    def where_small(x, threshold, small_fn, large_fn):
        """``small_fn()`` when ``|x| < threshold`` else ``large_fn(x)``."""
        if abs(value_of(x)) < threshold:
            return small_fn()
        return large_fn(x)


OPS = ScalarOps()
