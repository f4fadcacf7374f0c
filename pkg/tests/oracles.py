"""Independent reference implementations used as test oracles.

Formulas are generated as nested tuples first; the oracle evaluates those
tuples straight from the textbook semantics (no memoisation, no shared code
with the package), and ``to_ast`` converts them to package ASTs.
"""
import math

import numpy as np

from stlforge.expr import Binary, Const, Var
from stlforge.stl import Always, And, Eventually, Or, Pred, Until, assign_ids

VARS = ("x", "y")


def random_formula(rng, max_depth=3, horizon=10):
    """Random tuple formula whose time depth fits ``horizon``."""

    def go(d, budget):
        if d == 0 or rng.random() < 0.25:
            c = rng.normal(size=3).round(3)
            return ("pred", float(c[0]), float(c[1]), float(c[2]))
        kind = rng.choice(["and", "or", "G", "F", "U"])
        if kind in ("and", "or"):
            return (kind, go(d - 1, budget), go(d - 1, budget))
        b = int(rng.integers(0, budget + 1))
        a = int(rng.integers(0, b + 1))
        rest = budget - b
        if kind == "U":
            return ("U", a, b, go(d - 1, rest), go(d - 1, rest))
        return (kind, a, b, go(d - 1, rest))

    return go(max_depth, horizon)


def oracle_rho(f, xs, ys, t=0):
    tag = f[0]
    if tag == "pred":
        return f[1] + f[2] * xs[t] + f[3] * ys[t]
    if tag == "and":
        return min(oracle_rho(f[1], xs, ys, t), oracle_rho(f[2], xs, ys, t))
    if tag == "or":
        return max(oracle_rho(f[1], xs, ys, t), oracle_rho(f[2], xs, ys, t))
    if tag == "G":
        return min(oracle_rho(f[3], xs, ys, t + k) for k in range(f[1], f[2] + 1))
    if tag == "F":
        return max(oracle_rho(f[3], xs, ys, t + k) for k in range(f[1], f[2] + 1))
    # until by enumeration of the switching time k
    best = -math.inf
    for k in range(f[1], f[2] + 1):
        v = oracle_rho(f[4], xs, ys, t + k)
        for j in range(k):
            v = min(v, oracle_rho(f[3], xs, ys, t + j))
        best = max(best, v)
    return best


def oracle_sat(f, xs, ys, t=0):
    tag = f[0]
    if tag == "pred":
        return f[1] + f[2] * xs[t] + f[3] * ys[t] >= 0
    if tag == "and":
        return oracle_sat(f[1], xs, ys, t) and oracle_sat(f[2], xs, ys, t)
    if tag == "or":
        return oracle_sat(f[1], xs, ys, t) or oracle_sat(f[2], xs, ys, t)
    if tag == "G":
        return all(oracle_sat(f[3], xs, ys, t + k) for k in range(f[1], f[2] + 1))
    if tag == "F":
        return any(oracle_sat(f[3], xs, ys, t + k) for k in range(f[1], f[2] + 1))
    return any(oracle_sat(f[4], xs, ys, t + k) and all(oracle_sat(f[3], xs, ys, t + j) for j in range(k))
               for k in range(f[1], f[2] + 1))


def to_ast(f):
    def go(f):
        tag = f[0]
        if tag == "pred":
            h = Binary("+", Binary("+", Const(f[1]), Binary("*", Const(f[2]), Var("x"))),
                       Binary("*", Const(f[3]), Var("y")))
            return Pred(h)
        if tag == "and":
            return And(go(f[1]), go(f[2]))
        if tag == "or":
            return Or(go(f[1]), go(f[2]))
        if tag == "G":
            return Always(f[1], f[2], go(f[3]))
        if tag == "F":
            return Eventually(f[1], f[2], go(f[3]))
        return Until(f[1], f[2], go(f[3]), go(f[4]))

    return assign_ids(go(f))


def random_trace(rng, horizon, scale=2.0):
    xs = rng.normal(scale=scale, size=horizon + 1)
    ys = rng.normal(scale=scale, size=horizon + 1)
    return xs, ys, [{"x": float(a), "y": float(b), "t": k} for k, (a, b) in enumerate(zip(xs, ys))]


def random_zeta(rng, phi, form=None):
    from stlforge.semantics import SmoothParams
    from stlforge.stl import disjunctive_nodes, weight_count

    form = form or rng.choice(["squared", "softmax"])
    betas = {}
    for n in disjunctive_nodes(phi):
        b = rng.normal(size=weight_count(n))
        if form == "squared" and not np.any(b):
            b[0] = 1.0
        betas[n.node_id] = b.tolist()
    return SmoothParams(float(rng.normal(scale=2.0)), betas, str(form))


def nearest_rank_oracle(samples, beta):
    """VaR/CVaR by counting, no sorting tricks."""
    s = sorted(samples)
    n = len(s)
    k = 1
    while k < beta * n - 1e-12:
        k += 1
    var = s[k - 1]
    tail = [v for v in s if v >= var]
    return var, sum(tail) / len(tail)
