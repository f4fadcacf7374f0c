"""Boolean, hard-quantitative and smooth (barrier) semantics of STL formulas.

A *signal* is a sequence of environments, one per time step, mapping state
names to values (floats, tape Scalars or JAX arrays). The smooth semantics
replaces min by a log-sum-exp soft minimum and max by learnable convex
combinations, which keeps it a lower bound of the hard robustness.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .errors import DomainError, IntervalError, SpecError
from .expr import TIME, compile_expr
from .stl import (Always, And, Eventually, Or, Pred, StlAst, Until, depth, disjunctive_nodes, walk,
                  weight_count)

WTAVG_FORMS = ("squared", "softmax")


def with_time(states: Sequence[Mapping]) -> list[dict]:
    """Attach the time index ``t`` to each environment of a signal."""
    return [dict(env, **{TIME: k}) for k, env in enumerate(states)]


def _check_length(phi: StlAst, signal: Sequence, t: int) -> None:
    need = t + depth(phi)
    if need >= len(signal):
        raise IntervalError(f"formula needs samples up to t={need}, trajectory has {len(signal)}")


def _compiled_preds(phi: StlAst, ops) -> dict[int, object]:
    return {id(n): compile_expr(n.h, ops) for n in walk(phi) if isinstance(n, Pred)}


# --------------------------------------------------------------------------
# Boolean semantics

def bool_sat(phi: StlAst, signal: Sequence[Mapping], t: int = 0) -> bool:
    _check_length(phi, signal, t)
    preds = _compiled_preds(phi, ad.OPS)
    memo: dict = {}

    def sat(node, k):
        key = (id(node), k)
        if key in memo:
            return memo[key]
        if isinstance(node, Pred):
            r = ad.value_of(preds[id(node)](signal[k])) >= 0.0
        elif isinstance(node, And):
            r = sat(node.left, k) and sat(node.right, k)
        elif isinstance(node, Or):
            r = sat(node.left, k) or sat(node.right, k)
        elif isinstance(node, Always):
            r = all(sat(node.child, k + i) for i in range(node.a, node.b + 1))
        elif isinstance(node, Eventually):
            r = any(sat(node.child, k + i) for i in range(node.a, node.b + 1))
        else:
            r = any(sat(node.right, k + i) and all(sat(node.left, k + j) for j in range(i))
                    for i in range(node.a, node.b + 1))
        memo[key] = r
        return r

    return sat(phi, t)


# --------------------------------------------------------------------------
# hard robustness

def hard_robustness(phi: StlAst, signal: Sequence[Mapping], t: int = 0, ops=ad.OPS):
    _check_length(phi, signal, t)
    preds = _compiled_preds(phi, ops)
    lo, hi = ops.hard_min, ops.hard_max
    memo: dict = {}

    def rob(node, k):
        key = (id(node), k)
        if key in memo:
            return memo[key]
        if isinstance(node, Pred):
            r = preds[id(node)](signal[k])
        elif isinstance(node, And):
            r = lo([rob(node.left, k), rob(node.right, k)])
        elif isinstance(node, Or):
            r = hi([rob(node.left, k), rob(node.right, k)])
        elif isinstance(node, Always):
            r = lo([rob(node.child, k + i) for i in range(node.a, node.b + 1)])
        elif isinstance(node, Eventually):
            r = hi([rob(node.child, k + i) for i in range(node.a, node.b + 1)])
        else:
            terms = []
            for i in range(node.a, node.b + 1):
                parts = [rob(node.right, k + i)] + [rob(node.left, k + j) for j in range(i)]
                terms.append(lo(parts))
            r = hi(terms)
        memo[key] = r
        return r

    return rob(phi, t)


# --------------------------------------------------------------------------
# smooth semantics

def softmin(values: Sequence, eta, ops=ad.OPS):
    """``-(1/eta) ln sum exp(-eta v)``, shifted by the minimum for stability."""
    if len(values) == 0:
        raise ValueError("softmin of an empty list")
    m = ops.detached_min(values)
    s = ops.total([ops.exp(-eta * (v - m)) for v in values])
    return m - ops.log(s) / eta


def weighted_average(values: Sequence, betas: Sequence, form: str = "squared", ops=ad.OPS):
    """Convex combination of ``values`` with weights derived from ``betas``.

    ``squared``: weights ``b_i^2 / sum b_j^2``; ``softmax``: ``exp(b_i) / sum exp(b_j)``.
    """
    if len(values) == 0 or len(values) != len(betas):
        raise ValueError(f"need equally long non-empty lists, got {len(values)} values and {len(betas)} weights")
    if form == "squared":
        raw = [b * b for b in betas]
        s = ops.total(raw)
        if ops.name != "jax" and ad.value_of(s) == 0.0:
            raise DomainError("degenerate weights: all betas are zero")
    elif form == "softmax":
        bm = ops.detached_max(betas)
        raw = [ops.exp(b - bm) for b in betas]
        s = ops.total(raw)
    else:
        raise ValueError(f"unknown weighted-average form {form!r}")
    # shifting by the (constant) minimum keeps the result exactly inside [min, max]
    # when all values coincide and is analytically identical otherwise
    m = ops.detached_min(values)
    return m + ops.total([w * (v - m) for w, v in zip(raw, values)]) / s


@dataclass
class SmoothParams:
    """Smoothing variables: ``lam`` (eta = lam^2 + 1) and per-node weight vectors."""

    lam: object = 1.0
    betas: dict = field(default_factory=dict)
    form: str = "squared"

    @property
    def eta(self):
        return self.lam * self.lam + 1.0

    def size(self) -> int:
        return 1 + sum(len(v) for v in self.betas.values())

    def to_vector(self) -> np.ndarray:
        flat = [ad.value_of(self.lam)]
        for nid in sorted(self.betas):
            flat.extend(ad.value_of(b) for b in self.betas[nid])
        return np.array(flat, dtype=float)

    def with_vector(self, vec) -> "SmoothParams":
        """Same layout, values taken from ``vec`` (floats, Scalars or array entries)."""
        vec = list(vec) if not hasattr(vec, "shape") else vec
        i = 1
        betas = {}
        for nid in sorted(self.betas):
            k = len(self.betas[nid])
            betas[nid] = [vec[i + j] for j in range(k)]
            i += k
        if i != len(vec):
            raise ValueError(f"vector has {len(vec)} entries, layout needs {i}")
        return SmoothParams(vec[0], betas, self.form)

    def check_bound(self, phi: StlAst) -> None:
        want = {n.node_id: weight_count(n) for n in disjunctive_nodes(phi)}
        have = {nid: len(v) for nid, v in self.betas.items()}
        if want != have:
            raise SpecError(f"smoothing weights {have} do not match formula nodes {want}")

    def weight_report(self) -> dict[int, list[float]]:
        """Normalised weights per disjunctive node."""
        out = {}
        for nid, bs in sorted(self.betas.items()):
            b = np.array([ad.value_of(x) for x in bs], dtype=float)
            if self.form == "squared":
                w = b * b / np.sum(b * b)
            else:
                e = np.exp(b - b.max())
                w = e / e.sum()
            out[nid] = w.tolist()
        return out


def init_smooth_params(phi: StlAst, form: str = "squared", scheme: str = "uniform", seed: int = 0,
                       jitter: float = 0.1) -> SmoothParams:
    """Uniform weights and eta = 2; ``scheme="jitter"`` perturbs the betas deterministically."""
    if form not in WTAVG_FORMS:
        raise ValueError(f"unknown weighted-average form {form!r}")
    base = 1.0 if form == "squared" else 0.0
    rng = np.random.default_rng(seed)
    betas = {}
    for node in sorted(disjunctive_nodes(phi), key=lambda n: n.node_id):
        k = weight_count(node)
        vals = np.full(k, base)
        if scheme == "jitter":
            vals = vals + rng.uniform(-jitter, jitter, size=k)
        elif scheme != "uniform":
            raise ValueError(f"unknown init scheme {scheme!r}")
        betas[node.node_id] = vals.tolist()
    return SmoothParams(1.0, betas, form)


def stl2cbf(phi: StlAst, signal: Sequence[Mapping], zeta: SmoothParams, t: int = 0, ops=ad.OPS):
    """Smooth robustness of ``phi`` on ``signal``; a lower bound of the hard robustness."""
    _check_length(phi, signal, t)
    preds = _compiled_preds(phi, ops)
    eta = zeta.eta
    form = zeta.form
    memo: dict = {}

    def betas_of(node):
        try:
            return zeta.betas[node.node_id]
        except KeyError:
            raise SpecError(f"no smoothing weights bound to node {node.node_id}") from None

    def cbf(node, k):
        key = (id(node), k)
        if key in memo:
            return memo[key]
        if isinstance(node, Pred):
            r = preds[id(node)](signal[k])
        elif isinstance(node, And):
            r = softmin([cbf(node.left, k), cbf(node.right, k)], eta, ops)
        elif isinstance(node, Or):
            r = weighted_average([cbf(node.left, k), cbf(node.right, k)], betas_of(node), form, ops)
        elif isinstance(node, Always):
            r = softmin([cbf(node.child, k + i) for i in range(node.a, node.b + 1)], eta, ops)
        elif isinstance(node, Eventually):
            r = weighted_average([cbf(node.child, k + i) for i in range(node.a, node.b + 1)],
                                 betas_of(node), form, ops)
        else:
            terms = []
            for i in range(node.a, node.b + 1):
                goal = cbf(node.right, k + i)
                if i == 0:
                    terms.append(goal)
                    continue
                hold = softmin([cbf(node.left, k + j) for j in range(i)], eta, ops)
                terms.append(softmin([goal, hold], eta, ops))
            r = weighted_average(terms, betas_of(node), form, ops)
        memo[key] = r
        return r

    return cbf(phi, t)
