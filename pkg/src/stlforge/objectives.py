"""Training objectives: discounted performance reward, smooth STL objective, Lagrangian."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .expr import Expr, compile_expr
from .plant import DynamicsSpec, simulate
from .policy import Squash, param_count
from .semantics import SmoothParams, stl2cbf
from .stl import StlAst


@dataclass
class Problem:
    """Everything needed to map a parameter vector ``[theta, zeta]`` to objective values."""

    dynamics: DynamicsSpec
    layer_dims: list[int]
    squash: list[Squash]
    horizon: int
    reward: Expr
    gamma: float
    formula: StlAst | None
    zeta: SmoothParams = field(default_factory=SmoothParams)

    def __post_init__(self):
        if self.layer_dims[0] != self.dynamics.n + 1:
            raise ValueError(f"controller input size {self.layer_dims[0]} != {self.dynamics.n} states + time")
        if self.layer_dims[-1] != self.dynamics.m:
            raise ValueError(f"controller output size {self.layer_dims[-1]} != {self.dynamics.m} controls")
        if len(self.squash) != self.dynamics.m:
            raise ValueError("one squash descriptor per control is required")
        if self.formula is not None:
            self.zeta.check_bound(self.formula)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("discount must lie in [0, 1]")

    @property
    def n_theta(self) -> int:
        return param_count(self.layer_dims)

    @property
    def n_params(self) -> int:
        return self.n_theta + self.zeta.size()

    def split(self, p):
        n = self.n_theta
        return p[:n], self.zeta.with_vector(p[n:])

    def pack(self, theta_vec, zeta: SmoothParams) -> np.ndarray:
        return np.concatenate([np.asarray(theta_vec, dtype=float), zeta.to_vector()])

    def signal(self, p, x0, delta, ops=ad.OPS):
        theta, _ = self.split(p)
        states, _ = simulate(self.dynamics, self.layer_dims, self.squash, theta, list(x0), list(delta),
                             self.horizon, ops)
        return [dict(zip(self.dynamics.states, x), t=k) for k, x in enumerate(states)]


def perf_reward(signal, reward, gamma: float, ops=ad.OPS):
    """``sum_k gamma^k q(x_k)`` over the whole signal (k = 0..H)."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("discount must lie in [0, 1]")
    q = compile_expr(reward, ops) if not callable(reward) else reward
    return ops.total([gamma ** k * q(env) for k, env in enumerate(signal)])


def objectives(problem: Problem, p, x0, delta, ops=ad.OPS):
    """``(J, Gamma)`` for one initial state and model perturbation."""
    sig = problem.signal(p, x0, delta, ops)
    J = perf_reward(sig, problem.reward, problem.gamma, ops)
    if problem.formula is None:
        return J, float("inf")
    _, zeta = problem.split(p)
    return J, stl2cbf(problem.formula, sig, zeta, ops=ops)


def stl_objective(problem: Problem, x0, delta, p, ops=ad.OPS):
    """Smooth robustness of the closed-loop trajectory from ``x0`` under ``delta``."""
    return objectives(problem, p, x0, delta, ops)[1]


def lagrangian_objective(problem: Problem, batch, delta, p, weights, ops=ad.OPS):
    """``sum_{x0 in batch} J(x0) + w_{x0} Gamma(x0)`` with non-negative multipliers."""
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (len(batch),))
    if np.any(weights < 0):
        raise ValueError("Lagrange multipliers must be non-negative")
    terms = []
    for x0, w in zip(batch, weights):
        J, G = objectives(problem, p, x0, delta, ops)
        terms.append(J + float(w) * G if w != 0.0 else J)
    return ops.total(terms)
