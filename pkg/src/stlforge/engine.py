"""Evaluation engines mapping parameter vectors to objective values and gradients.

``TapeEngine`` runs the model code on the scalar tape (reference path).
``JaxEngine`` runs the very same model code under ``jax.jit``/``vmap`` with
``lax.scan`` over time; it is what training and large Monte-Carlo runs use.
Both expose the same methods, so tests can compare them directly.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .objectives import Problem, objectives, perf_reward
from .plant import step
from .policy import forward_flat
from .semantics import hard_robustness, stl2cbf


class TapeEngine:
    name = "tape"

    def __init__(self, problem: Problem):
        self.problem = problem

    def batch_grads(self, p, x0s, delta):
        """Per-sample ``J``, ``Gamma`` and their gradients w.r.t. the full vector ``p``."""
        P = len(p)
        B = len(x0s)
        J = np.empty(B)
        G = np.empty(B)
        gJ = np.zeros((B, P))
        gG = np.zeros((B, P))
        for i, x0 in enumerate(x0s):
            tape = ad.Tape()
            ps = tape.inputs_from(p)
            j, g = objectives(self.problem, ps, [float(v) for v in x0], [float(v) for v in delta])
            J[i], G[i] = ad.value_of(j), ad.value_of(g)
            gJ[i] = ad.grad(j, ps)
            gG[i] = ad.grad(g, ps)
        return J, G, gJ, gG

    def evaluate(self, p, x0s, delta):
        """``J`` and ``Gamma`` for a batch of initial states sharing one ``delta``."""
        p = [float(v) for v in p]
        out = [objectives(self.problem, p, list(map(float, x0)), list(map(float, delta))) for x0 in x0s]
        return np.array([o[0] for o in out], dtype=float), np.array([o[1] for o in out], dtype=float)

    def robustness(self, p, x0s, deltas):
        """Hard robustness for paired ``(x0, delta)`` samples."""
        p = [float(v) for v in p]
        out = np.empty(len(x0s))
        for i, (x0, d) in enumerate(zip(x0s, deltas)):
            sig = self.problem.signal(p, list(map(float, x0)), list(map(float, d)))
            out[i] = hard_robustness(self.problem.formula, sig)
        return out

    def validate(self, p, x0s, deltas):
        """``(J, Gamma, rho)`` for paired ``(x0, delta)`` samples."""
        p = [float(v) for v in p]
        pr = self.problem
        out = np.empty((len(x0s), 3))
        for i, (x0, d) in enumerate(zip(x0s, deltas)):
            x0, d = list(map(float, x0)), list(map(float, d))
            sig = pr.signal(p, x0, d)
            J, G = objectives(pr, p, x0, d)
            out[i] = J, G, hard_robustness(pr.formula, sig) if pr.formula is not None else np.inf
        return out[:, 0], out[:, 1], out[:, 2]

    def lagrangian_grad(self, p, x0s, delta, weights):
        _, _, gJ, gG = self.batch_grads(p, x0s, delta)
        return np.sum(gJ + np.asarray(weights)[:, None] * gG, axis=0)


class JaxEngine:
    name = "jax"

    def __init__(self, problem: Problem):
        from . import jaxops

        self.problem = problem
        self._jax = jaxops
        self._build()

    def _build(self):
        jx = self._jax
        jax, jnp = jx.jax, jx.jnp
        ops = jx.OPS
        pr = self.problem
        dyn = pr.dynamics
        H = pr.horizon

        def signal(p, x0, delta):
            theta, _ = pr.split(p)

            def body(x, k):
                xs = [x[i] for i in range(dyn.n)]
                u = forward_flat(pr.layer_dims, pr.squash, theta, xs, k / H, ops)
                nxt = step(dyn, xs, u, [delta[i] for i in range(len(dyn.uncertainties))], ops)
                nxt = jnp.stack(nxt)
                return nxt, nxt

            _, rest = jax.lax.scan(body, x0, jnp.arange(H, dtype=x0.dtype))
            states = jnp.concatenate([x0[None, :], rest], axis=0)
            return [dict(zip(dyn.states, [states[k, i] for i in range(dyn.n)]), t=k) for k in range(H + 1)]

        def both(p, x0, delta):
            sig = signal(p, x0, delta)
            J = perf_reward(sig, pr.reward, pr.gamma, ops)
            if pr.formula is None:
                G = jnp.inf * jnp.ones_like(J)
            else:
                G = stl2cbf(pr.formula, sig, pr.split(p)[1], ops=ops)
            return jnp.stack([J, G])

        def grads_one(p, x0, delta):
            out, pullback = jax.vjp(lambda q: both(q, x0, delta), p)
            (jac,) = jax.vmap(pullback)(jnp.eye(2, dtype=out.dtype))
            return out, jac

        def rob_one(p, x0, delta):
            return hard_robustness(pr.formula, signal(p, x0, delta), ops=ops)

        def validate_one(p, x0, delta):
            sig = signal(p, x0, delta)
            J = perf_reward(sig, pr.reward, pr.gamma, ops)
            if pr.formula is None:
                inf = jnp.inf * jnp.ones_like(J)
                return jnp.stack([J, inf, inf])
            G = stl2cbf(pr.formula, sig, pr.split(p)[1], ops=ops)
            return jnp.stack([J, G, hard_robustness(pr.formula, sig, ops=ops)])

        self._signal = jax.jit(signal)
        self._validate = jax.jit(jax.vmap(validate_one, in_axes=(None, 0, 0)))
        self._batch = jax.jit(jax.vmap(grads_one, in_axes=(None, 0, None)))
        self._eval = jax.jit(jax.vmap(both, in_axes=(None, 0, None)))
        self._rob = jax.jit(jax.vmap(rob_one, in_axes=(None, 0, 0)))

    def _arr(self, a):
        return self._jax.jnp.asarray(np.asarray(a, dtype=float))

    def batch_grads(self, p, x0s, delta):
        out, jac = self._batch(self._arr(p), self._arr(x0s), self._arr(delta))
        out = np.asarray(out)
        jac = np.asarray(jac)
        gG = jac[:, 1, :]
        if self.problem.formula is None:
            gG = np.zeros_like(gG)
        return out[:, 0], out[:, 1], jac[:, 0, :], gG

    def evaluate(self, p, x0s, delta):
        out = np.asarray(self._eval(self._arr(p), self._arr(x0s), self._arr(delta)))
        return out[:, 0], out[:, 1]

    def robustness(self, p, x0s, deltas, chunk: int = 50_000):
        p = self._arr(p)
        x0s = np.asarray(x0s, dtype=float)
        deltas = np.asarray(deltas, dtype=float)
        out = []
        for s in range(0, len(x0s), chunk):
            out.append(np.asarray(self._rob(p, self._arr(x0s[s:s + chunk]), self._arr(deltas[s:s + chunk]))))
        return np.concatenate(out) if out else np.zeros(0)

    def validate(self, p, x0s, deltas, chunk: int = 50_000):
        p = self._arr(p)
        x0s = np.asarray(x0s, dtype=float)
        deltas = np.asarray(deltas, dtype=float)
        parts = [np.asarray(self._validate(p, self._arr(x0s[s:s + chunk]), self._arr(deltas[s:s + chunk])))
                 for s in range(0, len(x0s), chunk)]
        out = np.concatenate(parts) if parts else np.zeros((0, 3))
        return out[:, 0], out[:, 1], out[:, 2]

    def states(self, p, x0, delta) -> np.ndarray:
        sig = self._signal(self._arr(p), self._arr(x0), self._arr(delta))
        names = self.problem.dynamics.states
        return np.array([[float(env[n]) for n in names] for env in sig])

    def lagrangian_grad(self, p, x0s, delta, weights):
        _, _, gJ, gG = self.batch_grads(p, x0s, delta)
        return np.sum(gJ + np.asarray(weights)[:, None] * gG, axis=0)


ENGINES = {"tape": TapeEngine, "jax": JaxEngine}


def make_engine(problem: Problem, name: str = "jax"):
    try:
        return ENGINES[name](problem)
    except KeyError:
        raise ValueError(f"unknown engine {name!r}; choose from {sorted(ENGINES)}") from None
