"""JAX backend namespace for the model code (float64, jit/vmap friendly)."""
from __future__ import annotations

import jax

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp  # noqa: E402

_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "^": lambda a, c: a ** c,
}


class JaxOps:
    name = "jax"
    exp = staticmethod(jnp.exp)
    log = staticmethod(jnp.log)
    sqrt = staticmethod(jnp.sqrt)
    sin = staticmethod(jnp.sin)
    cos = staticmethod(jnp.cos)
    tan = staticmethod(jnp.tan)
    tanh = staticmethod(jnp.tanh)
    sigmoid = staticmethod(jax.nn.sigmoid)

    @staticmethod
    def binary(sym):
        return _BINARY[sym]

    @staticmethod
    def detached_min(values):
        return jax.lax.stop_gradient(jnp.min(jnp.stack(values), axis=0))

    @staticmethod
    def detached_max(values):
        return jax.lax.stop_gradient(jnp.max(jnp.stack(values), axis=0))

    @staticmethod
    def hard_min(values):
        return jnp.min(jnp.stack(values), axis=0)

    @staticmethod
    def hard_max(values):
        return jnp.max(jnp.stack(values), axis=0)

    @staticmethod
    def total(values):
        return jnp.sum(jnp.stack(values), axis=0)

    @staticmethod
    def affine(flat, offset, n_out, n_in, x):
        w = flat[offset:offset + n_out * n_in].reshape(n_out, n_in)
        b = flat[offset + n_out * n_in:offset + n_out * n_in + n_out]
        y = w @ jnp.stack(x) + b
        return [y[i] for i in range(n_out)]

    @staticmethod
    def where_small(x, threshold, small_fn, large_fn):
        # evaluate the regular branch at a safe point so its gradient stays finite
        small = jnp.abs(x) < threshold
        safe = jnp.where(small, threshold, x)
        lim = small_fn()
        reg = large_fn(safe)
        return [jnp.where(small, a, b) for a, b in zip(lim, reg)]


OPS = JaxOps()
