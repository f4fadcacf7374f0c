"""Bounded feedback controllers: a tanh MLP followed by a fixed squashing stage."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

SQUASH_KINDS = ("tanh", "sigmoid")


@dataclass(frozen=True)
class Squash:
    """``u = offset + gain * act(pre_scale * a)``; not trainable."""

    kind: str = "tanh"
    pre_scale: float = 1.0
    gain: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in SQUASH_KINDS:
            raise ValueError(f"unknown squash kind {self.kind!r}")

    def apply(self, a, ops=ad.OPS):
        act = ops.tanh if self.kind == "tanh" else ops.sigmoid
        return self.offset + self.gain * act(self.pre_scale * a)

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind == "tanh":
            return self.offset - abs(self.gain), self.offset + abs(self.gain)
        ends = (self.offset, self.offset + self.gain)
        return min(ends), max(ends)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "pre_scale": self.pre_scale, "gain": self.gain, "offset": self.offset}


def param_count(dims) -> int:
    return sum((dims[i] + 1) * dims[i + 1] for i in range(len(dims) - 1))


def forward_flat(dims, squash, flat, x, t_norm, ops=ad.OPS):
    """Controls for state ``x`` at normalised time ``t_norm``.

    ``flat`` holds every layer's weights (row-major) followed by its biases.
    """
    if len(x) + 1 != dims[0]:
        raise ValueError(f"controller expects {dims[0] - 1} state inputs, got {len(x)}")
    h = list(x) + [t_norm]
    off = 0
    n_layers = len(dims) - 1
    for layer in range(n_layers):
        n_in, n_out = dims[layer], dims[layer + 1]
        h = ops.affine(flat, off, n_out, n_in, h)
        off += (n_in + 1) * n_out
        if layer < n_layers - 1:
            h = [ops.tanh(v) for v in h]
    return [s.apply(a, ops) for s, a in zip(squash, h)]


@dataclass
class Policy:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    squash: list[Squash] = field(default_factory=list)
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation != "tanh":
            raise ValueError("only tanh hidden layers are supported")
        if len(self.squash) != self.layer_dims[-1]:
            raise ValueError(f"{len(self.squash)} squash descriptors for {self.layer_dims[-1]} outputs")

    @property
    def n_params(self) -> int:
        return param_count(self.layer_dims)

    def to_vector(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(np.asarray(w, dtype=float).ravel())
            parts.append(np.asarray(b, dtype=float).ravel())
        return np.concatenate(parts)

    def with_vector(self, vec) -> "Policy":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {vec.shape}")
        weights, biases = [], []
        off = 0
        for n_in, n_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            weights.append(vec[off:off + n_in * n_out].reshape(n_out, n_in).copy())
            off += n_in * n_out
            biases.append(vec[off:off + n_out].copy())
            off += n_out
        return Policy(list(self.layer_dims), weights, biases, list(self.squash), self.activation)

    def forward(self, x, t: int, horizon: int, ops=ad.OPS, flat=None):
        if flat is None:
            flat = self.to_vector().tolist()
        return forward_flat(self.layer_dims, self.squash, flat, x, t / horizon, ops)


def init_params(dims, seed: int = 0, squash=None) -> Policy:
    """Glorot-uniform weights, zero biases."""
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ValueError("need at least an input and an output layer")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    if squash is None:
        squash = [Squash() for _ in range(dims[-1])]
    return Policy(dims, weights, biases, list(squash))
