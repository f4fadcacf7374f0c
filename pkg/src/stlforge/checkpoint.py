"""JSON checkpoints for a trained controller and its smoothing variables.

Floats are written with Python's shortest round-trip repr, so loading
reproduces every value bit for bit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SpecError
from .policy import Policy, Squash
from .semantics import SmoothParams

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    policy: Policy
    zeta: SmoothParams
    horizon: int
    seed: int
    formula: str | None = None

    def params(self, problem) -> np.ndarray:
        """Flat ``[theta, zeta]`` vector laid out for ``problem``."""
        if list(problem.layer_dims) != list(self.policy.layer_dims):
            raise SpecError(f"checkpoint layer dims {self.policy.layer_dims} != config {problem.layer_dims}")
        if problem.horizon != self.horizon:
            raise SpecError(f"checkpoint horizon {self.horizon} != config horizon {problem.horizon}")
        if problem.formula is not None:
            self.zeta.check_bound(problem.formula)
        if self.zeta.form != problem.zeta.form:
            raise SpecError(f"checkpoint weight form {self.zeta.form!r} != config {problem.zeta.form!r}")
        return problem.pack(self.policy.to_vector(), self.zeta)

    def to_dict(self) -> dict:
        pol = self.policy
        return {
            "format_version": FORMAT_VERSION,
            "layer_dims": [int(d) for d in pol.layer_dims],
            "activation": pol.activation,
            "squash": [s.to_dict() for s in pol.squash],
            "weights": [np.asarray(w, dtype=float).tolist() for w in pol.weights],
            "biases": [np.asarray(b, dtype=float).tolist() for b in pol.biases],
            "zeta": {
                "lambda": float(self.zeta.lam),
                "form": self.zeta.form,
                "betas": {str(k): [float(b) for b in v] for k, v in sorted(self.zeta.betas.items())},
            },
            "horizon": int(self.horizon),
            "seed": int(self.seed),
            "formula": self.formula,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Checkpoint":
        try:
            if d["format_version"] != FORMAT_VERSION:
                raise SpecError(f"unsupported checkpoint format_version {d['format_version']}")
            dims = [int(x) for x in d["layer_dims"]]
            weights = [np.array(w, dtype=float) for w in d["weights"]]
            biases = [np.array(b, dtype=float) for b in d["biases"]]
            for i, (w, b) in enumerate(zip(weights, biases)):
                if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
                    raise SpecError(f"layer {i} has shapes {w.shape}/{b.shape}, dims say {dims[i:i + 2]}")
            if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
                raise SpecError("layer count does not match layer_dims")
            pol = Policy(dims, weights, biases, [Squash(**s) for s in d["squash"]], d.get("activation", "tanh"))
            z = d["zeta"]
            zeta = SmoothParams(float(z["lambda"]), {int(k): [float(b) for b in v] for k, v in z["betas"].items()},
                                z.get("form", "squared"))
            return cls(pol, zeta, int(d["horizon"]), int(d["seed"]), d.get("formula"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"malformed checkpoint: {exc}") from exc


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "w") as fh:
        json.dump(ckpt.to_dict(), fh, indent=1)


def load_checkpoint(path) -> Checkpoint:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"checkpoint is not valid JSON: {exc}") from exc
    return Checkpoint.from_dict(d)
