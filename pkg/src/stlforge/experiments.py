"""Helpers shared by the experiment scripts: train from a config and validate."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .config import load_config
from .engine import make_engine
from .risk import estimate_risk, sample_pairs
from .trainer import TrainConfig, TrainResult, train


@dataclass
class Validation:
    n: int
    mean_J: float
    mean_Gamma: float
    mean_rho: float
    satisfaction: float  # fraction with rho_phi >= 0
    min_rho: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def validate(engine, params, init, n: int = 10_000, seed: int = 12345) -> Validation:
    """Mean J, Gamma and rho_phi over ``n`` fresh uniform ``(x0, delta)`` pairs."""
    x0s, deltas = sample_pairs(engine.problem.dynamics, init, n, seed)
    J, G, rho = engine.validate(params, x0s, deltas)
    return Validation(n, float(J.mean()), float(G.mean()), float(rho.mean()), float(np.mean(rho >= 0)),
                      float(rho.min()))


def config_with(path, **overrides) -> TrainConfig:
    tc = load_config(path).train
    for k, v in overrides.items():
        if k == "alpha":
            tc.adam.alpha = float(v)
        else:
            setattr(tc, k, v)
    return tc


def run(tc: TrainConfig, n_val: int = 10_000, val_seed: int = 12345, progress=None):
    """Train, then validate on fresh samples; returns ``(result, engine, validation)``."""
    res: TrainResult = train(tc, progress=progress)
    eng = make_engine(res.problem, tc.engine)
    return res, eng, validate(eng, res.params, tc.build_init(), n_val, val_seed)


def risk(engine, params, init, N: int, seed: int = 1, betas=(0.95, 0.98, 0.99, 0.999)):
    return estimate_risk(engine, params, init, N, betas, seed)[0]
