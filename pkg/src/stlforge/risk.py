"""Monte-Carlo risk estimates (VaR / CVaR) of the negated STL robustness."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .plant import InitSet, sample_init, sample_model

CHUNK = 25_000  # samples per RNG stream; fixed so results do not depend on thread count


def nearest_rank(n: int, beta: float) -> int:
    """1-based rank ``ceil(beta * n)``, computed exactly on the decimal value of ``beta``."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    r = math.ceil(Fraction(repr(float(beta))) * n)
    return min(max(r, 1), n)


def var_cvar(neg_z, beta: float) -> tuple[float, float]:
    """Nearest-rank VaR and closed-tail CVaR of the samples ``neg_z``."""
    s = np.sort(np.asarray(neg_z, dtype=float))
    if s.size == 0:
        raise ValueError("no samples")
    var = float(s[nearest_rank(s.size, beta) - 1])
    tail = s[s >= var]
    # exact summation; the clamp only absorbs rounding since every tail value is >= var
    return var, max(var, math.fsum(tail) / tail.size)


@dataclass
class RiskEntry:
    beta: float
    neg_var: float
    neg_cvar: float
    N: int
    seed: int

    @property
    def var(self) -> float:
        return -self.neg_var

    @property
    def cvar(self) -> float:
        return -self.neg_cvar


@dataclass
class RiskReport:
    entries: list[RiskEntry]
    summary: dict
    config: dict = field(default_factory=dict)

    def entry(self, beta: float) -> RiskEntry:
        for e in self.entries:
            if e.beta == beta:
                return e
        raise KeyError(f"beta={beta} was not computed; have {[e.beta for e in self.entries]}")

    def to_dict(self) -> dict:
        return {"config": self.config, "entries": [asdict(e) for e in self.entries], "summary": self.summary}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RiskReport":
        return cls([RiskEntry(**e) for e in d["entries"]], d["summary"], d.get("config", {}))


def report_from_samples(rho, betas, seed: int = 0, config=None) -> RiskReport:
    """Build a report from robustness samples ``rho`` (so ``Z = rho``)."""
    rho = np.asarray(rho, dtype=float)
    neg = -rho
    entries = []
    for b in betas:
        var, cvar = var_cvar(neg, b)
        entries.append(RiskEntry(float(b), -var, -cvar, int(rho.size), int(seed)))
    summary = {"min": float(rho.min()), "max": float(rho.max()), "mean": float(rho.mean()),
               "satisfaction": float(np.mean(rho > 0))}
    return RiskReport(entries, summary, dict(config or {}))


def sample_pairs(dyn, init: InitSet, n: int, seed: int):
    """``n`` iid ``(x0, delta)`` pairs drawn from per-chunk child streams of ``seed``."""
    n_chunks = max(1, math.ceil(n / CHUNK))
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    xs, ds = [], []
    for c, ss in enumerate(streams):
        k = min(CHUNK, n - c * CHUNK)
        rng = np.random.default_rng(ss)
        xs.append(sample_init(init, rng, k))
        ds.append(sample_model(dyn, rng, k))
    return np.concatenate(xs), np.concatenate(ds)


def robustness_samples(engine, params, init: InitSet, n: int, seed: int = 0, threads: int = 1) -> np.ndarray:
    dyn = engine.problem.dynamics
    x0s, deltas = sample_pairs(dyn, init, n, seed)
    bounds = [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]

    def work(b):
        return engine.robustness(params, x0s[b[0]:b[1]], deltas[b[0]:b[1]])

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    return np.concatenate(parts)


def estimate_risk(engine, params, init: InitSet, N: int = 1_000_000, betas=(0.95, 0.98, 0.99, 0.999),
                  seed: int = 0, threads: int = 1, min_samples: int = 1000) -> tuple[RiskReport, np.ndarray]:
    """Sample ``N`` closed-loop rollouts and report ``-VaR`` / ``-CVaR`` per ``beta``.

    Returns the report and the raw robustness samples.
    """
    if N < min_samples:
        raise ValueError(f"N must be at least {min_samples}")
    betas = [float(b) for b in betas]
    for b in betas:
        if not 0.0 < b < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {b}")
    if engine.problem.formula is None:
        raise ValueError("risk estimation needs an STL formula")
    rho = robustness_samples(engine, params, init, N, seed, threads)
    return report_from_samples(rho, betas, seed, {"N": N, "betas": betas, "seed": seed}), rho


@dataclass
class Guarantee:
    beta: float
    bound: float  # robustness lower bound holding with probability >= beta

    def __str__(self):
        return f"rho_phi >= {self.bound:.6g} with probability >= {self.beta:g}"


def probabilistic_guarantee(report: RiskReport, beta: float) -> Guarantee:
    e = report.entry(beta)
    return Guarantee(beta, e.neg_var)
