"""Margin-gated gradient-switching training of neural feedback controllers.

Each iteration computes, for every initial state in a fixed sample batch, the
gradient of the performance reward J and of the smooth STL objective Gamma.
The batch members with the largest gradient norms supply two Adam candidate
updates (performance and STL) plus a slowed performance update. A fresh
initial state decides which one is taken: while its Gamma is at most the
robustness margin ``rho`` the trainer keeps the performance step only if it
does not lower Gamma there, otherwise it takes the STL step; above the margin
it takes the slow performance step.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import SpecError, TrainingDiverged
from .expr import parse_expr
from .objectives import Problem
from .plant import DynamicsSpec, InitSet, dynamics_from_dict, preset, sample_init, sample_model
from .policy import Policy, Squash, init_params
from .semantics import WTAVG_FORMS, SmoothParams, init_smooth_params
from .stl import parse_stl

BRANCHES = ("perf", "stl", "slow", "lagrangian")


@dataclass
class AdamConfig:
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(state: AdamState, grad, alpha: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[np.ndarray, AdamState]:
    """Bias-corrected Adam ascent increment and the state it would commit.

    ``state`` is not modified; the caller keeps the returned state only for
    the update it actually applies.
    """
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.m.shape:
        raise ValueError(f"gradient has shape {grad.shape}, optimizer expects {state.m.shape}")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    return alpha * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


@dataclass
class TrainConfig:
    dynamics: object  # preset name or inline dict
    init_set: dict
    formula: str | None
    reward: str
    layer_dims: list[int]
    horizon: int = 20
    rho: float = 0.3
    tau: float = 100.0
    gamma: float = 0.9
    batch_size: int = 16
    iterations: int = 1000
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0
    wtavg_form: str = "squared"
    definitions: dict = field(default_factory=dict)
    squash: list | None = None
    mode: str = "switching"  # or "lagrangian"
    lagrange_weight: float = 1.0
    engine: str = "jax"

    def __post_init__(self):
        if isinstance(self.adam, dict):
            self.adam = AdamConfig(**self.adam)
        if self.tau <= 1:
            raise SpecError("tau must be > 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise SpecError("gamma must lie in [0, 1]")
        if self.horizon < 1 or self.batch_size < 1 or self.iterations < 0:
            raise SpecError("horizon and batch size must be positive, iterations non-negative")
        if self.wtavg_form not in WTAVG_FORMS:
            raise SpecError(f"wtavg_form must be one of {WTAVG_FORMS}")
        if self.mode not in ("switching", "lagrangian"):
            raise SpecError(f"unknown training mode {self.mode!r}")
        if self.lagrange_weight < 0:
            raise SpecError("lagrange_weight must be non-negative")

    def build_dynamics(self) -> DynamicsSpec:
        if isinstance(self.dynamics, str):
            return preset(self.dynamics)
        return dynamics_from_dict(self.dynamics)

    def build_init(self) -> InitSet:
        return InitSet.from_dict(self.init_set)

    def build_problem(self) -> Problem:
        dyn = self.build_dynamics()
        names = dyn.states
        defs = {}
        for key, text in self.definitions.items():
            defs[key] = parse_expr(text, names, defs)
        phi = parse_stl(self.formula, names, self.horizon, defs) if self.formula else None
        reward = parse_expr(self.reward, names, defs)
        squash = [Squash(**s) for s in self.squash] if self.squash else list(dyn.squash)
        zeta = init_smooth_params(phi, self.wtavg_form, seed=self.seed) if phi else SmoothParams(1.0, {}, self.wtavg_form)
        return Problem(dyn, list(self.layer_dims), squash, self.horizon, reward, self.gamma, phi, zeta)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


@dataclass
class LogRecord:
    iter: int
    branch: str
    J: float
    Gamma: float
    norm_d1: float
    norm_d2: float
    b1: int
    b2: int
    # Gamma at the fresh state after the performance candidate (NaN when not evaluated)
    Gamma_perf: float = math.nan


class TrainLog:
    FIELDS = ("iter", "branch", "J", "Gamma", "norm_d1", "norm_d2", "b1", "b2", "Gamma_perf")

    def __init__(self):
        self.records: list[LogRecord] = []

    def append(self, rec: LogRecord) -> None:
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def branch_counts(self) -> dict[str, int]:
        counts = {b: 0 for b in BRANCHES}
        for r in self.records:
            counts[r.branch] += 1
        return counts

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.FIELDS)
            for r in self.records:
                w.writerow([_cell(getattr(r, f)) for f in self.FIELDS])

    @classmethod
    def from_csv(cls, path) -> "TrainLog":
        log = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                log.append(LogRecord(int(row["iter"]), row["branch"], float(row["J"]), float(row["Gamma"]),
                                     float(row["norm_d1"]), float(row["norm_d2"]), int(row["b1"]), int(row["b2"]),
                                     float(row.get("Gamma_perf") or "nan")))
        return log


def _cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v


@dataclass
class TrainResult:
    policy: Policy
    zeta: SmoothParams
    log: TrainLog
    problem: Problem
    params: np.ndarray
    runtime: float


def initial_params(config: TrainConfig, problem: Problem) -> np.ndarray:
    pol = init_params(problem.layer_dims, config.seed, problem.squash)
    return problem.pack(pol.to_vector(), problem.zeta)


def _argmax_first(values: np.ndarray) -> int:
    # np.argmax returns the lowest index among ties
    return int(np.argmax(values))


def train(config: TrainConfig, engine=None, progress=None, params0=None) -> TrainResult:
    """Run the configured training loop; deterministic for a given seed."""
    from .engine import make_engine

    problem = config.build_problem()
    if engine is None:
        engine = make_engine(problem, config.engine)
    init = config.build_init()
    dyn = problem.dynamics
    if init.dim != dyn.n:
        raise SpecError(f"init set has dimension {init.dim}, plant has {dyn.n} states")
    rng = np.random.default_rng(config.seed)
    p = np.array(params0, dtype=float) if params0 is not None else initial_params(config, problem)
    batch = sample_init(init, rng, config.batch_size)
    a = config.adam
    opt_perf = AdamState.zeros(len(p))
    opt_stl = AdamState.zeros(len(p))
    log = TrainLog()
    lam_index = problem.n_theta
    t0 = time.perf_counter()

    for it in range(config.iterations):
        delta = sample_model(dyn, rng)
        J_b, G_b, gJ, gG = engine.batch_grads(p, batch, delta)
        x0i = sample_init(init, rng)

        if config.mode == "lagrangian":
            g = np.sum(gJ + config.lagrange_weight * gG, axis=0)
            _check_finite(it, g, "lagrangian gradient")
            inc, opt_perf = adam_step(opt_perf, g, a.alpha, a.beta1, a.beta2, a.eps)
            J_i, G_i = engine.evaluate(p, x0i[None, :], delta)
            log.append(LogRecord(it, "lagrangian", float(J_i[0]), float(G_i[0]),
                                 float(np.linalg.norm(g)), 0.0, -1, -1))
            p = p + inc
            if progress:
                progress(it, log.records[-1])
            continue

        n1 = np.linalg.norm(gJ, axis=1)
        n2 = np.linalg.norm(gG, axis=1)
        b1, b2 = _argmax_first(n1), _argmax_first(n2)
        d1, d2 = gJ[b1], gG[b2]
        inc1, st1 = adam_step(opt_perf, d1, a.alpha, a.beta1, a.beta2, a.eps)
        inc2, st2 = adam_step(opt_stl, d2, a.alpha, a.beta1, a.beta2, a.eps)
        p_perf = p + inc1
        p_stl = p + inc2
        p_slow = p + inc1 / config.tau

        J_i, G_i = engine.evaluate(p, x0i[None, :], delta)
        J_i, G_i = float(J_i[0]), float(G_i[0])
        rec = LogRecord(it, "slow", J_i, G_i, float(n1[b1]), float(n2[b2]), b1, b2)
        if not (np.isfinite(d1).all() and np.isfinite(d2).all() and math.isfinite(J_i)
                and (math.isfinite(G_i) or problem.formula is None)):
            raise TrainingDiverged(f"non-finite gradient or objective at iteration {it}", rec)

        if G_i <= config.rho:
            _, G_new = engine.evaluate(p_perf, x0i[None, :], delta)
            rec.Gamma_perf = float(G_new[0])
            if rec.Gamma_perf >= G_i:
                rec.branch = "perf"
                p, opt_perf = p_perf, st1
            else:
                rec.branch = "stl"
                p, opt_stl = p_stl, st2
        else:
            # slow step: scaled increment, unscaled moments
            p, opt_perf = p_slow, st1
        if problem.formula is not None:
            lam = p[lam_index]
            assert lam * lam + 1.0 > 1.0, "eta must stay above 1"
        log.append(rec)
        if progress:
            progress(it, rec)

    runtime = time.perf_counter() - t0
    theta, zeta = problem.split(p)
    pol = init_params(problem.layer_dims, config.seed, problem.squash).with_vector(np.asarray(theta))
    zeta = SmoothParams(float(zeta.lam), {k: [float(b) for b in v] for k, v in zeta.betas.items()}, zeta.form)
    return TrainResult(pol, zeta, log, problem, p, runtime)


def _check_finite(it, g, what):
    if not np.all(np.isfinite(g)):
        raise TrainingDiverged(f"non-finite {what} at iteration {it}")
